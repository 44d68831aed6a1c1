//! Finite-block experiments for the direct and converse coding statements.
//!
//! Both experiments check inequality chains that hold exactly for every block
//! length, so a violation beyond [`CHAIN_TOL`] means a numerical or
//! implementation fault, never a physics outcome:
//!
//! - direct: `F ≥ 2 φ_n(q_n) − 1 ≥ 1 − ε` for `q_n = HP(D_n, ε/2)`, plus `F ≤ F′ ≤ √φ_n(q_n)`;
//! - converse: `F ≤ F′ ≤ √φ_n(q)` for every coding supported in `q`.
//!
//! The asymptotic claims (rate against `h ± δ`) are only reported.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::coding::{fidelity, fidelity_sqrt, optimal_encoder, theorem1_coding, CodingScheme};
use crate::codec::ensemble::{coarse_grain, extremal_ensemble, Ensemble, Mixer, RANK_FLOOR};
use crate::codec::subspace::{check_level, high_prob_subspace, Projector};
use crate::density::DensityMatrix;
use crate::entropy::EntropyTrace;
use crate::error::{Error, Result};
use crate::format::{csv_number, csv_optional};
use crate::source::SourceModel;

pub const CHAIN_TOL: f64 = 1e-10;
/// Extra ensemble members beyond the rank, capped at this many.
const MAX_EXTRA_MEMBERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub exact_chain_holds: bool,
    /// Largest amount by which any link of the exact chain fails (≤ 0 when it holds).
    pub max_chain_violation: f64,
    /// `F ≥ 1 − ε` (direct experiment).
    pub fidelity_target_met: Option<bool>,
    /// `rate < ĥ + δ` (direct experiment, informational at finite n).
    pub rate_below_h_plus_delta: Option<bool>,
    /// `rate ≤ ĥ − δ` (converse experiment).
    pub rate_at_most_h_minus_delta: Option<bool>,
    /// Best fidelity found stays below one (converse experiment).
    pub fidelity_below_one: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub projector: String,
    pub ensemble: String,
    pub encoder: String,
    pub rank: usize,
    pub members: usize,
    pub phi_q: f64,
    pub fidelity: f64,
    pub fidelity_sqrt: f64,
    pub upper_bound: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: Theorem,
    pub source: String,
    pub n: usize,
    pub eps: Option<f64>,
    /// Level of the projector actually used (`ε/2` for the direct experiment).
    pub hp_level: Option<f64>,
    pub delta: f64,
    /// Which estimator `h_hat` is; always the last block-entropy increment.
    pub h_estimator: String,
    pub h_hat: f64,
    pub h_hat_ratio: f64,
    pub dimension: usize,
    pub log_dim: f64,
    pub rate: f64,
    pub fidelity: f64,
    pub fidelity_sqrt: f64,
    pub phi_q: f64,
    /// `2 φ_n(q) − 1`
    pub lower_bound: Option<f64>,
    /// `√φ_n(q)`
    pub upper_bound: f64,
    pub eta: Option<f64>,
    /// Smallest `η` for which the asymptotic lower level of `β/n` exceeds `h − δ`, using `ĥ`.
    pub eta_threshold: Option<f64>,
    pub seed: u64,
    pub ensemble_size: usize,
    pub trials: usize,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trial_records: Vec<TrialRecord>,
}

pub const REPORT_CSV_HEADER: &str = "theorem,source,n,eps,hp_level,delta,h_hat,h_hat_ratio,dimension,log_dim,rate,fidelity,fidelity_sqrt,phi_q,lower_bound,upper_bound,eta,eta_threshold,seed,ensemble_size,trials,chain_holds,max_chain_violation";

impl TheoremReport {
    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        let theorem = match self.theorem {
            Theorem::Theorem1 => "theorem1",
            Theorem::Theorem2 => "theorem2",
        };
        let _ = write!(
            row,
            "{theorem},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.source,
            self.n,
            csv_optional(self.eps),
            csv_optional(self.hp_level),
            csv_number(self.delta),
            csv_number(self.h_hat),
            csv_number(self.h_hat_ratio),
            self.dimension,
            csv_number(self.log_dim),
            csv_number(self.rate),
            csv_number(self.fidelity),
            csv_number(self.fidelity_sqrt),
            csv_number(self.phi_q),
            csv_optional(self.lower_bound),
            csv_number(self.upper_bound),
            csv_optional(self.eta),
            csv_optional(self.eta_threshold),
            self.seed,
            self.ensemble_size,
            self.trials,
            self.verdict.exact_chain_holds,
            csv_number(self.verdict.max_chain_violation),
        );
        row
    }
}

pub fn reports_to_csv(reports: &[TheoremReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// `h/(1−ε) − ε/(1−ε) ln d`, the asymptotic lower level for `β_{ε,n}/n`.
pub fn beta_lower_level(h: f64, eps: f64, log_d: f64) -> f64 {
    h / (1.0 - eps) - eps / (1.0 - eps) * log_d
}

/// `(ln d − h) / (ln d − h + δ)`: every `η` above it satisfies
/// `h/η − (1−η)/η ln d > h − δ`.
pub fn converse_eta_threshold(h: f64, delta: f64, log_d: f64) -> f64 {
    let gap = (log_d - h).max(0.0);
    gap / (gap + delta)
}

/// Outcome of the converse chain `F ≤ F′ ≤ √φ(q)` for one coding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseCheck {
    pub phi_q: f64,
    pub fidelity: f64,
    pub fidelity_sqrt: f64,
    pub upper_bound: f64,
    pub violation: f64,
}

impl ConverseCheck {
    pub fn holds(&self) -> bool {
        self.violation <= CHAIN_TOL
    }
}

pub fn converse_chain(density: &DensityMatrix, ens: &Ensemble, scheme: &CodingScheme) -> Result<ConverseCheck> {
    let phi_q = scheme.projector.weight(density.matrix());
    let f = fidelity(ens, scheme)?;
    let f_sqrt = fidelity_sqrt(ens, scheme)?;
    let upper_bound = phi_q.max(0.0).sqrt();
    Ok(ConverseCheck {
        phi_q,
        fidelity: f,
        fidelity_sqrt: f_sqrt,
        upper_bound,
        violation: (f - f_sqrt).max(f_sqrt - upper_bound),
    })
}

/// Outcome of the direct chain `F ≥ 2φ(q) − 1 ≥ 1 − ε` (and the converse links) for one coding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectCheck {
    pub phi_q: f64,
    pub fidelity: f64,
    pub fidelity_sqrt: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub violation: f64,
}

pub fn direct_chain(density: &DensityMatrix, eps: f64, ens: &Ensemble, scheme: &CodingScheme) -> Result<DirectCheck> {
    let converse = converse_chain(density, ens, scheme)?;
    let lower_bound = 2.0 * converse.phi_q - 1.0;
    let violation = [
        lower_bound - converse.fidelity,
        (1.0 - eps) - lower_bound,
        converse.violation,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(DirectCheck {
        phi_q: converse.phi_q,
        fidelity: converse.fidelity,
        fidelity_sqrt: converse.fidelity_sqrt,
        lower_bound,
        upper_bound: converse.upper_bound,
        violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub mixer_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
}

fn check_block(densities: &[DensityMatrix], n: usize) -> Result<&DensityMatrix> {
    if n == 0 || densities.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need densities D_1..D_{n}, got {}",
            densities.len()
        )));
    }
    Ok(&densities[n - 1])
}

fn mixer_members(rank: usize) -> usize {
    rank + rank.min(MAX_EXTRA_MEMBERS)
}

pub fn theorem1_experiment(s: &SourceModel, params: &Theorem1Params, cap: usize) -> Result<TheoremReport> {
    let densities = s.densities(params.n, cap)?;
    theorem1_from_densities(&densities, params)
}

/// Direct experiment on precomputed `D_1, …, D_n`.
pub fn theorem1_from_densities(densities: &[DensityMatrix], params: &Theorem1Params) -> Result<TheoremReport> {
    check_level(params.eps)?;
    let n = params.n;
    let density = check_block(densities, n)?;
    let trace = EntropyTrace::from_densities(&densities[..n])?;
    let h_hat = trace.h_hat_increment;

    let hp = high_prob_subspace(density, params.eps / 2.0)?;
    let rank = hp.eigen.rank_above(RANK_FLOOR);
    let mut rng = ChaCha8Rng::seed_from_u64(params.mixer_seed);
    let mixer = Mixer::random(mixer_members(rank), rank, &mut rng);
    let ens = extremal_ensemble(density, &mixer)?;
    let scheme = theorem1_coding(&ens, &hp.projector)?;
    let check = direct_chain(density, params.eps, &ens.to_mixed(), &scheme)?;

    let log_dim = hp.log_dim();
    let rate = log_dim / n as f64;
    Ok(TheoremReport {
        theorem: Theorem::Theorem1,
        source: String::new(),
        n,
        eps: Some(params.eps),
        hp_level: Some(params.eps / 2.0),
        delta: params.delta,
        h_estimator: "increment".into(),
        h_hat,
        h_hat_ratio: trace.h_hat_ratio,
        dimension: hp.dimension,
        log_dim,
        rate,
        fidelity: check.fidelity,
        fidelity_sqrt: check.fidelity_sqrt,
        phi_q: check.phi_q,
        lower_bound: Some(check.lower_bound),
        upper_bound: check.upper_bound,
        eta: None,
        eta_threshold: None,
        seed: params.mixer_seed,
        ensemble_size: ens.len(),
        trials: 1,
        verdict: Verdict {
            exact_chain_holds: check.violation <= CHAIN_TOL,
            max_chain_violation: check.violation,
            fidelity_target_met: Some(check.fidelity >= 1.0 - params.eps - CHAIN_TOL),
            rate_below_h_plus_delta: Some(rate < h_hat + params.delta),
            rate_at_most_h_minus_delta: None,
            fidelity_below_one: None,
        },
        trial_records: Vec::new(),
    })
}

pub fn theorem2_experiment(s: &SourceModel, params: &Theorem2Params, cap: usize) -> Result<TheoremReport> {
    let densities = s.densities(params.n, cap)?;
    theorem2_from_densities(&densities, params)
}

/// `floor(exp(n (h − δ)))`, the converse subspace dimension before clamping.
pub fn converse_rank(n: usize, h: f64, delta: f64) -> f64 {
    (n as f64 * (h - delta)).exp().floor()
}

/// Converse experiment on precomputed `D_1, …, D_n`.
///
/// Trial `t` uses the high-probability projector of rank `r` when `t` is even
/// and a Haar-random rank-`r` projector when odd; the ensemble cycles through
/// a randomly mixed pure decomposition, a coarse-grained mixed decomposition
/// and the eigen-decomposition. Each trial runs the optimal encoder, and pure
/// ensembles also run the direct-style encoder.
pub fn theorem2_from_densities(densities: &[DensityMatrix], params: &Theorem2Params) -> Result<TheoremReport> {
    let n = params.n;
    let density = check_block(densities, n)?;
    if params.trials == 0 {
        return Err(Error::InvalidParameter("converse experiment needs at least one trial".into()));
    }
    let trace = EntropyTrace::from_densities(&densities[..n])?;
    let h_hat = trace.h_hat_increment;
    let raw_rank = converse_rank(n, h_hat, params.delta);
    if !(raw_rank >= 1.0) {
        return Err(Error::RankUnderflow {
            rank: raw_rank,
            n,
            h: h_hat,
            delta: params.delta,
        });
    }
    let dim = density.dim();
    let rank = (raw_rank as usize).min(dim);
    let eigen = density.eigen()?;
    let hp = Projector::top_eigenvectors(&eigen, rank);
    let eta = hp.weight(density.matrix());
    let density_rank = eigen.rank_above(RANK_FLOOR);

    let per_trial = (0..params.trials)
        .into_par_iter()
        .map(|t| converse_trial(density, &hp, density_rank, t, params.seed))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let max_f = records.iter().map(|r| r.fidelity).fold(f64::NEG_INFINITY, f64::max);
    let max_f_sqrt = records.iter().map(|r| r.fidelity_sqrt).fold(f64::NEG_INFINITY, f64::max);
    let max_violation = records.iter().map(|r| r.violation).fold(f64::NEG_INFINITY, f64::max);
    let log_dim = (rank as f64).ln();
    let rate = log_dim / n as f64;
    let log_d = (density.site_dim() as f64).ln();
    Ok(TheoremReport {
        theorem: Theorem::Theorem2,
        source: String::new(),
        n,
        eps: None,
        hp_level: None,
        delta: params.delta,
        h_estimator: "increment".into(),
        h_hat,
        h_hat_ratio: trace.h_hat_ratio,
        dimension: rank,
        log_dim,
        rate,
        fidelity: max_f,
        fidelity_sqrt: max_f_sqrt,
        phi_q: eta,
        lower_bound: None,
        upper_bound: eta.max(0.0).sqrt(),
        eta: Some(eta),
        eta_threshold: Some(converse_eta_threshold(h_hat, params.delta, log_d)),
        seed: params.seed,
        ensemble_size: records.iter().map(|r| r.members).max().unwrap_or(0),
        trials: records.len(),
        verdict: Verdict {
            exact_chain_holds: max_violation <= CHAIN_TOL,
            max_chain_violation: max_violation,
            fidelity_target_met: None,
            rate_below_h_plus_delta: None,
            rate_at_most_h_minus_delta: Some(rate <= h_hat - params.delta + 1e-12),
            fidelity_below_one: Some(max_f < 1.0),
        },
        trial_records: records,
    })
}

fn converse_trial(
    density: &DensityMatrix,
    hp: &Projector,
    density_rank: usize,
    t: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);

    let (projector_kind, q) = if t % 2 == 0 {
        ("hp", hp.clone())
    } else {
        ("random", Projector::random(density.dim(), hp.rank(), &mut rng))
    };

    let members = mixer_members(density_rank);
    let (ensemble_kind, pure, ens) = match (t / 2) % 3 {
        0 => {
            let pure = extremal_ensemble(density, &Mixer::random(members, density_rank, &mut rng))?;
            let mixed = pure.to_mixed();
            ("extremal", Some(pure), mixed)
        }
        1 => {
            let pure = extremal_ensemble(density, &Mixer::random(members, density_rank, &mut rng))?;
            let groups = rng.random_range(1..=pure.len());
            ("coarse", None, coarse_grain(&pure, groups, &mut rng)?)
        }
        _ => {
            let pure = extremal_ensemble(density, &Mixer::Eigen)?;
            let mixed = pure.to_mixed();
            ("schatten", Some(pure), mixed)
        }
    };

    let mut schemes = vec![("optimal", optimal_encoder(&ens, &q)?)];
    if let Some(pure) = &pure {
        schemes.push(("theorem1", theorem1_coding(pure, &q)?));
    }

    schemes
        .into_iter()
        .map(|(encoder, scheme)| {
            let check = converse_chain(density, &ens, &scheme)?;
            Ok(TrialRecord {
                trial: t,
                projector: projector_kind.into(),
                ensemble: ensemble_kind.into(),
                encoder: encoder.into(),
                rank: q.rank(),
                members: ens.len(),
                phi_q: check.phi_q,
                fidelity: check.fidelity,
                fidelity_sqrt: check.fidelity_sqrt,
                upper_bound: check.upper_bound,
                violation: check.violation,
            })
        })
        .collect()
}

/// One row of the `β_{ε,n}` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub n: usize,
    pub eps: f64,
    pub dimension: usize,
    pub beta: f64,
    pub beta_per_site: f64,
    pub captured_weight: f64,
}

pub fn beta_point(density: &DensityMatrix, eps: f64) -> Result<BetaPoint> {
    let hp = high_prob_subspace(density, eps)?;
    let n = density.n_sites();
    Ok(BetaPoint {
        n,
        eps,
        dimension: hp.dimension,
        beta: hp.log_dim(),
        beta_per_site: hp.log_dim() / n as f64,
        captured_weight: hp.captured_weight,
    })
}

pub const BETA_CSV_HEADER: &str = "n,eps,dim,beta_over_n,captured_weight";

pub fn beta_points_to_csv(points: &[BetaPoint]) -> String {
    let mut out = String::from(BETA_CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.n,
            csv_number(p.eps),
            p.dimension,
            csv_number(p.beta_per_site),
            csv_number(p.captured_weight)
        );
    }
    out
}
