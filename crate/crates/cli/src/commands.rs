use std::fs;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use qsource::codec::experiment::{beta_point, beta_points_to_csv, reports_to_csv, BetaPoint};
use qsource::codec::{theorem1_from_densities, theorem2_from_densities, Theorem1Params, Theorem2Params, TheoremReport};
use qsource::source::{marginal_consistency, validate_source, ConsistencyReport, ValidationReport};
use qsource::{DensityMatrix, EntropyTrace, SourceModel, Units};
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{EigenCache, Lookup};
use crate::config::{Format, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// An exact inequality failed its self-check.
    Violation,
    /// The source failed validation.
    InvalidSource,
}

/// Everything a command needs besides its own parameters.
pub struct Context {
    pub source: Source,
    pub cap: usize,
    pub cache: Option<EigenCache>,
    pub format: Format,
    pub units: Units,
    pub out: Option<PathBuf>,
}

impl Context {
    /// `D_1, …, D_{n_max}` with spectra taken from the cache where possible.
    fn densities(&self, n_max: usize) -> Result<Vec<DensityMatrix>> {
        let densities = self.source.model.densities(n_max, self.cap)?;
        if let Some(cache) = &self.cache {
            let lookups = densities.par_iter().map(|d| cache.fill(d)).collect::<Result<Vec<_>>>()?;
            let count = |kind| lookups.iter().filter(|&&l| l == kind).count();
            eprintln!(
                "cache: {} hit, {} miss, {} recomputed",
                count(Lookup::Hit),
                count(Lookup::Miss),
                count(Lookup::Recomputed)
            );
        }
        Ok(densities)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(&text)
    }
}

fn sorted_unique<T: Copy + PartialOrd>(mut values: Vec<T>) -> Vec<T> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("parameters are finite"));
    values.dedup();
    values
}

#[derive(Serialize)]
struct EntropyOutput<'a> {
    source: &'a str,
    units: Units,
    #[serde(flatten)]
    trace: EntropyTrace,
}

pub fn entropy(ctx: &Context, n_max: usize) -> Result<Status> {
    let trace = EntropyTrace::from_densities(&ctx.densities(n_max)?)?;
    let u = |x: f64| ctx.units.convert(x);
    eprintln!(
        "h_hat: ratio {:.12}, increment {:.12}, gap {:.3e} ({:?})",
        u(trace.h_hat_ratio),
        u(trace.h_hat_increment),
        u(trace.estimator_gap()),
        ctx.units
    );
    match ctx.format {
        Format::Csv => ctx.emit(&trace.to_csv(ctx.units))?,
        Format::Json => {
            let converted: Vec<f64> = trace.rows.iter().map(|r| u(r.entropy)).collect();
            ctx.emit_json(&EntropyOutput {
                source: &ctx.source.label,
                units: ctx.units,
                trace: EntropyTrace::from_entropies(&converted)?,
            })?
        }
    }
    Ok(Status::Ok)
}

pub fn hps(ctx: &Context, n_max: usize, eps: Vec<f64>) -> Result<Status> {
    let eps = sorted_unique(eps);
    let densities = ctx.densities(n_max)?;
    let points = densities
        .iter()
        .flat_map(|d| eps.iter().map(move |&e| (d, e)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(d, e)| {
            let mut p = beta_point(d, e)?;
            p.beta = ctx.units.convert(p.beta);
            p.beta_per_site = ctx.units.convert(p.beta_per_site);
            Ok(p)
        })
        .collect::<Result<Vec<BetaPoint>>>()?;
    match ctx.format {
        Format::Csv => ctx.emit(&beta_points_to_csv(&points))?,
        Format::Json => ctx.emit_json(&points)?,
    }
    Ok(Status::Ok)
}

fn finish_reports(ctx: &Context, mut reports: Vec<TheoremReport>) -> Result<Status> {
    let mut status = Status::Ok;
    for r in &mut reports {
        r.source = ctx.source.label.clone();
        eprintln!(
            "{:?} n={} eps={:?} seed={}: dim {} rate {:.6} F {:.6} F' {:.6} bound {:.6} chain {}",
            r.theorem,
            r.n,
            r.eps,
            r.seed,
            r.dimension,
            r.rate,
            r.fidelity,
            r.fidelity_sqrt,
            r.upper_bound,
            if r.verdict.exact_chain_holds { "ok" } else { "VIOLATED" }
        );
        if !r.verdict.exact_chain_holds {
            status = Status::Violation;
        }
    }
    match ctx.format {
        Format::Csv => ctx.emit(&reports_to_csv(&reports))?,
        Format::Json => ctx.emit_json(&reports)?,
    }
    if status == Status::Violation {
        eprintln!("error: an exact inequality failed its self-check");
    }
    Ok(status)
}

pub fn theorem1(ctx: &Context, ns: Vec<usize>, eps: Vec<f64>, delta: f64, seeds: Vec<u64>) -> Result<Status> {
    let (ns, eps, seeds) = (sorted_unique(ns), sorted_unique(eps), sorted_unique(seeds));
    let densities = ctx.densities(*ns.last().expect("validated non-empty"))?;
    let mut grid = Vec::new();
    for &n in &ns {
        for &eps in &eps {
            for &mixer_seed in &seeds {
                grid.push(Theorem1Params { n, eps, delta, mixer_seed });
            }
        }
    }
    let reports = grid
        .par_iter()
        .map(|p| Ok(theorem1_from_densities(&densities, p)?))
        .collect::<Result<Vec<_>>>()?;
    finish_reports(ctx, reports)
}

pub fn theorem2(ctx: &Context, ns: Vec<usize>, delta: f64, trials: usize, seeds: Vec<u64>) -> Result<Status> {
    let (ns, seeds) = (sorted_unique(ns), sorted_unique(seeds));
    let densities = ctx.densities(*ns.last().expect("validated non-empty"))?;
    let grid: Vec<Theorem2Params> = ns
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&seed| Theorem2Params { n, delta, trials, seed }))
        .collect();
    let reports = grid
        .par_iter()
        .map(|p| Ok(theorem2_from_densities(&densities, p)?))
        .collect::<Result<Vec<_>>>()?;
    finish_reports(ctx, reports)
}

#[derive(Serialize)]
struct ValidationOutput<'a> {
    source: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    kraus: Option<ValidationReport>,
    marginals: Vec<ConsistencyReport>,
}

/// Marginal residuals above this fail validation.
const MARGINAL_TOL: f64 = 1e-9;

pub fn validate(ctx: &Context, n_max: usize) -> Result<Status> {
    let kraus = match &ctx.source.model {
        SourceModel::FinitelyCorrelated { source } => Some(validate_source(source)),
        SourceModel::Product { .. } => None,
    };
    let model_ok = ctx.source.model.validate().is_ok();
    let marginals = if model_ok {
        (1..=n_max)
            .map(|n| marginal_consistency(&ctx.source.model, n, ctx.cap))
            .collect::<qsource::Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let passed = model_ok && marginals.iter().all(|m| m.max_residual() <= MARGINAL_TOL);
    let output = ValidationOutput {
        source: &ctx.source.label,
        passed,
        kraus,
        marginals,
    };
    match ctx.format {
        Format::Json => ctx.emit_json(&output)?,
        Format::Csv => ctx.emit(&validation_csv(&output))?,
    }
    eprintln!("validation {}", if passed { "passed" } else { "FAILED" });
    Ok(if passed { Status::Ok } else { Status::InvalidSource })
}

fn validation_csv(v: &ValidationOutput) -> String {
    use qsource::format::csv_number;
    let mut out = String::from("check,residual,ok\n");
    if let Some(k) = &v.kraus {
        out += &format!("completeness,{},{}\n", csv_number(k.completeness_residual), k.completeness_ok);
        out += &format!("stationarity,{},{}\n", csv_number(k.stationarity_residual), k.stationarity_ok);
        out += &format!("rho_hermitian,{},{}\n", csv_number(k.rho_hermitian_residual), k.rho_ok);
        out += &format!("rho_trace,{},{}\n", csv_number(k.rho_trace_residual), k.rho_ok);
        out += &format!("rho_min_eigenvalue,{},{}\n", csv_number(k.rho_min_eigenvalue), k.rho_ok);
    }
    for m in &v.marginals {
        out += &format!(
            "marginal_n{},{},{}\n",
            m.n,
            csv_number(m.max_residual()),
            m.max_residual() <= MARGINAL_TOL
        );
    }
    out
}
