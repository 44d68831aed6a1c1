//! Entropy functionals: von Neumann entropy, mean-entropy traces, the Holevo
//! quantity and the classical mutual information of a measured ensemble.
//!
//! All values are in nats.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::format::csv_number;
use crate::source::SourceModel;
use crate::tensor::{self, c, CMatrix};

/// Eigenvalues at or below this count as exact zeros (`0 ln 0 = 0`).
pub const EIG_FLOOR: f64 = 1e-15;
const WEIGHT_TOL: f64 = 1e-12;
const POVM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

/// `−Σ λ ln λ` over `λ > EIG_FLOOR`.
pub fn spectral_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > EIG_FLOOR)
        .map(|&v| -v * v.ln())
        .sum()
}

/// Shannon entropy of a probability vector; zero cells contribute nothing.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

pub fn von_neumann_entropy(d: &DensityMatrix) -> Result<f64> {
    Ok(spectral_entropy(&d.eigen()?.values).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub n: usize,
    pub entropy: f64,
    pub per_site: f64,
    /// `S_n − S_{n−1}` with `S_0 = 0`.
    pub increment: f64,
}

/// Block entropies `S_n` of one stationary source and the two mean-entropy
/// estimators derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub rows: Vec<EntropyRow>,
    /// `min_n S_n / n`
    pub h_hat_ratio: f64,
    /// `S_N − S_{N−1}` at the largest `N`.
    pub h_hat_increment: f64,
}

impl EntropyTrace {
    pub fn from_entropies(entropies: &[f64]) -> Result<Self> {
        if entropies.is_empty() {
            return Err(Error::InvalidParameter("entropy trace needs n_max >= 1".into()));
        }
        let rows: Vec<EntropyRow> = entropies
            .iter()
            .enumerate()
            .map(|(i, &s)| EntropyRow {
                n: i + 1,
                entropy: s,
                per_site: s / (i + 1) as f64,
                increment: s - if i == 0 { 0.0 } else { entropies[i - 1] },
            })
            .collect();
        let h_hat_ratio = rows.iter().map(|r| r.per_site).fold(f64::INFINITY, f64::min);
        let h_hat_increment = rows.last().map(|r| r.increment).unwrap_or(0.0);
        Ok(Self {
            rows,
            h_hat_ratio,
            h_hat_increment,
        })
    }

    /// Entropy trace from `D_1, …, D_N` (in that order).
    pub fn from_densities(densities: &[DensityMatrix]) -> Result<Self> {
        for (i, d) in densities.iter().enumerate() {
            if d.n_sites() != i + 1 {
                return Err(Error::InvalidParameter(format!(
                    "density {i} has {} sites, expected {}",
                    d.n_sites(),
                    i + 1
                )));
            }
        }
        let entropies = densities
            .par_iter()
            .map(von_neumann_entropy)
            .collect::<Result<Vec<_>>>()?;
        Self::from_entropies(&entropies)
    }

    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    pub fn entropy(&self, n: usize) -> Option<f64> {
        self.rows.get(n.checked_sub(1)?).map(|r| r.entropy)
    }

    /// Disagreement of the two estimators, used as an uncertainty proxy.
    pub fn estimator_gap(&self) -> f64 {
        (self.h_hat_ratio - self.h_hat_increment).abs()
    }

    /// Splits `(n, m)` with `S_{n+m} > S_n + S_m + tol`, with the excess.
    pub fn subadditivity_violations(&self, tol: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for n in 1..=self.n_max() {
            for m in n..=self.n_max() - n {
                let excess = self.rows[n + m - 1].entropy - self.rows[n - 1].entropy - self.rows[m - 1].entropy;
                if excess > tol {
                    out.push((n, m, excess));
                }
            }
        }
        out
    }

    /// CSV with header `n,S,S_over_n,increment`.
    pub fn to_csv(&self, units: Units) -> String {
        let mut out = String::from("n,S,S_over_n,increment\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.n,
                csv_number(units.convert(r.entropy)),
                csv_number(units.convert(r.per_site)),
                csv_number(units.convert(r.increment))
            );
        }
        out
    }
}

pub fn mean_entropy_trace(s: &SourceModel, n_max: usize, cap: usize) -> Result<EntropyTrace> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    EntropyTrace::from_densities(&s.densities(n_max, cap)?)
}

fn check_weights(p: &[f64]) -> Result<()> {
    if p.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidWeights(format!("{p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

fn check_same_dim(states: &[DensityMatrix]) -> Result<usize> {
    let dim = states
        .first()
        .map(DensityMatrix::dim)
        .ok_or_else(|| Error::InvalidWeights("empty ensemble".into()))?;
    if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "ensemble mixes dimensions {dim} and {}",
            bad.dim()
        )));
    }
    Ok(dim)
}

/// `χ = S(Σ p_i D_i) − Σ p_i S(D_i)`.
pub fn holevo_chi(p: &[f64], states: &[DensityMatrix]) -> Result<f64> {
    if p.len() != states.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} states",
            p.len(),
            states.len()
        )));
    }
    check_weights(p)?;
    let dim = check_same_dim(states)?;
    let mixture = p
        .iter()
        .zip(states)
        .fold(CMatrix::zeros(dim, dim), |acc, (&w, s)| acc + s.matrix() * c(w));
    let mixture = DensityMatrix::new(mixture)?;
    let mut chi = von_neumann_entropy(&mixture)?;
    for (&w, s) in p.iter().zip(states) {
        chi -= w * von_neumann_entropy(s)?;
    }
    Ok(chi)
}

/// Positive operators `A_j` with `Σ A_j = I`.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let dim = elements
            .first()
            .map(|a| a.nrows())
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let mut sum = CMatrix::zeros(dim, dim);
        for (j, a) in elements.iter().enumerate() {
            if a.shape() != (dim, dim) {
                return Err(Error::InvalidPovm(format!("element {j} has shape {:?}", a.shape())));
            }
            let eig = tensor::hermitian_eig(a)
                .map_err(|e| Error::InvalidPovm(format!("element {j}: {e}")))?;
            let min = eig.values.last().copied().unwrap_or(0.0);
            if min < -tensor::PSD_TOL {
                return Err(Error::InvalidPovm(format!("element {j} has eigenvalue {min:e}")));
            }
            sum += a;
        }
        let residual = tensor::max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if residual > POVM_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {residual:e}")));
        }
        Ok(Self { elements })
    }

    /// Projective measurement onto the columns of a unitary (or any orthonormal basis).
    pub fn from_basis(basis: &CMatrix) -> Result<Self> {
        Self::new(
            (0..basis.ncols())
                .map(|j| tensor::outer(&basis.column(j).into_owned()))
                .collect(),
        )
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }
}

/// Joint distribution `p_ji` over (output `j`, input `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalJoint {
    /// `table[j][i]`
    table: Vec<Vec<f64>>,
}

impl ClassicalJoint {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let cols = table.first().map_or(0, Vec::len);
        if cols == 0 || table.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidWeights("joint table must be rectangular and nonempty".into()));
        }
        if table.iter().flatten().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidWeights("joint table has negative entries".into()));
        }
        let total: f64 = table.iter().flatten().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidWeights(format!("joint table sums to {total}")));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// `p_i = Σ_j p_ji`
    pub fn input_marginal(&self) -> Vec<f64> {
        (0..self.table[0].len())
            .map(|i| self.table.iter().map(|row| row[i]).sum())
            .collect()
    }

    /// `q_j = Σ_i p_ji`
    pub fn output_marginal(&self) -> Vec<f64> {
        self.table.iter().map(|row| row.iter().sum()).collect()
    }
}

/// `p_ji = p_i Tr(D_i A_j)`.
pub fn measurement_joint(p: &[f64], states: &[DensityMatrix], povm: &Povm) -> Result<ClassicalJoint> {
    if p.len() != states.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} states",
            p.len(),
            states.len()
        )));
    }
    check_weights(p)?;
    let dim = check_same_dim(states)?;
    if povm.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "POVM acts on dimension {}, states on {dim}",
            povm.dim()
        )));
    }
    let table = povm
        .elements()
        .iter()
        .map(|a| {
            p.iter()
                .zip(states)
                .map(|(&w, s)| (w * s.expectation(a)).max(0.0))
                .collect()
        })
        .collect::<Vec<Vec<f64>>>();
    // Clipping round-off negatives can leave the total a few ulps off one.
    let total: f64 = table.iter().flatten().sum();
    let table = table
        .into_iter()
        .map(|row| row.into_iter().map(|x| x / total).collect())
        .collect();
    ClassicalJoint::new(table)
}

/// `I = Σ p_ji ln(p_ji / (p_i q_j))`.
pub fn mutual_information(joint: &ClassicalJoint) -> f64 {
    let p = joint.input_marginal();
    let q = joint.output_marginal();
    let mut info = 0.0;
    for (j, row) in joint.table().iter().enumerate() {
        for (i, &pji) in row.iter().enumerate() {
            if pji > 0.0 {
                info += pji * (pji / (p[i] * q[j])).ln();
            }
        }
    }
    info.max(0.0)
}
