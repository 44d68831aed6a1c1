use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::tensor::{self, CMatrix, CVector, EigenSystem};

/// Cumulative eigenvalue sums within this of `1 − ε` count as reaching it, so
/// that exactly representable thresholds are not lost to round-off.
pub const HP_SLACK: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthogonal projector `q = B B*` held through an orthonormal basis `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    basis: CMatrix,
}

impl Projector {
    pub fn from_basis(basis: CMatrix) -> Result<Self> {
        let r = basis.ncols();
        let gram = basis.adjoint() * &basis;
        let residual = tensor::max_abs_diff(&gram, &CMatrix::identity(r, r));
        if residual > ORTHONORMAL_TOL {
            return Err(Error::DimensionMismatch(format!(
                "projector basis is not orthonormal (residual {residual:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Recover the range of a projector matrix; `q² = q = q*` is checked through its spectrum.
    pub fn from_matrix(q: &CMatrix) -> Result<Self> {
        let eig = tensor::hermitian_eig(q)?;
        if let Some(bad) = eig.values.iter().find(|&&v| v.abs() > 1e-9 && (v - 1.0).abs() > 1e-9) {
            return Err(Error::DegenerateInput(format!("not a projector: eigenvalue {bad}")));
        }
        let rank = eig.rank_above(0.5);
        Ok(Self {
            basis: eig.vectors.columns(0, rank).into_owned(),
        })
    }

    /// Span of the first `rank` eigenvectors.
    pub fn top_eigenvectors(eig: &EigenSystem, rank: usize) -> Self {
        Self {
            basis: eig.vectors.columns(0, rank).into_owned(),
        }
    }

    /// Haar-random rank-`rank` projector on `C^dim`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Self {
        Self {
            basis: tensor::haar_isometry(dim, rank, rng),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            basis: CMatrix::identity(dim, dim),
        }
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn basis_vector(&self, j: usize) -> CVector {
        self.basis.column(j).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// `q x`
    pub fn apply(&self, x: &CVector) -> CVector {
        &self.basis * (self.basis.adjoint() * x)
    }

    /// `B* m B`, the block of `m` on the range.
    pub fn compress(&self, m: &CMatrix) -> CMatrix {
        self.basis.adjoint() * m * &self.basis
    }

    /// `Tr(D q)`
    pub fn weight(&self, d: &CMatrix) -> f64 {
        tensor::trace(&self.compress(d)).re
    }

    pub fn contains(&self, x: &CVector, tol: f64) -> bool {
        (self.apply(x) - x).norm() <= tol
    }
}

/// High-probability subspace `HP(D, ε)`: the span of the fewest leading
/// eigenvectors of `D` whose eigenvalues sum to at least `1 − ε`.
#[derive(Debug, Clone)]
pub struct HighProbSubspace {
    pub level: f64,
    pub dimension: usize,
    pub captured_weight: f64,
    pub eigen: Arc<EigenSystem>,
    pub projector: Projector,
}

impl HighProbSubspace {
    /// `β = ln n(ε)`.
    pub fn log_dim(&self) -> f64 {
        (self.dimension as f64).ln()
    }

    pub fn summary(&self) -> SubspaceSummary {
        SubspaceSummary {
            level: self.level,
            dimension: self.dimension,
            log_dim: self.log_dim(),
            captured_weight: self.captured_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubspaceSummary {
    pub level: f64,
    pub dimension: usize,
    pub log_dim: f64,
    pub captured_weight: f64,
}

pub fn check_level(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(eps))
    }
}

/// Smallest `r` with `λ_1 + … + λ_r ≥ 1 − ε` (up to [`HP_SLACK`]), and that sum.
pub fn hp_dimension(values: &[f64], eps: f64) -> (usize, f64) {
    let target = 1.0 - eps - HP_SLACK;
    let mut captured = 0.0;
    for (i, &v) in values.iter().enumerate() {
        captured += v;
        if captured >= target {
            return (i + 1, captured);
        }
    }
    (values.len(), captured)
}

pub fn high_prob_subspace(d: &DensityMatrix, eps: f64) -> Result<HighProbSubspace> {
    check_level(eps)?;
    let eigen = d.eigen()?;
    let (dimension, captured_weight) = hp_dimension(&eigen.values, eps);
    let projector = Projector::top_eigenvectors(&eigen, dimension);
    Ok(HighProbSubspace {
        level: eps,
        dimension,
        captured_weight,
        eigen,
        projector,
    })
}

/// `β_ε = ln min{Tr q : φ(q) ≥ 1 − ε}`, attained by the high-probability projector
/// since a rank-`r` projector captures at most the top `r` eigenvalues.
pub fn beta_dim(d: &DensityMatrix, eps: f64) -> Result<f64> {
    check_level(eps)?;
    let (dimension, _) = hp_dimension(&d.eigen()?.values, eps);
    Ok((dimension as f64).ln())
}
