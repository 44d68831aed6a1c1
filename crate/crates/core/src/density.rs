use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::tensor::{
    self, c, hermitian_deviation, hermitian_part, hermitian_tolerance, outer, psd_tolerance,
    trace, CMatrix, CVector, EigenSystem,
};

/// Trace of a density matrix must be within this of one.
pub const TRACE_TOL: f64 = 1e-9;

/// Density matrix on `site_dim^n_sites` dimensions.
///
/// Construction checks Hermiticity and trace. Positivity needs a full
/// eigensolve, so it is checked by [`DensityMatrix::check_psd`], and the
/// spectrum is memoized for reuse by entropy and subspace code.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    site_dim: usize,
    n_sites: usize,
    matrix: CMatrix,
    /// Orthonormal basis of a subspace known to contain the range, so `sqrt`
    /// can work on the compressed block instead of the full matrix.
    support: Option<CMatrix>,
    eigen: OnceLock<Arc<EigenSystem>>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.site_dim == other.site_dim
            && self.n_sites == other.n_sites
            && self.matrix == other.matrix
    }
}

impl DensityMatrix {
    /// A density without tensor structure (one site of dimension `matrix.nrows()`).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        Self::with_sites(dim, 1, matrix)
    }

    pub fn with_sites(site_dim: usize, n_sites: usize, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let expected = checked_block_dim(site_dim, n_sites).ok_or_else(|| {
            Error::InvalidDensity(format!("{site_dim}^{n_sites} overflows"))
        })?;
        if expected != matrix.nrows() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensity(format!(
                "dimension {} does not equal {site_dim}^{n_sites}",
                matrix.nrows()
            )));
        }
        let tolerance = hermitian_tolerance(matrix.nrows());
        let deviation = hermitian_deviation(&matrix);
        if deviation > tolerance {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        let tr = trace(&matrix);
        if (tr - c(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        Ok(Self {
            site_dim,
            n_sites,
            matrix: hermitian_part(&matrix),
            support: None,
            eigen: OnceLock::new(),
        })
    }

    /// `|x⟩⟨x| / ‖x‖²`.
    pub fn from_pure(x: &CVector) -> Result<Self> {
        let norm = x.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensity("zero state vector".into()));
        }
        let unit = x / c(norm);
        Ok(Self::new(outer(&unit))?.with_support(&[unit]))
    }

    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        if probabilities.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidDensity(format!(
                "diagonal has negative or non-finite entries: {probabilities:?}"
            )));
        }
        let diag = CVector::from_iterator(probabilities.len(), probabilities.iter().map(|&p| c(p)));
        Self::new(CMatrix::from_diagonal(&diag))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDensity("dimension 0".into()));
        }
        Self::new(CMatrix::identity(dim, dim) / c(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Spectrum in non-increasing order, computed once.
    pub fn eigen(&self) -> Result<Arc<EigenSystem>> {
        if let Some(eig) = self.eigen.get() {
            return Ok(Arc::clone(eig));
        }
        let eig = Arc::new(tensor::hermitian_eig(&self.matrix)?);
        Ok(Arc::clone(self.eigen.get_or_init(|| eig)))
    }

    /// Has the spectrum already been computed or attached?
    pub fn has_eigen(&self) -> bool {
        self.eigen.get().is_some()
    }

    /// Install a precomputed spectrum (e.g. loaded from a cache). Rejected if
    /// its dimension is wrong or one is already present.
    pub fn attach_eigen(&self, eig: EigenSystem) -> Result<()> {
        if eig.dim() != self.dim() || eig.values.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "eigensystem of dimension {} for a {}-dimensional density",
                eig.dim(),
                self.dim()
            )));
        }
        self.eigen
            .set(Arc::new(eig))
            .map_err(|_| Error::InvalidParameter("spectrum already attached".into()))
    }

    pub fn check_psd(&self) -> Result<()> {
        let eig = self.eigen()?;
        let tolerance = psd_tolerance(1.0);
        match eig.values.last() {
            Some(&min) if min < -tolerance => Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance,
            }),
            _ => Ok(()),
        }
    }

    /// `Tr(D a)`, real for Hermitian `a`.
    pub fn expectation(&self, a: &CMatrix) -> f64 {
        tensor::trace_product(&self.matrix, a).re
    }

    /// `Tr(D²)`
    pub fn purity(&self) -> f64 {
        self.expectation(&self.matrix)
    }

    /// Record that the range lies in the span of `spanning`.
    pub(crate) fn with_support(mut self, spanning: &[CVector]) -> Self {
        if !spanning.is_empty() && spanning.len() < self.dim() {
            let columns = CMatrix::from_columns(spanning);
            self.support = Some(columns.qr().q());
        }
        self
    }

    /// `D^{1/2}`, through the known support when there is one and the
    /// memoized spectrum otherwise.
    pub fn sqrt(&self) -> Result<CMatrix> {
        if let Some(w) = &self.support {
            let block = tensor::psd_sqrt(&hermitian_part(&(w.adjoint() * &self.matrix * w)))?;
            return Ok(w * block * w.adjoint());
        }
        tensor::psd_sqrt_from_eigen(self.eigen()?.as_ref(), 1.0)
    }
}

pub(crate) fn checked_block_dim(site_dim: usize, n_sites: usize) -> Option<usize> {
    u32::try_from(n_sites)
        .ok()
        .and_then(|n| site_dim.checked_pow(n))
}
