//! Dense complex matrix algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; the block space of `n` sites
//! with local dimension `d` is indexed lexicographically, site 1 being the
//! most significant digit, which is the ordering produced by [`kron`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermiticity tolerance; the absolute tolerance is this times the dimension.
pub const HERMITIAN_TOL_PER_DIM: f64 = 1e-9;
/// Negative eigenvalues down to this fraction of the trace are clipped to zero.
pub const PSD_TOL: f64 = 1e-9;

pub fn hermitian_tolerance(dim: usize) -> f64 {
    HERMITIAN_TOL_PER_DIM * dim.max(1) as f64
}

pub fn psd_tolerance(trace: f64) -> f64 {
    PSD_TOL * trace.abs().max(1.0)
}

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Kronecker product; entry `(i*p + k, j*p + l)` is `a[(i, j)] * b[(k, l)]` with `p = b.nrows()`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest entry modulus, `‖m‖_max`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// `|x⟩⟨x|`
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}

/// Real part of `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn ensure_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `Σ λ_k |f_k⟩⟨f_k|`
    pub fn reconstruct(&self) -> CMatrix {
        let scaled = CMatrix::from_fn(self.dim(), self.values.len(), |i, k| {
            self.vectors[(i, k)] * self.values[k]
        });
        scaled * self.vectors.adjoint()
    }

    /// Number of eigenvalues strictly above `floor`.
    pub fn rank_above(&self, floor: f64) -> usize {
        self.values.iter().take_while(|&&v| v > floor).count()
    }

    /// Apply `f` to the spectrum: `Σ f(λ_k) |f_k⟩⟨f_k|`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let scaled = CMatrix::from_fn(self.dim(), self.values.len(), |i, k| {
            self.vectors[(i, k)] * f(self.values[k])
        });
        scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back sorted non-increasing. Ties keep the solver's
/// output order (the sort is stable), which makes degenerate subspaces
/// reproducible for a given input.
///
/// Rows that are identically zero are split off as exact zero eigenvectors
/// before the dense solve; block densities of low-rank sources are mostly such rows.
pub fn hermitian_eig(h: &CMatrix) -> Result<EigenSystem> {
    ensure_square(h, "Hermitian eigensolver input")?;
    let dim = h.nrows();
    let tolerance = hermitian_tolerance(dim);
    let deviation = hermitian_deviation(h);
    if deviation > tolerance {
        return Err(Error::NotHermitian {
            deviation,
            tolerance,
        });
    }
    let h = hermitian_part(h);
    let zero = Complex64::new(0.0, 0.0);
    let (active, null): (Vec<usize>, Vec<usize>) =
        (0..dim).partition(|&i| h.row(i).iter().any(|z| *z != zero));

    let (raw_values, raw_vectors) = if null.is_empty() {
        dense_eig(&h)?
    } else {
        let (sub_values, sub_vectors) = dense_eig(&h.select_rows(&active).select_columns(&active))?;
        let mut vectors = CMatrix::zeros(dim, dim);
        for k in 0..active.len() {
            for (a, &i) in active.iter().enumerate() {
                vectors[(i, k)] = sub_vectors[(a, k)];
            }
        }
        for (j, &i) in null.iter().enumerate() {
            vectors[(i, active.len() + j)] = c(1.0);
        }
        let mut values = sub_values;
        values.resize(dim, 0.0);
        (values, vectors)
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));
    let values = order.iter().map(|&k| raw_values[k]).collect();
    let vectors = CMatrix::from_fn(dim, dim, |i, j| raw_vectors[(i, order[j])]);
    Ok(EigenSystem { values, vectors })
}

/// Seed of the fixed rotation used when the direct solve breaks down.
const ROTATION_SEED: u64 = 0x5eed;

/// Unsorted `(values, vectors)` of an exactly Hermitian matrix.
///
/// nalgebra's implicit QR sweep can produce NaN when the tridiagonal form has
/// exactly equal diagonal entries (its Wilkinson shift divides 0 by 0). Those
/// coincidences are structural, so one retry in a fixed generic basis
/// `U* h U` removes them.
fn dense_eig(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let dim = h.nrows();
    if dim == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let max_iter = 100 * dim + 1000;
    let solve = |m: CMatrix| {
        m.try_symmetric_eigen(f64::EPSILON, max_iter).filter(|e| {
            e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        })
    };
    if let Some(e) = solve(h.clone()) {
        return Ok((e.eigenvalues.iter().copied().collect(), e.eigenvectors));
    }
    let u = haar_unitary(dim, &mut ChaCha8Rng::seed_from_u64(ROTATION_SEED));
    let rotated = hermitian_part(&(u.adjoint() * h * &u));
    let e = solve(rotated).ok_or(Error::ConvergenceFailure { dim })?;
    Ok((e.eigenvalues.iter().copied().collect(), u * e.eigenvectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Trace out the leftmost (most significant) factor.
    First,
    /// Trace out the rightmost (least significant) factor.
    Last,
}

/// Trace out one tensor factor of dimension `site_dim` from `d`.
pub fn partial_trace(d: &CMatrix, site_dim: usize, side: Side) -> Result<CMatrix> {
    ensure_square(d, "partial trace input")?;
    let dim = d.nrows();
    if site_dim == 0 || dim % site_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "dimension {dim} is not divisible by site dimension {site_dim}"
        )));
    }
    let rest = dim / site_dim;
    let out = match side {
        // index = s * rest + r
        Side::First => CMatrix::from_fn(rest, rest, |r, c| {
            (0..site_dim)
                .map(|s| d[(s * rest + r, s * rest + c)])
                .sum()
        }),
        // index = r * site_dim + s
        Side::Last => CMatrix::from_fn(rest, rest, |r, c| {
            (0..site_dim)
                .map(|s| d[(r * site_dim + s, c * site_dim + s)])
                .sum()
        }),
    };
    Ok(out)
}

/// Square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-tol, 0)` with `tol = 1e-9 * max(|Tr d|, 1)` are clipped to zero,
/// as are positive ones at the solver's noise level (see [`sqrt_noise_floor`]).
pub fn psd_sqrt(d: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(d)?;
    psd_sqrt_from_eigen(&eig, trace(d).re)
}

pub fn psd_sqrt_from_eigen(eig: &EigenSystem, trace: f64) -> Result<CMatrix> {
    let tolerance = psd_tolerance(trace);
    if let Some(&min) = eig.values.last() {
        if min < -tolerance {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance,
            });
        }
    }
    let floor = sqrt_noise_floor(eig);
    Ok(eig.map_spectrum(|v| if v > floor { v.sqrt() } else { 0.0 }))
}

/// `dim · ε_mach · λ_max`. Eigenvalues below this are indistinguishable from zero,
/// and their square roots (~1e-8) would otherwise swamp fidelity comparisons.
pub fn sqrt_noise_floor(eig: &EigenSystem) -> f64 {
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eig.dim() as f64 * f64::EPSILON * scale
}

/// Random `rows x cols` matrix with orthonormal columns, Haar distributed
/// (QR of a complex Ginibre matrix with the phase of `R`'s diagonal removed).
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let ginibre = CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            c(1.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unitary of dimension `dim`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    haar_isometry(dim, dim, rng)
}

/// Random full-rank density matrix `G G* / Tr(G G*)` with Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let t = trace(&m).re;
    hermitian_part(&(m / c(t)))
}

/// Random unit vector, uniform on the sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    v / c(norm)
}
