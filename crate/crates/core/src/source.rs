//! Stationary sources and their block densities.
//!
//! A [`KrausSource`] `({V_i}, ρ)` generates the finitely correlated state
//!
//! ```text
//! φ(E_{i1 j1} ⊗ … ⊗ E_{in jn}) = Tr(ρ V_{i1}* … V_{in}* V_{jn} … V_{j1})
//! ```
//!
//! and the block density is frozen with the convention `(D_n)_{J,I} = φ(E_{IJ})`,
//! multi-indices `I = (i1 … in)` in lexicographic order with site 1 most significant.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{checked_block_dim, DensityMatrix};
use crate::error::{Error, Result};
use crate::tensor::{
    self, c, hermitian_deviation, kron, max_abs_diff, partial_trace, trace, CMatrix,
    Side,
};

pub const DEFAULT_SIZE_CAP: usize = 4096;
/// Residual allowed on completeness and stationarity of a Kraus source.
pub const SOURCE_TOL: f64 = 1e-10;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Kraus family `{V_i}` (one operator per site basis state) on a `k`-dimensional
/// auxiliary space, with auxiliary density `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KrausDoc", into = "KrausDoc")]
pub struct KrausSource {
    kraus: Vec<CMatrix>,
    rho: CMatrix,
}

impl KrausSource {
    /// Checks shapes only; use [`validate_source`] for the physical conditions.
    pub fn new(kraus: Vec<CMatrix>, rho: CMatrix) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidSource("no Kraus operators".into()));
        }
        let k = rho.nrows();
        if k == 0 || !rho.is_square() {
            return Err(Error::InvalidSource(format!(
                "rho must be square and nonempty, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if let Some((i, v)) = kraus.iter().enumerate().find(|(_, v)| v.shape() != (k, k)) {
            return Err(Error::InvalidSource(format!(
                "V_{} is {}x{}, expected {k}x{k}",
                i + 1,
                v.nrows(),
                v.ncols()
            )));
        }
        if kraus.iter().chain(std::iter::once(&rho)).any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::InvalidSource("non-finite entries".into()));
        }
        Ok(Self { kraus, rho })
    }

    /// Site dimension, the number of Kraus operators.
    pub fn d(&self) -> usize {
        self.kraus.len()
    }

    /// Auxiliary dimension.
    pub fn k(&self) -> usize {
        self.rho.nrows()
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    /// `Σ V_i* V_i`
    pub fn completeness_sum(&self) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.k(), self.k()), |acc, v| acc + v.adjoint() * v)
    }

    /// `X ↦ Σ V_i X V_i*`
    pub fn transfer(&self, x: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.k(), self.k()), |acc, v| acc + v * x * v.adjoint())
    }

    /// Matrix of the transfer map on row-major vectorized `k x k` operators.
    pub fn transfer_matrix(&self) -> CMatrix {
        let k = self.k();
        let mut out = CMatrix::zeros(k * k, k * k);
        for col in 0..k * k {
            let mut unit = CMatrix::zeros(k, k);
            unit[(col / k, col % k)] = c(1.0);
            let image = self.transfer(&unit);
            for row in 0..k * k {
                out[(row, col)] = image[(row / k, row % k)];
            }
        }
        out
    }

    /// Eigenvalues of the transfer map sorted by decreasing modulus.
    ///
    /// Informational only: a simple peripheral eigenvalue 1 with a gap is
    /// consistent with, but not a certificate of, ergodic behaviour.
    pub fn transfer_spectrum(&self) -> Vec<Complex64> {
        let m = self.transfer_matrix();
        let mut values: Vec<Complex64> = match m.eigenvalues() {
            Some(v) => v.iter().copied().collect(),
            None => m.schur().unpack().1.diagonal().iter().copied().collect(),
        };
        values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        values
    }
}

/// Residual diagnostics for a Kraus source. Never fails; inspect `passed()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `‖Σ V_i* V_i − I‖_max`
    pub completeness_residual: f64,
    /// `‖Σ V_i ρ V_i* − ρ‖_max`
    pub stationarity_residual: f64,
    pub rho_hermitian_residual: f64,
    pub rho_trace_residual: f64,
    pub rho_min_eigenvalue: f64,
    pub completeness_ok: bool,
    pub stationarity_ok: bool,
    pub rho_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.completeness_ok && self.stationarity_ok && self.rho_ok
    }
}

pub fn validate_source(s: &KrausSource) -> ValidationReport {
    let k = s.k();
    let completeness_residual = max_abs_diff(&s.completeness_sum(), &CMatrix::identity(k, k));
    let stationarity_residual = max_abs_diff(&s.transfer(s.rho()), s.rho());
    let rho_hermitian_residual = hermitian_deviation(s.rho());
    let rho_trace_residual = (trace(s.rho()) - c(1.0)).norm();
    let rho_min_eigenvalue = tensor::hermitian_eig(&tensor::hermitian_part(s.rho()))
        .ok()
        .and_then(|e| e.values.last().copied())
        .unwrap_or(f64::NAN);
    let rho_ok = rho_hermitian_residual <= SOURCE_TOL
        && rho_trace_residual <= SOURCE_TOL
        && rho_min_eigenvalue >= -tensor::PSD_TOL;
    ValidationReport {
        completeness_residual,
        stationarity_residual,
        rho_hermitian_residual,
        rho_trace_residual,
        rho_min_eigenvalue,
        completeness_ok: completeness_residual <= SOURCE_TOL,
        stationarity_ok: stationarity_residual <= SOURCE_TOL,
        rho_ok,
    }
}

/// The three-letter source with a two-dimensional memory:
/// `V_1 = [[1/√2, 0], [0, 0]]`, `V_2 = [[0, 0], [1/√2, 0]]`, `V_3 = [[0, 1], [0, 0]]`,
/// `ρ = diag(2/3, 1/3)`.
pub fn example1_source() -> KrausSource {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0);
    let kraus = vec![
        CMatrix::from_row_slice(2, 2, &[c(s), z, z, z]),
        CMatrix::from_row_slice(2, 2, &[z, z, c(s), z]),
        CMatrix::from_row_slice(2, 2, &[z, c(1.0), z, z]),
    ];
    let rho = CMatrix::from_row_slice(2, 2, &[c(2.0 / 3.0), z, z, c(1.0 / 3.0)]);
    KrausSource::new(kraus, rho).expect("shapes are fixed")
}

fn check_cap(site_dim: usize, n: usize, cap: usize) -> Result<usize> {
    match checked_block_dim(site_dim, n) {
        Some(dim) if dim <= cap => Ok(dim),
        _ => Err(Error::SizeCapExceeded {
            site_dim,
            n_sites: n,
            cap,
        }),
    }
}

/// Block density `D_n` of the finitely correlated state, with the default size cap.
pub fn fcs_density(s: &KrausSource, n: usize) -> Result<DensityMatrix> {
    fcs_density_capped(s, n, DEFAULT_SIZE_CAP)
}

/// Block density `D_n`; `(D_n)_{J,I} = Tr(ρ W_I* W_J)` with `W_J = V_{jn} … V_{j1}`.
///
/// All `d^n` products `W_J` are built by extending prefixes one site at a time,
/// then `D_n = P Wᴴ` where row `J` of `W` is `vec(W_J)` and row `J` of `P` is `vec(W_J ρ)`.
pub fn fcs_density_capped(s: &KrausSource, n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let report = validate_source(s);
    if !report.passed() {
        return Err(Error::InvalidSource(format!("{report:?}")));
    }
    let d = s.d();
    let dim = check_cap(d, n, cap)?;
    let k = s.k();

    let mut words: Vec<CMatrix> = vec![CMatrix::identity(k, k)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(words.len() * d);
        for w in &words {
            for v in s.kraus() {
                next.push(v * w);
            }
        }
        words = next;
    }
    debug_assert_eq!(words.len(), dim);

    let kk = k * k;
    let w_rows = DMatrix::from_fn(dim, kk, |j, x| words[j][(x / k, x % k)]);
    let p_rows = {
        let products: Vec<CMatrix> = words.iter().map(|w| w * s.rho()).collect();
        DMatrix::from_fn(dim, kk, |j, x| products[j][(x / k, x % k)])
    };
    let matrix = p_rows * w_rows.adjoint();
    DensityMatrix::with_sites(d, n, matrix)
}

/// `rho1^{⊗n}`.
pub fn product_density(rho1: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    product_density_capped(rho1, n, DEFAULT_SIZE_CAP)
}

pub fn product_density_capped(rho1: &DensityMatrix, n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let d = rho1.dim();
    check_cap(d, n, cap)?;
    let mut m = rho1.matrix().clone();
    for _ in 1..n {
        m = kron(&m, rho1.matrix());
    }
    DensityMatrix::with_sites(d, n, m)
}

/// A stationary source: memoryless (product) or finitely correlated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceModel {
    Product {
        #[serde(with = "matrix_serde")]
        rho: CMatrix,
    },
    FinitelyCorrelated {
        #[serde(flatten)]
        source: KrausSource,
    },
}

impl SourceModel {
    pub fn product(rho1: &DensityMatrix) -> Self {
        SourceModel::Product {
            rho: rho1.matrix().clone(),
        }
    }

    pub fn example1() -> Self {
        SourceModel::FinitelyCorrelated {
            source: example1_source(),
        }
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        Ok(Self::product(&DensityMatrix::maximally_mixed(d)?))
    }

    pub fn site_dim(&self) -> usize {
        match self {
            SourceModel::Product { rho } => rho.nrows(),
            SourceModel::FinitelyCorrelated { source } => source.d(),
        }
    }

    /// Checks the payload's own invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            SourceModel::Product { rho } => {
                DensityMatrix::new(rho.clone())?.check_psd()
            }
            SourceModel::FinitelyCorrelated { source } => {
                let report = validate_source(source);
                if report.passed() {
                    Ok(())
                } else {
                    Err(Error::InvalidSource(format!("{report:?}")))
                }
            }
        }
    }

    pub fn density(&self, n: usize, cap: usize) -> Result<DensityMatrix> {
        match self {
            SourceModel::Product { rho } => {
                product_density_capped(&DensityMatrix::new(rho.clone())?, n, cap)
            }
            SourceModel::FinitelyCorrelated { source } => fcs_density_capped(source, n, cap),
        }
    }

    /// `D_1, …, D_{n_max}`.
    pub fn densities(&self, n_max: usize, cap: usize) -> Result<Vec<DensityMatrix>> {
        check_cap(self.site_dim(), n_max, cap)?;
        (1..=n_max).map(|n| self.density(n, cap)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Accepts a tagged source document, or a bare Kraus source document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("kind").is_some() {
            Ok(serde_json::from_value(value)?)
        } else {
            Ok(SourceModel::FinitelyCorrelated {
                source: serde_json::from_value(value)?,
            })
        }
    }
}

/// Left/right marginal residuals of `D_{n+1}` against `D_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    /// `‖Tr_last D_{n+1} − D_n‖_max`
    pub trace_last_residual: f64,
    /// `‖Tr_first D_{n+1} − D_n‖_max`
    pub trace_first_residual: f64,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        self.trace_last_residual.max(self.trace_first_residual)
    }
}

pub fn marginal_consistency(s: &SourceModel, n: usize, cap: usize) -> Result<ConsistencyReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let d = s.site_dim();
    check_cap(d, n + 1, cap)?;
    let dn = s.density(n, cap)?;
    let dn1 = s.density(n + 1, cap)?;
    let last = partial_trace(dn1.matrix(), d, Side::Last)?;
    let first = partial_trace(dn1.matrix(), d, Side::First)?;
    Ok(ConsistencyReport {
        n,
        trace_last_residual: max_abs_diff(&last, dn.matrix()),
        trace_first_residual: max_abs_diff(&first, dn.matrix()),
    })
}

/// Random source: Kraus operators are the `k x k` row blocks of a Haar isometry
/// `C^k → C^{dk}`, and `ρ` is the fixed point of the transfer map found by
/// power iteration from two starting points.
pub fn random_source(d: usize, k: usize, seed: u64) -> Result<KrausSource> {
    if d < 2 || k < 1 {
        return Err(Error::InvalidParameter(format!(
            "random source needs d >= 2 and k >= 1, got d = {d}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let isometry = tensor::haar_isometry(d * k, k, &mut rng);
    let kraus: Vec<CMatrix> = (0..d)
        .map(|i| isometry.rows(i * k, k).into_owned())
        .collect();
    let provisional = KrausSource::new(kraus.clone(), CMatrix::identity(k, k) / c(k as f64))?;

    let from_mixed = transfer_fixed_point(&provisional, CMatrix::identity(k, k) / c(k as f64))?;
    let mut basis_state = CMatrix::zeros(k, k);
    basis_state[(0, 0)] = c(1.0);
    let from_pure = transfer_fixed_point(&provisional, basis_state)?;
    let gap = max_abs_diff(&from_mixed, &from_pure);
    if gap > 1e-8 {
        return Err(Error::FixedPointNotUnique(format!(
            "power iteration from two starting points differs by {gap:e}"
        )));
    }
    KrausSource::new(kraus, from_mixed)
}

fn transfer_fixed_point(s: &KrausSource, start: CMatrix) -> Result<CMatrix> {
    let mut rho = start;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let mut next = tensor::hermitian_part(&s.transfer(&rho));
        let t = trace(&next);
        next /= t;
        let change = max_abs_diff(&next, &rho);
        rho = next;
        if change < FIXED_POINT_TOL {
            return Ok(rho);
        }
    }
    Err(Error::FixedPointNotUnique(format!(
        "power iteration did not settle within {FIXED_POINT_MAX_ITER} steps"
    )))
}

#[derive(Serialize, Deserialize)]
struct KrausDoc {
    d: usize,
    k: usize,
    #[serde(rename = "V")]
    kraus: Vec<Vec<Vec<[f64; 2]>>>,
    rho: Vec<Vec<[f64; 2]>>,
}

impl From<KrausSource> for KrausDoc {
    fn from(s: KrausSource) -> Self {
        KrausDoc {
            d: s.d(),
            k: s.k(),
            kraus: s.kraus.iter().map(matrix_serde::to_rows).collect(),
            rho: matrix_serde::to_rows(&s.rho),
        }
    }
}

impl TryFrom<KrausDoc> for KrausSource {
    type Error = Error;

    fn try_from(doc: KrausDoc) -> Result<Self> {
        let kraus = doc
            .kraus
            .iter()
            .map(|rows| matrix_serde::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        let rho = matrix_serde::from_rows(&doc.rho)?;
        let source = KrausSource::new(kraus, rho)?;
        if source.d() != doc.d || source.k() != doc.k {
            return Err(Error::InvalidSource(format!(
                "declared d = {}, k = {} but found d = {}, k = {}",
                doc.d,
                doc.k,
                source.d(),
                source.k()
            )));
        }
        Ok(source)
    }
}

/// Complex matrices as nested row arrays of `[re, im]` pairs.
pub mod matrix_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::error::{Error, Result};
    use crate::tensor::CMatrix;
    use num_complex::Complex64;

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Serialization("ragged matrix rows".into()));
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
            Complex64::new(rows[i][j][0], rows[i][j][1])
        }))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, serializer: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CVector;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    #[test]
    fn example1_constants() {
        let s = example1_source();
        assert_eq!((s.d(), s.k()), (3, 2));
        assert_eq!(s.kraus()[0][(0, 0)], c(std::f64::consts::FRAC_1_SQRT_2));
        assert_eq!(*s.rho(), diag(&[2.0 / 3.0, 1.0 / 3.0]));
        assert!(max_abs_diff(&s.completeness_sum(), &CMatrix::identity(2, 2)) <= 1e-15);
        // diag(1/3, 0) + diag(0, 1/3) + diag(1/3, 0)
        let images: Vec<CMatrix> = s.kraus().iter().map(|v| v * s.rho() * v.adjoint()).collect();
        assert!(max_abs_diff(&images[0], &diag(&[1.0 / 3.0, 0.0])) < 1e-15);
        assert!(max_abs_diff(&images[1], &diag(&[0.0, 1.0 / 3.0])) < 1e-15);
        assert!(max_abs_diff(&images[2], &diag(&[1.0 / 3.0, 0.0])) < 1e-15);
    }

    #[test]
    fn validate_example1_passes() {
        let report = validate_source(&example1_source());
        assert!(report.passed(), "{report:?}");
        assert!(report.completeness_residual <= 1e-12);
        assert!(report.stationarity_residual <= 1e-12);
    }

    #[test]
    fn doubled_kraus_fails_completeness() {
        let s = example1_source();
        let doubled: Vec<CMatrix> = s.kraus().iter().map(|v| v * c(2.0)).collect();
        let report = validate_source(&KrausSource::new(doubled, s.rho().clone()).unwrap());
        assert!(!report.completeness_ok);
        assert!((report.completeness_residual - 3.0).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_rho_is_not_stationary_for_example1() {
        let s = example1_source();
        let half = CMatrix::identity(2, 2) * c(0.5);
        let bad = KrausSource::new(s.kraus().to_vec(), half.clone()).unwrap();
        assert!(max_abs_diff(&bad.transfer(&half), &diag(&[0.75, 0.25])) < 1e-15);
        let report = validate_source(&bad);
        assert!(!report.stationarity_ok);
        assert!(report.completeness_ok && report.rho_ok);
    }

    #[test]
    fn example1_single_site_is_maximally_mixed() {
        let d1 = fcs_density(&example1_source(), 1).unwrap();
        let third = CMatrix::identity(3, 3) / c(3.0);
        assert!(max_abs_diff(d1.matrix(), &third) <= 1e-15);
    }

    #[test]
    fn example1_two_sites_is_a_valid_stationary_density() {
        let d2 = fcs_density(&example1_source(), 2).unwrap();
        d2.check_psd().unwrap();
        let third = CMatrix::identity(3, 3) / c(3.0);
        for side in [Side::First, Side::Last] {
            assert!(max_abs_diff(&partial_trace(d2.matrix(), 3, side).unwrap(), &third) < 1e-15);
        }
    }

    #[test]
    fn fcs_entry_matches_defining_formula() {
        // (D_n)_{J,I} = Tr(ρ V_{i1}* … V_{in}* V_{jn} … V_{j1}), evaluated term by term.
        let s = random_source(3, 2, 4).unwrap();
        let dn = fcs_density(&s, 3).unwrap();
        let digits = |x: usize| [x / 9, (x / 3) % 3, x % 3];
        for (big_j, big_i) in [(0, 0), (5, 17), (26, 3), (11, 11), (8, 19)] {
            let (i, j) = (digits(big_i), digits(big_j));
            let v = s.kraus();
            let op = v[i[0]].adjoint() * v[i[1]].adjoint() * v[i[2]].adjoint()
                * &v[j[2]] * &v[j[1]] * &v[j[0]];
            let expected = tensor::trace_product(s.rho(), &op);
            assert!((dn.matrix()[(big_j, big_i)] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn example1_block_spectra_are_finite() {
        // D_5 and D_6 are rank 4 with mostly zero rows; the dense solver alone returns NaN here
        let source = SourceModel::example1();
        for d in source.densities(6, DEFAULT_SIZE_CAP).unwrap().iter().skip(3) {
            let eig = d.eigen().unwrap();
            assert!(eig.values.iter().all(|v| v.is_finite()));
            assert_eq!(eig.rank_above(1e-13), 4);
            let total: f64 = eig.values.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(tensor::max_abs_diff(&eig.reconstruct(), d.matrix()) < 1e-10);
        }
    }

    #[test]
    fn scalar_kraus_source_is_a_pure_product() {
        // With k = 1 the Kraus operators are numbers v_i and φ(E_ij) = conj(v_i) v_j,
        // so D_n is the pure product state of ψ = Σ v_i e_i.
        let p = [0.5, 0.3, 0.2];
        let kraus: Vec<CMatrix> = p.iter().map(|&x: &f64| CMatrix::from_element(1, 1, c(x.sqrt()))).collect();
        let s = KrausSource::new(kraus, CMatrix::identity(1, 1)).unwrap();
        let psi = CVector::from_iterator(3, p.iter().map(|&x: &f64| c(x.sqrt())));
        let single = DensityMatrix::from_pure(&psi).unwrap();
        for n in 1..=3 {
            let fcs = fcs_density(&s, n).unwrap();
            let prod = product_density(&single, n).unwrap();
            assert!(max_abs_diff(fcs.matrix(), prod.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn product_density_examples() {
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        let d = product_density(&half, 2).unwrap();
        assert!(max_abs_diff(d.matrix(), &(CMatrix::identity(4, 4) / c(4.0))) < 1e-15);

        let zero = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let d = product_density(&zero, 3).unwrap();
        assert_eq!(d.dim(), 8);
        assert!(max_abs_diff(d.matrix(), &diag(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])) < 1e-15);

        let d = product_density(&DensityMatrix::diagonal(&[2.0 / 3.0, 1.0 / 3.0]).unwrap(), 2).unwrap();
        assert!(max_abs_diff(d.matrix(), &diag(&[4.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0])) < 1e-15);
    }

    #[test]
    fn size_cap_is_enforced() {
        let s = example1_source();
        assert!(matches!(fcs_density_capped(&s, 4, 80), Err(Error::SizeCapExceeded { .. })));
        assert!(fcs_density_capped(&s, 4, 81).is_ok());
        let half = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(product_density_capped(&half, 13, 4096), Err(Error::SizeCapExceeded { .. })));
    }

    #[test]
    fn invalid_source_is_refused() {
        let s = example1_source();
        let doubled: Vec<CMatrix> = s.kraus().iter().map(|v| v * c(2.0)).collect();
        let bad = KrausSource::new(doubled, s.rho().clone()).unwrap();
        assert!(matches!(fcs_density(&bad, 2), Err(Error::InvalidSource(_))));
    }

    #[test]
    fn marginals_agree() {
        let product = SourceModel::product(&DensityMatrix::diagonal(&[0.7, 0.3]).unwrap());
        for n in 1..=3 {
            assert!(marginal_consistency(&product, n, 4096).unwrap().max_residual() <= 1e-12);
        }
        for n in 1..=2 {
            let report = marginal_consistency(&SourceModel::example1(), n, 4096).unwrap();
            assert!(report.max_residual() <= 1e-10, "{report:?}");
        }
    }

    #[test]
    fn random_source_is_deterministic_and_valid() {
        let a = random_source(3, 2, 42).unwrap();
        let b = random_source(3, 2, 42).unwrap();
        assert_eq!(a, b);
        for seed in 0..5 {
            let s = random_source(3, 2, seed).unwrap();
            let report = validate_source(&s);
            assert!(report.completeness_residual <= 1e-8);
            assert!(report.stationarity_residual <= 1e-8);
            assert!(report.passed());
        }
    }

    #[test]
    fn random_scalar_source_has_trivial_memory() {
        let s = random_source(2, 1, 9).unwrap();
        assert_eq!(s.k(), 1);
        assert!((s.rho()[(0, 0)] - c(1.0)).norm() < 1e-15);
        let d3 = fcs_density(&s, 3).unwrap();
        assert!((d3.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transfer_spectrum_has_peripheral_one() {
        let spectrum = example1_source().transfer_spectrum();
        assert_eq!(spectrum.len(), 4);
        assert!((spectrum[0] - c(1.0)).norm() < 1e-10);
        assert!(spectrum[1].norm() < 1.0 - 1e-6);
    }

    #[test]
    fn kraus_json_roundtrip_is_exact() {
        let s = random_source(3, 2, 5).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: KrausSource = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["d"], 3);
        assert_eq!(value["k"], 2);
        assert_eq!(value["V"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn kraus_json_rejects_inconsistent_shapes() {
        let text = r#"{"d": 2, "k": 1, "V": [[[[1.0, 0.0]]]], "rho": [[[1.0, 0.0]]]}"#;
        assert!(serde_json::from_str::<KrausSource>(text).is_err());
    }

    #[test]
    fn source_model_json_accepts_both_forms() {
        let model = SourceModel::example1();
        assert_eq!(SourceModel::from_json(&model.to_json().unwrap()).unwrap(), model);
        let bare = serde_json::to_string(&example1_source()).unwrap();
        assert_eq!(SourceModel::from_json(&bare).unwrap(), model);
        let product = SourceModel::maximally_mixed(3).unwrap();
        assert_eq!(SourceModel::from_json(&product.to_json().unwrap()).unwrap(), product);
    }
}
