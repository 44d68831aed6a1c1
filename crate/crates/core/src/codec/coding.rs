use crate::codec::ensemble::{Ensemble, PureEnsemble};
use crate::codec::subspace::Projector;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::tensor::{self, c, CVector};

const UNIT_TOL: f64 = 1e-10;
const ANCHOR_TOL: f64 = 1e-9;
/// Below this `‖q x‖²` the projected direction is meaningless and the anchor takes all weight.
const LOST_WEIGHT_FLOOR: f64 = 1e-28;
const EMPTY_BLOCK_FLOOR: f64 = 1e-15;

/// Code state for one pure input together with its kept and lost weights.
#[derive(Debug, Clone)]
pub struct EncodedState {
    pub code: DensityMatrix,
    /// `‖q x‖²`
    pub alpha_sq: f64,
    /// `‖(I − q) x‖²`
    pub beta_sq: f64,
}

/// `D̃ = α² |x̃⟩⟨x̃| + β² |a⟩⟨a|` with `x̃ = q x / ‖q x‖` and anchor `a ∈ Ran q`.
pub fn encode_pure(x: &CVector, q: &Projector, anchor: &CVector) -> Result<EncodedState> {
    if x.len() != q.dim() || anchor.len() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector dimensions {} and {} against projector on {}",
            x.len(),
            anchor.len(),
            q.dim()
        )));
    }
    if (x.norm() - 1.0).abs() > UNIT_TOL || (anchor.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::DegenerateInput("input and anchor must be unit vectors".into()));
    }
    if !q.contains(anchor, ANCHOR_TOL) {
        return Err(Error::DegenerateInput("anchor is not in the range of the projector".into()));
    }
    let kept = q.apply(x);
    let alpha_sq = kept.norm_squared();
    let beta_sq = (x - &kept).norm_squared();
    let anchor_part = tensor::outer(anchor) * c(beta_sq);
    let (matrix, spanning) = if alpha_sq > LOST_WEIGHT_FLOOR {
        (tensor::outer(&kept) + anchor_part, vec![kept, anchor.clone()])
    } else {
        (anchor_part, vec![anchor.clone()])
    };
    Ok(EncodedState {
        code: DensityMatrix::new(matrix)?.with_support(&spanning),
        alpha_sq,
        beta_sq,
    })
}

/// Encoding `i ↦ D̃_i` with every code supported in `Ran q`.
#[derive(Debug, Clone)]
pub struct CodingScheme {
    pub projector: Projector,
    pub anchor: Option<CVector>,
    pub codes: Vec<DensityMatrix>,
    /// `(α_i², β_i²)` for codes built by [`encode_pure`]; empty otherwise.
    pub splits: Vec<(f64, f64)>,
}

impl CodingScheme {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// `max_i ‖q D̃_i q − D̃_i‖_max`
    pub fn support_residual(&self) -> f64 {
        let q = self.projector.matrix();
        self.codes
            .iter()
            .map(|d| tensor::max_abs_diff(&(&q * d.matrix() * &q), d.matrix()))
            .fold(0.0, f64::max)
    }
}

/// Pure-state encoder from the positive coding argument, anchored at the
/// first basis vector of `q` (the top eigenvector for a high-probability projector).
pub fn theorem1_coding(ens: &PureEnsemble, q: &Projector) -> Result<CodingScheme> {
    if q.rank() == 0 {
        return Err(Error::DegenerateInput("projector has rank 0".into()));
    }
    let anchor = q.basis_vector(0);
    let encoded = ens
        .members()
        .iter()
        .map(|m| encode_pure(&m.state, q, &anchor))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodingScheme {
        projector: q.clone(),
        anchor: Some(anchor),
        splits: encoded.iter().map(|e| (e.alpha_sq, e.beta_sq)).collect(),
        codes: encoded.into_iter().map(|e| e.code).collect(),
    })
}

/// Best single-code choice per member: `D̃_i` is the projector on the top
/// eigenvector of `q D_i q`, which maximizes `Tr(D_i D̃)` over densities supported in `q`.
pub fn optimal_encoder(ens: &Ensemble, q: &Projector) -> Result<CodingScheme> {
    if q.rank() == 0 {
        return Err(Error::DegenerateInput("projector has rank 0".into()));
    }
    if ens.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble on {} dimensions, projector on {}",
            ens.dim(),
            q.dim()
        )));
    }
    let codes = ens
        .members()
        .iter()
        .map(|m| {
            let block = q.compress(m.state.matrix());
            let eig = tensor::hermitian_eig(&tensor::hermitian_part(&block))?;
            let u = if eig.values[0] > EMPTY_BLOCK_FLOOR {
                q.basis() * eig.vector(0)
            } else {
                q.basis_vector(0)
            };
            DensityMatrix::from_pure(&u)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodingScheme {
        projector: q.clone(),
        anchor: None,
        codes,
        splits: Vec::new(),
    })
}

fn check_lengths(ens: &Ensemble, scheme: &CodingScheme) -> Result<()> {
    if ens.len() != scheme.len() {
        return Err(Error::LengthMismatch {
            ensemble: ens.len(),
            codes: scheme.len(),
        });
    }
    if scheme.codes.iter().any(|d| d.dim() != ens.dim()) {
        return Err(Error::DimensionMismatch("codes and ensemble differ in dimension".into()));
    }
    Ok(())
}

/// `F = Σ p_i Tr(D_i D̃_i)`.
pub fn fidelity(ens: &Ensemble, scheme: &CodingScheme) -> Result<f64> {
    check_lengths(ens, scheme)?;
    Ok(ens
        .members()
        .iter()
        .zip(&scheme.codes)
        .map(|(m, code)| m.weight * m.state.expectation(code.matrix()))
        .sum())
}

/// `F′ = Σ p_i Tr(D_i^{1/2} D̃_i^{1/2})`.
pub fn fidelity_sqrt(ens: &Ensemble, scheme: &CodingScheme) -> Result<f64> {
    check_lengths(ens, scheme)?;
    let mut total = 0.0;
    for (m, code) in ens.members().iter().zip(&scheme.codes) {
        let a = m.state.sqrt()?;
        let b = code.sqrt()?;
        total += m.weight * tensor::trace_product(&a, &b).re;
    }
    Ok(total)
}
