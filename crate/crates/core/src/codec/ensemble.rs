use rand::seq::SliceRandom;
use rand::Rng;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::tensor::{self, c, CMatrix, CVector};

/// Eigenvalues above this count toward the rank of a density.
pub const RANK_FLOOR: f64 = 1e-13;
/// Ensemble members lighter than this are dropped.
const WEIGHT_FLOOR: f64 = 1e-15;
const ENSEMBLE_TOL: f64 = 1e-9;
const MIXER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PureMember {
    pub weight: f64,
    pub state: CVector,
}

/// Decomposition `D = Σ p_i |x_i⟩⟨x_i|` into unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEnsemble {
    members: Vec<PureMember>,
}

impl PureEnsemble {
    pub fn new(members: Vec<PureMember>) -> Result<Self> {
        let dim = members
            .first()
            .map(|m| m.state.len())
            .ok_or_else(|| Error::InvalidWeights("empty ensemble".into()))?;
        for (i, m) in members.iter().enumerate() {
            if m.state.len() != dim {
                return Err(Error::DimensionMismatch(format!("member {i} has dimension {}", m.state.len())));
            }
            if !(m.weight > 0.0) {
                return Err(Error::InvalidWeights(format!("member {i} has weight {}", m.weight)));
            }
            if (m.state.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidWeights(format!("member {i} is not a unit vector")));
            }
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > ENSEMBLE_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[PureMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].state.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    /// `Σ p_i |x_i⟩⟨x_i|`
    pub fn reconstruct(&self) -> CMatrix {
        let dim = self.dim();
        self.members.iter().fold(CMatrix::zeros(dim, dim), |acc, m| {
            acc + tensor::outer(&m.state) * c(m.weight)
        })
    }

    pub fn to_mixed(&self) -> Ensemble {
        Ensemble {
            members: self
                .members
                .iter()
                .map(|m| MixedMember {
                    weight: m.weight,
                    state: DensityMatrix::from_pure(&m.state).expect("unit vector"),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedMember {
    pub weight: f64,
    pub state: DensityMatrix,
}

/// Arbitrary decomposition `D = Σ p_i D_i` into density matrices.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<MixedMember>,
}

impl Ensemble {
    pub fn new(members: Vec<MixedMember>) -> Result<Self> {
        let dim = members
            .first()
            .map(|m| m.state.dim())
            .ok_or_else(|| Error::InvalidWeights("empty ensemble".into()))?;
        if let Some(bad) = members.iter().find(|m| m.state.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "ensemble mixes dimensions {dim} and {}",
                bad.state.dim()
            )));
        }
        if let Some(bad) = members.iter().find(|m| !(m.weight > 0.0)) {
            return Err(Error::InvalidWeights(format!("member weight {}", bad.weight)));
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > ENSEMBLE_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[MixedMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].state.dim()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let dim = self.dim();
        self.members.iter().fold(CMatrix::zeros(dim, dim), |acc, m| {
            acc + m.state.matrix() * c(m.weight)
        })
    }
}

/// How the leading eigenvectors are mixed into ensemble members.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixer {
    /// The eigen-ensemble `{λ_k, f_k}` itself.
    Eigen,
    /// `m x rank` matrix `U` with orthonormal columns; `√p_i x_i = Σ_k U_ik √λ_k f_k`.
    Isometry(CMatrix),
}

impl Mixer {
    pub fn random<R: Rng + ?Sized>(members: usize, rank: usize, rng: &mut R) -> Self {
        Mixer::Isometry(tensor::haar_isometry(members, rank, rng))
    }
}

/// Pure-state decomposition of `d` selected by `mixer`.
pub fn extremal_ensemble(d: &DensityMatrix, mixer: &Mixer) -> Result<PureEnsemble> {
    let eig = d.eigen()?;
    let rank = eig.rank_above(RANK_FLOOR);
    if rank == 0 {
        return Err(Error::DegenerateInput("density has no eigenvalue above the rank floor".into()));
    }
    let roots: Vec<f64> = eig.values[..rank].iter().map(|v| v.sqrt()).collect();
    // column k: √λ_k f_k
    let scaled = CMatrix::from_fn(d.dim(), rank, |i, k| eig.vectors[(i, k)] * roots[k]);

    let unnormalized: CMatrix = match mixer {
        Mixer::Eigen => scaled,
        Mixer::Isometry(u) => {
            if u.ncols() != rank {
                return Err(Error::BadMixer(format!(
                    "mixer has {} columns but the density has rank {rank}",
                    u.ncols()
                )));
            }
            let residual = tensor::max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(rank, rank));
            if residual > MIXER_TOL {
                return Err(Error::BadMixer(format!("U*U differs from I by {residual:e}")));
            }
            scaled * u.transpose()
        }
    };

    let members = unnormalized
        .column_iter()
        .filter_map(|col| {
            let weight = col.norm_squared();
            (weight > WEIGHT_FLOOR).then(|| PureMember {
                weight,
                state: col.into_owned() / c(weight.sqrt()),
            })
        })
        .collect();
    PureEnsemble::new(members)
}

/// Mixed decomposition obtained by splitting a pure ensemble into `groups`
/// random blocks and mixing within each block.
pub fn coarse_grain<R: Rng + ?Sized>(ens: &PureEnsemble, groups: usize, rng: &mut R) -> Result<Ensemble> {
    if groups == 0 {
        return Err(Error::InvalidParameter("coarse graining needs at least one group".into()));
    }
    let mut order: Vec<usize> = (0..ens.len()).collect();
    order.shuffle(rng);
    let mut assignment = vec![0usize; ens.len()];
    for (slot, &i) in order.iter().enumerate() {
        // first `groups` shuffled members seed the groups so none is empty
        assignment[i] = if slot < groups { slot } else { rng.random_range(0..groups) };
    }
    let dim = ens.dim();
    let mut members = Vec::new();
    for g in 0..groups.min(ens.len()) {
        let (weight, sum) = ens
            .members()
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == g)
            .fold((0.0, CMatrix::zeros(dim, dim)), |(w, acc), (m, _)| {
                (w + m.weight, acc + tensor::outer(&m.state) * c(m.weight))
            });
        members.push(MixedMember {
            weight,
            state: DensityMatrix::new(sum / c(weight))?,
        });
    }
    Ensemble::new(members)
}
