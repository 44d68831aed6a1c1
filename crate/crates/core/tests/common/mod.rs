//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use qsource::num_complex::Complex64;
use qsource::tensor::{self, c, CMatrix};
use qsource::{DensityMatrix, KrausSource};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    (&g + g.adjoint()) * c(0.5)
}

pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::new(tensor::random_density(dim, rng)).unwrap()
}

/// Random probability vector with strictly positive entries.
pub fn random_weights<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// `m`-outcome POVM `S^{-1/2} G_j S^{-1/2}` with `S = Σ G_j` and random PSD `G_j`.
pub fn random_povm<R: Rng>(dim: usize, m: usize, rng: &mut R) -> Vec<CMatrix> {
    let raw: Vec<CMatrix> = (0..m)
        .map(|_| {
            let g = ginibre(dim, dim, rng);
            &g * g.adjoint()
        })
        .collect();
    let total = raw.iter().fold(CMatrix::zeros(dim, dim), |acc, g| acc + g);
    let inv_sqrt = tensor::hermitian_eig(&total).unwrap().map_spectrum(|v| 1.0 / v.sqrt());
    raw.iter()
        .map(|g| tensor::hermitian_part(&(&inv_sqrt * g * &inv_sqrt)))
        .collect()
}

/// Digits of `index` in base `d`, most significant first.
pub fn digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

/// `(D_n)_{J,I} = Tr(ρ V_{i1}* … V_{in}* V_{jn} … V_{j1})`, evaluated entry by entry.
pub fn naive_fcs_density(s: &KrausSource, n: usize) -> CMatrix {
    let d = s.d();
    let k = s.k();
    let dim = d.pow(n as u32);
    let word = |index: usize| {
        // V_{jn} … V_{j1}
        digits(index, d, n)
            .iter()
            .fold(CMatrix::identity(k, k), |acc, &j| &s.kraus()[j] * acc)
    };
    let words: Vec<CMatrix> = (0..dim).map(word).collect();
    CMatrix::from_fn(dim, dim, |row, col| {
        tensor::trace(&(s.rho() * words[col].adjoint() * &words[row]))
    })
}

/// Fewest strings of an i.i.d. Bernoulli(`p` for symbol 0) source of length
/// `n` whose total probability reaches `1 − eps`, by enumerating all `2^n` strings.
pub fn classical_covering_size(p: f64, n: usize, eps: f64) -> usize {
    let mut probs: Vec<f64> = (0..1usize << n)
        .map(|s| {
            let ones = s.count_ones() as i32;
            p.powi(n as i32 - ones) * (1.0 - p).powi(ones)
        })
        .collect();
    probs.sort_by(|a, b| b.total_cmp(a));
    let mut total = 0.0;
    for (i, q) in probs.iter().enumerate() {
        total += q;
        if total >= 1.0 - eps {
            return i + 1;
        }
    }
    probs.len()
}

pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}
