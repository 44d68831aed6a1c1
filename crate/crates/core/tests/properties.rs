mod common;

use proptest::prelude::*;
use qsource::codec::{
    coarse_grain, encode_pure, extremal_ensemble, fidelity, fidelity_sqrt, high_prob_subspace, optimal_encoder,
    theorem1_coding, theorem1_experiment, theorem2_experiment, Ensemble, MixedMember, Mixer, Projector,
    Theorem1Params, Theorem2Params, CHAIN_TOL, HP_SLACK,
};
use qsource::entropy::{holevo_chi, measurement_joint, mutual_information, Povm};
use qsource::source::{fcs_density, marginal_consistency, product_density};
use qsource::tensor::{self, c, partial_trace, CMatrix, CVector, Side};
use qsource::{random_source, von_neumann_entropy, DensityMatrix, EntropyTrace, KrausSource, SourceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_density(d: &DensityMatrix) {
    let m = d.matrix();
    assert!(tensor::hermitian_deviation(m) <= tensor::hermitian_tolerance(d.dim()));
    assert!((tensor::trace(m).re - 1.0).abs() <= 1e-9);
    d.check_psd().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_trace_is_multiplicative(seed in any::<u64>(), p in 1usize..5, q in 1usize..5) {
        let mut r = rng(seed);
        let a = ginibre(p, p, &mut r);
        let b = ginibre(q, q, &mut r);
        let lhs = tensor::trace(&tensor::kron(&a, &b));
        let rhs = tensor::trace(&a) * tensor::trace(&b);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn eigensystem_invariants(seed in any::<u64>(), dim in 1usize..40) {
        let h = random_hermitian(dim, &mut rng(seed));
        let eig = tensor::hermitian_eig(&h).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let gram = eig.vectors.adjoint() * &eig.vectors;
        prop_assert!(tensor::max_abs_diff(&gram, &CMatrix::identity(dim, dim)) <= 1e-10);
        prop_assert!(tensor::max_abs_diff(&eig.reconstruct(), &h) <= 1e-10);
    }

    #[test]
    fn partial_traces_of_products(seed in any::<u64>(), p in 1usize..4, q in 1usize..4) {
        let mut r = rng(seed);
        let a = random_hermitian(p, &mut r);
        let b = random_hermitian(q, &mut r);
        let ab = tensor::kron(&a, &b);
        let last = partial_trace(&ab, q, Side::Last).unwrap();
        let first = partial_trace(&ab, p, Side::First).unwrap();
        prop_assert!(tensor::max_abs_diff(&last, &(&a * tensor::trace(&b))) <= 1e-10);
        prop_assert!(tensor::max_abs_diff(&first, &(&b * tensor::trace(&a))) <= 1e-10);
    }

    #[test]
    fn sqrt_commutes_with_unitary_conjugation(seed in any::<u64>(), dim in 1usize..9) {
        let mut r = rng(seed);
        let d = tensor::random_density(dim, &mut r);
        let u = tensor::haar_unitary(dim, &mut r);
        let lhs = tensor::psd_sqrt(&tensor::hermitian_part(&(&u * &d * u.adjoint()))).unwrap();
        let rhs = &u * tensor::psd_sqrt(&d).unwrap() * u.adjoint();
        prop_assert!(tensor::max_abs_diff(&lhs, &rhs) <= 1e-9);
    }

    #[test]
    fn sqrt_fixes_projectors(seed in any::<u64>(), dim in 2usize..9) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=dim);
        let q = Projector::random(dim, rank, &mut r).matrix();
        prop_assert!(tensor::max_abs_diff(&tensor::psd_sqrt(&q).unwrap(), &q) <= 1e-9);
    }

    #[test]
    fn entropy_bounds_and_unitary_invariance(seed in any::<u64>(), dim in 1usize..10) {
        let mut r = rng(seed);
        let d = random_state(dim, &mut r);
        let s = von_neumann_entropy(&d).unwrap();
        prop_assert!(s >= 0.0 && s <= (dim as f64).ln() + 1e-12);
        let u = tensor::haar_unitary(dim, &mut r);
        let rotated = DensityMatrix::new(&u * d.matrix() * u.adjoint()).unwrap();
        prop_assert!((von_neumann_entropy(&rotated).unwrap() - s).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fcs_densities_are_valid_states(seed in any::<u64>(), d in 2usize..4, k in 1usize..4, n in 1usize..5) {
        let s = random_source(d, k, seed).unwrap();
        let dn = fcs_density(&s, n).unwrap();
        check_density(&dn);
        if n <= 3 {
            // cross-check the fast construction against the entry formula
            prop_assert!(tensor::max_abs_diff(dn.matrix(), &naive_fcs_density(&s, n)) <= 1e-12);
        }
    }

    #[test]
    fn marginals_are_compatible(seed in any::<u64>(), d in 2usize..4, k in 1usize..4, n in 1usize..4) {
        let s = SourceModel::FinitelyCorrelated { source: random_source(d, k, seed).unwrap() };
        prop_assert!(marginal_consistency(&s, n, 4096).unwrap().max_residual() <= 1e-9);
    }

    #[test]
    fn block_entropies_are_subadditive(seed in any::<u64>(), k in 1usize..4) {
        let s = SourceModel::FinitelyCorrelated { source: random_source(2, k, seed).unwrap() };
        let trace = EntropyTrace::from_densities(&s.densities(5, 4096).unwrap()).unwrap();
        prop_assert!(trace.subadditivity_violations(1e-8).is_empty());
        for row in &trace.rows {
            prop_assert!(row.entropy >= 0.0 && row.entropy <= row.n as f64 * 2f64.ln() + 1e-12);
        }
        // min over a longer prefix can only go down
        let prefix_min = |m: usize| trace.rows[..m].iter().map(|r| r.per_site).fold(f64::INFINITY, f64::min);
        prop_assert!((1..5).all(|m| prefix_min(m + 1) <= prefix_min(m)));
    }

    #[test]
    fn product_entropy_is_additive(seed in any::<u64>(), d in 2usize..4, n in 1usize..5) {
        let rho = random_state(d, &mut rng(seed));
        let s1 = von_neumann_entropy(&rho).unwrap();
        let sn = von_neumann_entropy(&product_density(&rho, n).unwrap()).unwrap();
        prop_assert!((sn - n as f64 * s1).abs() <= 1e-8);
    }

    #[test]
    fn holevo_bounds_measured_information(seed in any::<u64>(), dim in 1usize..9, m in 1usize..5, outcomes in 1usize..6) {
        let mut r = rng(seed);
        let p = random_weights(m, &mut r);
        let states: Vec<DensityMatrix> = (0..m).map(|_| random_state(dim, &mut r)).collect();
        let povm = Povm::new(random_povm(dim, outcomes, &mut r)).unwrap();
        let chi = holevo_chi(&p, &states).unwrap();
        let info = mutual_information(&measurement_joint(&p, &states, &povm).unwrap());
        prop_assert!(chi >= -1e-12);
        prop_assert!(info >= -1e-12);
        prop_assert!(info <= chi + 1e-9, "I = {info}, chi = {chi}");
    }

    #[test]
    fn hp_subspace_invariants(seed in any::<u64>(), dim in 1usize..12, eps in 0.001f64..0.999) {
        let d = random_state(dim, &mut rng(seed));
        let hp = high_prob_subspace(&d, eps).unwrap();
        let values = &hp.eigen.values;
        prop_assert!(hp.captured_weight >= 1.0 - eps - HP_SLACK);
        let below: f64 = values[..hp.dimension - 1].iter().sum();
        prop_assert!(below < 1.0 - eps);
        let q = hp.projector.matrix();
        prop_assert!(tensor::max_abs_diff(&(&q * &q), &q) <= 1e-9);
        prop_assert!(tensor::hermitian_deviation(&q) <= 1e-9);
        prop_assert_eq!(hp.projector.rank(), hp.dimension);
    }

    #[test]
    fn extremal_ensembles_reconstruct(seed in any::<u64>(), dim in 1usize..10, extra in 0usize..6) {
        let mut r = rng(seed);
        let d = random_state(dim, &mut r);
        let ens = extremal_ensemble(&d, &Mixer::random(dim + extra, dim, &mut r)).unwrap();
        prop_assert!(tensor::max_abs_diff(&ens.reconstruct(), d.matrix()) <= 1e-9);
        prop_assert!((ens.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(ens.members().iter().all(|m| m.weight > 0.0 && (m.state.norm() - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn pure_encoding_invariants(seed in any::<u64>(), dim in 2usize..10) {
        let mut r = rng(seed);
        let rank = r.random_range(1..dim);
        let q = Projector::random(dim, rank, &mut r);
        let x = tensor::random_unit_vector(dim, &mut r);
        let enc = encode_pure(&x, &q, &q.basis_vector(0)).unwrap();
        prop_assert!((enc.alpha_sq + enc.beta_sq - 1.0).abs() <= 1e-10);
        let qm = q.matrix();
        let code = enc.code.matrix();
        prop_assert!(tensor::max_abs_diff(&(&qm * code * &qm), code) <= 1e-9);
        let overlap = enc.code.expectation(&tensor::outer(&x));
        prop_assert!(overlap >= 2.0 * enc.alpha_sq - 1.0 - 1e-12);
    }

    #[test]
    fn fidelity_is_dominated_by_root_fidelity(seed in any::<u64>(), dim in 1usize..8, m in 1usize..5) {
        let mut r = rng(seed);
        let p = random_weights(m, &mut r);
        let members = p
            .iter()
            .map(|&weight| MixedMember { weight, state: random_state(dim, &mut r) })
            .collect();
        let ens = Ensemble::new(members).unwrap();
        let scheme = qsource::codec::CodingScheme {
            projector: Projector::identity(dim),
            anchor: None,
            codes: (0..m).map(|_| random_state(dim, &mut r)).collect(),
            splits: Vec::new(),
        };
        let f = fidelity(&ens, &scheme).unwrap();
        let f_sqrt = fidelity_sqrt(&ens, &scheme).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!(f <= f_sqrt + 1e-10);
    }

    #[test]
    fn optimal_encoder_dominates_direct_coding(seed in any::<u64>(), dim in 2usize..10) {
        let mut r = rng(seed);
        let d = random_state(dim, &mut r);
        let ens = extremal_ensemble(&d, &Mixer::random(dim + 2, dim, &mut r)).unwrap();
        let q = Projector::random(dim, r.random_range(1..=dim), &mut r);
        let mixed = ens.to_mixed();
        let direct = fidelity(&mixed, &theorem1_coding(&ens, &q).unwrap()).unwrap();
        let best = optimal_encoder(&mixed, &q).unwrap();
        prop_assert!(best.support_residual() <= 1e-9);
        prop_assert!(fidelity(&mixed, &best).unwrap() >= direct - 1e-10);
    }

    #[test]
    fn converse_chain_over_arbitrary_codings(seed in any::<u64>(), dim in 2usize..10, groups in 1usize..4) {
        let mut r = rng(seed);
        let d = random_state(dim, &mut r);
        let q = Projector::random(dim, r.random_range(1..=dim), &mut r);
        let pure = extremal_ensemble(&d, &Mixer::random(dim + 3, dim, &mut r)).unwrap();
        let ens = coarse_grain(&pure, groups, &mut r).unwrap();
        let scheme = optimal_encoder(&ens, &q).unwrap();
        let check = qsource::codec::converse_chain(&d, &ens, &scheme).unwrap();
        prop_assert!(check.holds(), "{check:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn direct_chain_and_mixer_independence(seed in any::<u64>(), n in 1usize..5, eps in 0.01f64..0.9) {
        let s = SourceModel::FinitelyCorrelated { source: random_source(2, 2, seed).unwrap() };
        let run = |mixer_seed| {
            theorem1_experiment(&s, &Theorem1Params { n, eps, delta: 0.1, mixer_seed }, 4096).unwrap()
        };
        let a = run(seed ^ 1);
        let b = run(seed ^ 2);
        prop_assert!(a.verdict.exact_chain_holds, "{a:?}");
        prop_assert!(b.verdict.exact_chain_holds, "{b:?}");
        prop_assert!(a.fidelity >= 1.0 - eps - CHAIN_TOL);
        prop_assert_eq!(a.dimension, b.dimension);
        prop_assert_eq!(a.phi_q, b.phi_q);
        prop_assert_eq!(a.rate, b.rate);
    }

    #[test]
    fn converse_experiment_chain(seed in any::<u64>(), p in 0.3f64..0.7, n in 2usize..5) {
        let s = SourceModel::product(&DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap());
        let report = theorem2_experiment(&s, &Theorem2Params { n, delta: 0.05, trials: 6, seed }, 4096).unwrap();
        prop_assert!(report.verdict.exact_chain_holds, "{report:?}");
        prop_assert!(report.fidelity <= report.fidelity_sqrt + CHAIN_TOL);
    }
}

#[test]
fn scalar_kraus_source_is_a_pure_product() {
    // k = 1 with V_i = √p_i gives |ψ⟩⟨ψ|^{⊗n}, ψ = Σ √p_i e_i; diagonal entries are the i.i.d. law
    let p = [0.5, 0.3, 0.2];
    let kraus = p.iter().map(|&x: &f64| CMatrix::from_element(1, 1, c(x.sqrt()))).collect();
    let s = KrausSource::new(kraus, CMatrix::identity(1, 1)).unwrap();
    let psi = DensityMatrix::from_pure(&CVector::from_iterator(3, p.iter().map(|&x: &f64| c(x.sqrt())))).unwrap();
    for n in 1..=4 {
        let dn = fcs_density(&s, n).unwrap();
        let expected = product_density(&psi, n).unwrap();
        assert!(tensor::max_abs_diff(dn.matrix(), expected.matrix()) <= 1e-12);
        for (idx, entry) in dn.matrix().diagonal().iter().enumerate() {
            let law: f64 = digits(idx, 3, n).iter().map(|&i| p[i]).product();
            assert!((entry.re - law).abs() <= 1e-12);
        }
    }
}

#[test]
fn eigensolver_reconstructs_at_large_dimension() {
    let h = random_hermitian(600, &mut rng(99));
    let eig = tensor::hermitian_eig(&h).unwrap();
    assert!(tensor::max_abs_diff(&eig.reconstruct(), &h) <= 1e-10);
}

#[test]
fn hp_dimension_is_minimal_among_sampled_projectors() {
    let mut r = rng(2024);
    for dim in 2..=6 {
        let d = random_state(dim, &mut r);
        for eps in [0.05, 0.2, 0.5] {
            let n_eps = high_prob_subspace(&d, eps).unwrap().dimension;
            for _ in 0..10_000 {
                let rank = r.random_range(1..=dim);
                let q = Projector::random(dim, rank, &mut r);
                if q.weight(d.matrix()) >= 1.0 - eps {
                    assert!(rank >= n_eps, "rank {rank} projector captures 1-eps, HP needs {n_eps}");
                }
            }
        }
    }
}

#[test]
fn hp_dimension_matches_classical_covering_sets() {
    for p in [0.5, 0.7, 0.9] {
        let rho = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        for n in 1..=8 {
            let dn = product_density(&rho, n).unwrap();
            for eps in [0.05, 0.2] {
                let hp = high_prob_subspace(&dn, eps).unwrap();
                assert_eq!(hp.dimension, classical_covering_size(p, n, eps), "p={p} n={n} eps={eps}");
            }
        }
    }
}

#[test]
fn mixed_self_coding_shows_fidelity_below_one() {
    let d = random_state(3, &mut rng(5));
    let ens = Ensemble::new(vec![MixedMember { weight: 1.0, state: d.clone() }]).unwrap();
    let scheme = qsource::codec::CodingScheme {
        projector: Projector::identity(3),
        anchor: None,
        codes: vec![d.clone()],
        splits: Vec::new(),
    };
    assert!((fidelity(&ens, &scheme).unwrap() - d.purity()).abs() < 1e-14);
    assert!((fidelity_sqrt(&ens, &scheme).unwrap() - 1.0).abs() < 1e-10);
}
