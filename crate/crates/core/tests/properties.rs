use matflow_core::linalg::unitary_exp;
use matflow_core::random::{
    normalize, random_complex_gaussian, random_hermitian, random_pd_unit, random_psd, random_unitary, rng_from_seed,
};
use matflow_core::stability::{trace_distance, von_neumann_entropy};
use matflow_core::{
    hermitian_eig, hs_inner, hs_norm_sq, matrix_function, trace_norm, Matrix, TorusModel,
};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn hs_inner_conjugate_symmetric(n in 2usize..7, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = random_complex_gaussian(&mut rng, n);
        let b = random_complex_gaussian(&mut rng, n);
        let ab = hs_inner(&a, &b).unwrap();
        let ba = hs_inner(&b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * ab.norm().max(1.0));
    }

    #[test]
    fn cauchy_schwarz(n in 2usize..7, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = random_complex_gaussian(&mut rng, n);
        let b = random_complex_gaussian(&mut rng, n);
        let lhs = hs_inner(&a, &b).unwrap().norm();
        prop_assert!(lhs <= (hs_norm_sq(&a) * hs_norm_sq(&b)).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn adjoint_moves_across_inner_product(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = random_complex_gaussian(&mut rng, n);
        let b = random_complex_gaussian(&mut rng, n);
        let c = random_complex_gaussian(&mut rng, n);
        let lhs = hs_inner(&a.matmul(&b), &c).unwrap();
        let rhs = hs_inner(&b, &a.adjoint().matmul(&c)).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn spectral_calculus_composes(n in 2usize..7, seed in any::<u64>()) {
        let h = random_hermitian(&mut rng_from_seed(seed), n);
        let exp = matrix_function(&h, f64::exp).unwrap();
        let back = matrix_function(&exp, f64::ln).unwrap();
        prop_assert!(back.max_abs_diff(&h) <= 1e-9 * h.max_abs().max(1.0));
        let sq = matrix_function(&h, |x| x * x).unwrap();
        prop_assert!(sq.max_abs_diff(&h.matmul(&h)) <= 1e-10 * sq.max_abs().max(1.0));
    }

    #[test]
    fn eigensolver_reconstructs(n in 1usize..9, seed in any::<u64>()) {
        let h = random_hermitian(&mut rng_from_seed(seed), n);
        let e = hermitian_eig(&h).unwrap();
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.reconstruct().max_abs_diff(&h) <= 1e-10 * h.max_abs().max(1.0));
    }

    #[test]
    fn trace_norm_is_a_norm(n in 2usize..6, seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut rng = rng_from_seed(seed);
        let a = random_hermitian(&mut rng, n);
        let b = random_hermitian(&mut rng, n);
        let ta = trace_norm(&a).unwrap();
        prop_assert!(ta >= 0.0);
        prop_assert!(close(trace_norm(&a.scale(s)).unwrap(), s.abs() * ta, 1e-10));
        prop_assert!(trace_norm(&(&a + &b)).unwrap() <= ta + trace_norm(&b).unwrap() + 1e-10);
        prop_assert_eq!(trace_norm(&Matrix::zeros(n)).unwrap(), 0.0);
    }

    #[test]
    fn norm_equivalence_of_distances(n in 2usize..7, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let u = random_hermitian(&mut rng, n);
        let v = random_hermitian(&mut rng, n);
        let hs = u.hs_distance(&v);
        let t = trace_distance(&u, &v).unwrap();
        prop_assert!(hs <= t + 1e-10);
        prop_assert!(t <= (n as f64).sqrt() * hs + 1e-10);
    }

    #[test]
    fn entropy_concave_under_mixing(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let u = random_pd_unit(&mut rng, n, 1e-2);
        let v = random_pd_unit(&mut rng, n, 1e-2);
        // Equal traces: rescale v.
        let v = v.scale(u.trace().re / v.trace().re);
        let mid = (&u + &v).scale(0.5);
        let s = |m: &Matrix| von_neumann_entropy(m).unwrap();
        prop_assert!(s(&mid) >= 0.5 * (s(&u) + s(&v)) - 1e-10);
    }

    #[test]
    fn entropy_unitarily_invariant(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let u = random_pd_unit(&mut rng, n, 1e-2);
        let w = random_unitary(&mut rng, n);
        let rotated = w.matmul(&u).matmul(&w.adjoint());
        prop_assert!((von_neumann_entropy(&rotated).unwrap() - von_neumann_entropy(&u).unwrap()).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dirichlet_energy_nonnegative(n in 2usize..8, seed in any::<u64>()) {
        let m = TorusModel::clock_shift(n).unwrap();
        let a = random_complex_gaussian(&mut rng_from_seed(seed), n);
        prop_assert!(m.dirichlet_energy(&a).unwrap() >= -1e-12);
    }

    #[test]
    fn laplacian_preserves_hermitian(n in 2usize..8, seed in any::<u64>()) {
        let m = TorusModel::clock_shift(n).unwrap();
        let a = random_hermitian(&mut rng_from_seed(seed), n);
        let l = m.laplacian(&a).unwrap();
        prop_assert!(l.hermitian_defect() <= 1e-12 * l.max_abs().max(1.0));
    }

    #[test]
    fn laplacian_self_adjoint(n in 2usize..7, seed in any::<u64>()) {
        let m = TorusModel::clock_shift(n).unwrap();
        let mut rng = rng_from_seed(seed);
        let a = random_complex_gaussian(&mut rng, n);
        let b = random_complex_gaussian(&mut rng, n);
        let lhs = hs_inner(&m.laplacian(&a).unwrap(), &b).unwrap();
        let rhs = hs_inner(&a, &m.laplacian(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn dirichlet_energy_bounded_by_top_eigenvalue(n in 2usize..7, seed in any::<u64>()) {
        let m = TorusModel::clock_shift(n).unwrap();
        let a = random_complex_gaussian(&mut rng_from_seed(seed), n);
        let mean = a.trace() / n as f64;
        let mut centred = a.clone();
        for j in 0..n {
            centred[(j, j)] -= mean;
        }
        let lmax = m.eigenbasis().unwrap().lambda_max();
        prop_assert!(m.dirichlet_energy(&a).unwrap() <= lmax * hs_norm_sq(&centred) * (1.0 + 1e-10) + 1e-12);
    }
}

#[test]
fn superoperator_spectrum_unitarily_invariant() {
    // Conjugating the generators by a unitary W conjugates Δ̂ by W ⊗ W̄, so
    // the spectrum must not move.
    let mut rng = rng_from_seed(31);
    for n in 2..=5 {
        let base = TorusModel::clock_shift(n).unwrap();
        let w = random_unitary(&mut rng, n);
        let conj = |m: &Matrix| w.matmul(m).matmul(&w.adjoint()).hermitian_part();
        let rotated = TorusModel::custom(conj(base.x()), conj(base.y())).unwrap();
        let a = hermitian_eig(&base.superoperator()).unwrap().eigenvalues;
        let b = hermitian_eig(&rotated.superoperator()).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * a.last().unwrap().max(1.0), "n={n}: {x} vs {y}");
        }
    }
}

#[test]
fn unitary_exp_is_unitary_and_psd_samples_are_psd() {
    let mut rng = rng_from_seed(8);
    for n in 2..=6 {
        let h = random_hermitian(&mut rng, n);
        let u = unitary_exp(&h, 0.7).unwrap();
        assert!(u.matmul(&u.adjoint()).max_abs_diff(&Matrix::identity(n)) <= 1e-12);
        let p = random_psd(&mut rng, n);
        assert!(hermitian_eig(&p).unwrap().eigenvalues[0] >= -1e-12);
    }
}

#[test]
fn hs_inner_rejects_mismatched_sizes() {
    let a = normalize(&Matrix::identity(2));
    let b = Matrix::identity(3);
    assert!(hs_inner(&a, &b).is_err());
}
