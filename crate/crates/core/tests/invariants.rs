use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irqi::diagnostics::verify::{parlett_sandwich, rayleigh_error_sandwich, residual_step_bound};
use irqi::diagnostics::TargetSpec;
use irqi::generators::{beta_problem, random_hermitian};
use irqi::lanczos::lanczos_extend;
use irqi::minres::{minres_solve, residual_identity_check};
use irqi::rqi::{initial_vector, next_tolerance, rayleigh_quotient, run, SolverConfig, XI_CEILING};
use irqi::tuned_precond::{PrecondMode, TunedPreconditioner, TuningOutcome};
use irqi::vector::{axpy, c64, dot, norm, normalize, scale_real, DenseVector};
use irqi::{SparseHermitianMatrix, TolerancePolicy};

fn random_unit(n: usize, seed: u64) -> DenseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: DenseVector = (0..n).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    normalize(&mut v).unwrap();
    v
}

/// Orthonormal basis of the span of `cols` by twice-applied Gram-Schmidt;
/// columns that vanish relative to their input are dropped.
fn orthonormal_span(cols: &[DenseVector]) -> Vec<DenseVector> {
    let mut q: Vec<DenseVector> = Vec::new();
    for c in cols {
        let before = norm(c);
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &q {
                let h = dot(b, &v);
                axpy(-h, b, &mut v);
            }
        }
        let after = norm(&v);
        if after > 1e-10 * before {
            scale_real(1.0 / after, &mut v);
            q.push(v);
        }
    }
    q
}

fn distance_to_span(q: &[DenseVector], x: &[c64]) -> f64 {
    let mut r = x.to_vec();
    for b in q {
        let h = dot(b, &r);
        axpy(-h, b, &mut r);
    }
    norm(&r)
}

/// Columns `b, Mb, ..., M^{m-1} b` of the Krylov matrix for `M = A - σI`,
/// each normalized.
fn krylov_columns(a: &SparseHermitianMatrix, sigma: f64, b: &[c64], m: usize) -> Vec<DenseVector> {
    let mut cols = vec![b.to_vec()];
    while cols.len() < m {
        let mut next = a.shifted_matvec(sigma, cols.last().unwrap()).unwrap();
        let s = norm(&next);
        scale_real(1.0 / s, &mut next);
        cols.push(next);
    }
    cols
}

/// In `[0, 1)`, and above the ceiling only while `1 - ξ` is resolved.
fn resolvable_tolerance(xi: f64) -> bool {
    (0.0..1.0).contains(&xi) && (xi <= XI_CEILING || 1.0 - xi > 4.0 * f64::EPSILON)
}

fn policy_strategy() -> impl Strategy<Value = TolerancePolicy> {
    prop_oneof![
        Just(TolerancePolicy::Exact),
        (0.05f64..0.9).prop_map(|xi| TolerancePolicy::Fixed { xi }),
        Just(TolerancePolicy::decreasing()),
        (10.0f64..5000.0).prop_map(TolerancePolicy::quadratic),
        (10.0f64..5000.0).prop_map(TolerancePolicy::linear),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lanczos_basis_spans_krylov_space_of_a(seed in 0u64..10_000, n in 3usize..10, m in 1usize..6, sigma in -1.0f64..1.0) {
        let a = random_hermitian(n, seed % 2 == 0, seed);
        let b = random_unit(n, seed + 1);
        let m = m.min(n - 1);
        let dec = lanczos_extend(&a, sigma, &b, m, None).unwrap();
        prop_assert!(dec.imag_contamination <= 1e-12 * (a.one_norm() + sigma.abs()));
        // the unshifted Krylov space equals the shifted one
        let q = orthonormal_span(&krylov_columns(&a, 0.0, &b, dec.steps()));
        for v in dec.basis.iter().take(dec.steps()) {
            prop_assert!(distance_to_span(&q, v) <= 1e-8);
        }
    }

    #[test]
    fn minres_residual_is_krylov_least_squares_minimum(seed in 0u64..10_000, n in 4usize..10, m in 2usize..6, sigma in -0.5f64..0.5) {
        let a = random_hermitian(n, seed % 3 != 0, seed);
        let b = random_unit(n, seed + 7);
        let m = m.min(n - 1);
        let res = minres_solve(&a, sigma, &b, 0.0, m).unwrap();
        // min ‖b - (A - σI) z‖ over z in K_m: distance of b to (A - σI) K_m
        let k = krylov_columns(&a, sigma, &b, res.steps);
        let mk: Vec<DenseVector> = k.iter().map(|c| a.shifted_matvec(sigma, c).unwrap()).collect();
        let q = orthonormal_span(&mk);
        let best = distance_to_span(&q, &b);
        prop_assert!((res.xi - best).abs() <= 1e-10, "xi {} vs dense {}", res.xi, best);
        prop_assert!(res.residual_history.windows(2).all(|h| h[1] <= h[0] + 1e-14));
        prop_assert!(residual_identity_check(&res, &a, sigma, &b) <= 1e-10);
    }

    #[test]
    fn produced_tolerances_never_round_to_one(seed in 0u64..10_000, policy in policy_strategy(), n in 2usize..20) {
        let a = random_hermitian(n, true, seed);
        let u = random_unit(n, seed + 3);
        let est = rayleigh_quotient(&a, &u).unwrap();
        let xi = next_tolerance(&policy, &est, &a);
        prop_assert!(resolvable_tolerance(xi), "xi = {xi}");
        if policy == TolerancePolicy::Exact {
            prop_assert_eq!(xi, 0.0);
        }
    }

    #[test]
    fn tuned_factor_reproduces_a_on_u(seed in 0u64..10_000, n in 2usize..16) {
        let a = random_hermitian(n, seed % 2 == 1, seed);
        let u = random_unit(n, seed + 5);
        let theta = rayleigh_quotient(&a, &u).unwrap().theta;
        let mut p = TunedPreconditioner::build_base(&a, theta, PrecondMode::DenseCholesky).unwrap();
        let outcome = p.tune(&a, &u).unwrap();
        if outcome != TuningOutcome::Skipped {
            prop_assert!(p.tuning_defect(&a, &u).unwrap() <= 1e-10);
            prop_assert!(p.factor_defect(&u) <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outer_trace_invariants(seed in 0u64..1000, beta in 2.0f64..30.0, policy in policy_strategy(), sin0 in 0.01f64..0.2) {
        let p = beta_problem(40, beta, seed).unwrap();
        let o = p.oracle(TargetSpec::Smallest).unwrap();
        prop_assert!((o.beta * o.gap - o.spread).abs() <= 1e-10 * o.spread);
        let u0 = initial_vector(o.x(), sin0, seed + 11).unwrap();
        let out = run(&p.matrix, &u0, &policy, &SolverConfig::default(), Some(&o)).unwrap();
        prop_assert!((norm(&out.final_estimate.u) - 1.0).abs() <= 1e-12);
        prop_assert!(out.final_estimate.theta_imag.abs() <= 1e-12 * o.one_norm);
        for rec in &out.trace.records {
            if let Some(xi) = rec.xi_requested {
                prop_assert!(resolvable_tolerance(xi), "xi = {xi}");
            }
            prop_assert!(rec.r_norm.is_finite() && rec.theta.is_finite());
        }
        prop_assert_eq!(parlett_sandwich(&out.trace, &o).unwrap().violations, 0);
        prop_assert_eq!(rayleigh_error_sandwich(&out.trace, &o).unwrap().violations, 0);
        prop_assert_eq!(residual_step_bound(&out.trace).violations, 0);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = beta_problem(50, 10.0, 4).unwrap();
    let o = p.oracle(TargetSpec::Smallest).unwrap();
    let u0 = initial_vector(o.x(), 0.1, 2).unwrap();
    let go = || run(&p.matrix, &u0, &TolerancePolicy::Fixed { xi: 0.3 }, &SolverConfig::default(), Some(&o)).unwrap();
    let (x, y) = (go(), go());
    assert_eq!(x.trace.len(), y.trace.len());
    for (r, s) in x.trace.records.iter().zip(&y.trace.records) {
        assert_eq!(r.r_norm.to_bits(), s.r_norm.to_bits());
        assert_eq!(r.xi_achieved.map(f64::to_bits), s.xi_achieved.map(f64::to_bits));
        assert_eq!(r.inner_steps, s.inner_steps);
    }
}
