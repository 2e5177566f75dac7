mod common;

use common::*;
use evapflow::grid::{identity_flow, sup_distance};
use evapflow::picard::{apply_g, contraction_excess, solve_fixed_point, SolverOptions};
use evapflow::process::TAIL_TOL;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn contraction_inequality(l1 in 0.0..1.0f64, l2 in 0.0..1.0f64, a1 in 0.0..3.0f64, a2 in 0.0..3.0f64, b in 0.0..2.0f64) {
        let g = grid(33);
        let sc = affine();
        let th1 = mixed_flow(&g, l1, move |t| a1 * t);
        let th2 = mixed_flow(&g, l2, move |t| a2 * t + b * t * t);
        let excess = contraction_excess(&th1, &th2, &sc, 21).unwrap();
        prop_assert!(excess.iter().all(|e| *e <= 1e-6), "{:?}", excess);
    }

    #[test]
    fn g_output_is_a_flow(c0 in 0.0..3.0f64, c1 in 0.0..3.0f64, l in 0.0..1.0f64, a in 0.0..3.0f64) {
        let g = grid(17);
        let sc = single(affine_rate(c0, c1));
        let theta = mixed_flow(&g, l, move |t| a * t);
        let k_max = evapflow::process::k_max_for((c0 + 2.0 * c1) * 1.0, TAIL_TOL);
        let out = apply_g(&theta, &sc, k_max).unwrap();
        prop_assert!(out.invariants().worst().1 <= 1e-9);
    }
}

#[test]
fn constant_rate_g_ignores_theta() {
    let g = grid(33);
    let sc = constant();
    let a = apply_g(&identity_flow(&g), &sc, 13).unwrap();
    let b = apply_g(&exponential_flow(&g), &sc, 13).unwrap();
    assert!(sup_distance(&a, &b).unwrap() < 1e-15);
    for m in 0..33 {
        for j in 0..33 {
            let exact = 1.0 - (1.0 - g.z[m]) * (-g.t[j]).exp();
            assert!((a.get(g.initial_index(m), j) - exact).abs() < 1e-14);
        }
    }
}

#[test]
fn iterates_decrease_after_the_envelope_peak() {
    for sc in [affine(), tabulated()] {
        let fp = solve_fixed_point(&sc, &grid(65), SolverOptions::default()).unwrap();
        let d = &fp.diagnostics;
        let peak = d.records.iter().enumerate().fold((0, 0.0), |acc, (k, r)| if r.envelope > acc.1 { (k, r.envelope) } else { acc }).0;
        assert!(d.records[peak..].windows(2).all(|p| p[1].distance <= p[0].distance + 1e-12));
        assert!(fp.residual <= 2.0 * d.tol);
        assert!((d.contraction_constant - 2.0 * sc.mixture.c_w * (2.0 * sc.mixture.c_w).exp()).abs() < 1e-15);
    }
}

#[test]
fn refined_fixed_point_is_self_consistent() {
    // the 129 solution interpolated onto the 65 grid nodes agrees to second order
    let sc = affine();
    let coarse = solve_fixed_point(&sc, &grid(65), SolverOptions::default()).unwrap();
    let fine = solve_fixed_point(&sc, &grid(129), SolverOptions::default()).unwrap();
    let g = coarse.y_c.grid.clone();
    let mut worst: f64 = 0.0;
    for i in 0..g.n_xi() {
        for j in 0..g.n_t() {
            if g.is_admissible(i, j) {
                worst = worst.max((coarse.y_c.get(i, j) - fine.y_c.eval(g.xi[i], g.t[j])).abs());
            }
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn non_convergence_is_reported() {
    let opts = SolverOptions { tol: 1e-14, max_iter: 3, k_max: None };
    match solve_fixed_point(&affine(), &grid(17), opts) {
        Err(evapflow::Error::NoConvergence(d)) => assert_eq!(d.records.len(), 3),
        other => panic!("{other:?}"),
    }
}
