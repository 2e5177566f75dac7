//! Scenarios and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use evapflow::grid::{Flow, Grid, GridSpec};
use evapflow::model::{Density, InitialDensity, Poly, RateFunction, RateMixture, RateTable, Scenario};

pub fn single(w: RateFunction) -> Scenario {
    let mix = RateMixture::new(vec![w], vec![1.0], 1.0).unwrap();
    Scenario::new(mix, InitialDensity { sigmas: vec![Density::Uniform] }).unwrap()
}

pub fn zero() -> Scenario {
    single(RateFunction::Constant(0.0))
}

pub fn constant() -> Scenario {
    single(RateFunction::Constant(1.0))
}

/// Rates 1 and 3 with weights 1/2 and densities `2(1−y)`, `2y`.
pub fn two_constant() -> Scenario {
    let mix = RateMixture::new(vec![RateFunction::Constant(1.0), RateFunction::Constant(3.0)], vec![0.5, 0.5], 1.0).unwrap();
    let sigmas = vec![Density::Polynomial(Poly(vec![2.0, -2.0])), Density::Polynomial(Poly(vec![0.0, 2.0]))];
    Scenario::new(mix, InitialDensity { sigmas }).unwrap()
}

/// `w(y, t) = 1 + y`.
pub fn affine() -> Scenario {
    single(affine_rate(1.0, 1.0))
}

pub fn affine_rate(c0: f64, c1: f64) -> RateFunction {
    RateFunction::AffineInY { c0, c1, time: Poly::constant(1.0) }
}

/// Table of `(1 + y)(1 + t/2)` on a 5 × 5 grid; bilinear interpolation
/// reproduces it exactly.
pub fn tabulated_rate() -> RateFunction {
    let nodes: Vec<f64> = (0..5).map(|k| k as f64 / 4.0).collect();
    let values = nodes.iter().map(|y| nodes.iter().map(|t| (1.0 + y) * (1.0 + t / 2.0)).collect()).collect();
    let dwdy = nodes.iter().map(|_| nodes.iter().map(|t| 1.0 + t / 2.0).collect()).collect();
    RateFunction::Tabulated(RateTable::new(nodes.clone(), nodes, values, dwdy).unwrap())
}

pub fn tabulated() -> Scenario {
    single(tabulated_rate())
}

/// `w(y, t) = 1 + t²`.
pub fn time_dependent() -> Scenario {
    single(RateFunction::Separable { a: Poly::constant(1.0), b: Poly(vec![1.0, 0.0, 1.0]) })
}

/// The five scenarios every property is run on.
pub fn five() -> Vec<(&'static str, Scenario)> {
    vec![
        ("zero", zero()),
        ("constant", constant()),
        ("two-constant", two_constant()),
        ("affine", affine()),
        ("tabulated", tabulated()),
    ]
}

pub fn grid(n: usize) -> Arc<Grid> {
    Grid::new(GridSpec::new(1.0, n, n)).unwrap()
}

/// `θ_q(z, t) = 1 − (1 − z) e^{−q(t)}`, `θ_q((0,t₀), t) = 1 − e^{−(q(t) − q(t₀))}`
/// mixed with `θ₀`: `(1 − λ) θ₀ + λ θ_q`. Valid for increasing `q` with `q(0) = 0`.
pub fn mixed_flow<Q: Fn(f64) -> f64>(g: &Arc<Grid>, lambda: f64, q: Q) -> Flow {
    Flow::from_fn(g, |xi, t| {
        let tq = if xi >= 0.0 { 1.0 - (1.0 - xi) * (-q(t)).exp() } else { 1.0 - (-(q(t) - q(-xi))).exp() };
        (1.0 - lambda) * xi.max(0.0) + lambda * tq
    })
}

/// `1 − (1 − z) e^{−t}` on the initial segment, `1 − e^{−(t − t₀)}` on the boundary.
pub fn exponential_flow(g: &Arc<Grid>) -> Flow {
    mixed_flow(g, 1.0, |t| t)
}

pub fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    let ln_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    (k as f64 * lambda.ln() - lambda - ln_fact).exp()
}

/// `G(θ)` by the nested-integral form truncated at `k ≤ k_trunc`, with nodal
/// kernels `ω(t_v, t_u) = w(θ((0, t_v), t_u), t_u)` and the trapezoid rule for
/// every integral. Shares no code with the library's arrival scheme.
pub fn nested_quadrature_g(theta: &Flow, scenario: &Scenario, k_trunc: usize) -> Flow {
    let g = theta.grid.clone();
    let (n, nz, h) = (g.n_t(), g.n_z(), g.h);
    let trap = |vals: &[f64]| -> f64 {
        if vals.len() < 2 {
            return 0.0;
        }
        h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[vals.len() - 1]))
    };
    let mut out = Flow::zeros(&g);
    let mut phi_total = vec![vec![0.0; n]; g.n_xi()];
    let mix = &scenario.mixture;
    for ((w, &r), sigma) in mix.rates.iter().zip(&mix.weights).zip(&scenario.density.sigmas) {
        // big_omega[v][u] and survival for v ≤ u
        let mut surv = vec![vec![0.0; n]; n];
        let mut kern = vec![vec![0.0; n]; n];
        for v in 0..n {
            let om: Vec<f64> = (0..n).map(|u| if u >= v { w.value(theta.get(g.boundary_index(v), u), g.t[u]) } else { 0.0 }).collect();
            let mut acc = 0.0;
            surv[v][v] = 1.0;
            kern[v][v] = om[v];
            for u in v + 1..n {
                acc += 0.5 * h * (om[u - 1] + om[u]);
                surv[v][u] = (-acc).exp();
                kern[v][u] = om[u] * surv[v][u];
            }
        }
        // trapezoid hat weights for σ
        let weights: Vec<f64> = (0..nz)
            .map(|m| {
                let left = if m > 0 { sigma.hat_moments(g.z[m - 1], g.z[m]).1 } else { 0.0 };
                let right = if m + 1 < nz { sigma.hat_moments(g.z[m], g.z[m + 1]).0 } else { 0.0 };
                left + right
            })
            .collect();
        let mut p_init = vec![vec![0.0; n]; nz];
        let mut q_bnd = vec![vec![0.0; n]; n];
        for m in 0..nz {
            let om0: Vec<f64> = (0..n).map(|u| w.value(theta.get(g.initial_index(m), u), g.t[u])).collect();
            let mut s0 = vec![1.0; n];
            let mut acc = 0.0;
            for u in 1..n {
                acc += 0.5 * h * (om0[u - 1] + om0[u]);
                s0[u] = (-acc).exp();
            }
            p_init[m] = s0.clone();
            let mut f: Vec<f64> = (0..n).map(|u| om0[u] * s0[u]).collect();
            let mut p = vec![vec![0.0; n]; n];
            for a in 0..n {
                for b in a..n {
                    p[a][b] = s0[b];
                }
            }
            for _k in 1..=k_trunc {
                for a in 1..n {
                    for b in a..n {
                        let vals: Vec<f64> = (0..=a).map(|u| f[u] * surv[u][b]).collect();
                        p[a][b] += trap(&vals);
                    }
                }
                let next: Vec<f64> = (0..n).map(|u| trap(&(0..=u).map(|v| f[v] * kern[v][u]).collect::<Vec<_>>())).collect();
                f = next;
            }
            for a in 0..n {
                for b in a..n {
                    q_bnd[a][b] += weights[m] * p[a][b];
                }
            }
        }
        for m in 0..nz {
            for j in 0..n {
                let tail: f64 = (m..nz - 1)
                    .map(|c| {
                        let (lw, rw) = sigma.hat_moments(g.z[c], g.z[c + 1]);
                        p_init[c][j] * lw + p_init[c + 1][j] * rw
                    })
                    .sum();
                phi_total[g.initial_index(m)][j] += r * tail;
            }
        }
        for v in 1..n {
            for j in v..n {
                phi_total[g.boundary_index(v)][j] += r * q_bnd[v][j];
            }
        }
    }
    for i in 0..g.n_xi() {
        for j in 0..n {
            if g.is_admissible(i, j) {
                out.set(i, j, 1.0 - phi_total[i][j]);
            }
        }
    }
    out
}
