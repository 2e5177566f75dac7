//! The map `G` on flows and Picard iteration to its fixed point `y_C`.
//!
//! `G(θ)(γ, t) = 1 − Σ_α r_α ∫_{y₀}^1 P_{α,z}(no arrival in (t₀, t]) σ_α(z) dz`.
//! The probability is taken from [`ArrivalKernel`] at the `z` nodes and paired
//! with `σ_α` through exact hat-function moments, i.e. the integrand is
//! piecewise linear in `z` between nodes.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{flow_distance, identity_flow, sup_distance, Flow, Grid};
use crate::model::{Check, RateMixture, Scenario};
use crate::process::{k_max_for, ArrivalKernel, TAIL_TOL};

/// Tolerance for flow invariants of `G(θ)`.
pub const FLOW_SLACK: f64 = 1e-9;
/// Allowed excess of a Picard increment over `(CT)^k/k!`.
pub const ENVELOPE_SLACK: f64 = 1e-6;
/// Slack for the finite-difference derivative bounds.
pub const APPENDIX_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Count truncation; chosen from the tail bound when `None`.
    pub k_max: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 60, k_max: None }
    }
}

/// `K_max` from the tail bound with `x = (max_α ‖w_α‖ + C_W) T`.
pub fn default_k_max(mixture: &RateMixture) -> usize {
    k_max_for((mixture.max_norm + mixture.c_w) * mixture.horizon, TAIL_TOL)
}

/// `(CT)^k / k!`, evaluated in logs.
pub fn envelope(c: f64, horizon: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let x = c * horizon;
    if x <= 0.0 {
        return 0.0;
    }
    (k as f64 * x.ln() - crate::process::ln_factorial(k)).exp()
}

/// `φ_α(γ, t_j)` on every admissible node, one table per component. The
/// tables have the layout of a [`Flow`] but are not flows themselves.
pub fn phi_components(theta: &Flow, scenario: &Scenario, k_max: usize) -> Vec<Flow> {
    let mix = &scenario.mixture;
    mix.rates
        .iter()
        .zip(&mix.weights)
        .zip(&scenario.density.sigmas)
        .map(|((w, &r), sigma)| {
            let kernel = ArrivalKernel::build(theta, w, k_max);
            let g = &theta.grid;
            let moments: Vec<(f64, f64)> = g.z.windows(2).map(|c| sigma.hat_moments(c[0], c[1])).collect();
            component_phi(&kernel, &moments, r)
        })
        .collect()
}

fn component_phi(kernel: &ArrivalKernel, moments: &[(f64, f64)], r: f64) -> Flow {
    let g = kernel.grid.clone();
    let (nz, nt) = (g.n_z(), g.n_t());
    let paths: Vec<_> = g.z.par_iter().map(|&z| kernel.path(z)).collect();
    // full hat weight of every z node
    let node_w: Vec<f64> = (0..nz)
        .map(|m| {
            let right = if m + 1 < nz { moments[m].0 } else { 0.0 };
            let left = if m > 0 { moments[m - 1].1 } else { 0.0 };
            right + left
        })
        .collect();
    let mut phi = Flow::zeros(&g);

    let boundary: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; b + 1];
            for (path, wm) in paths.iter().zip(&node_w) {
                for (a, q) in path.no_arrival_column(kernel, b).into_iter().enumerate() {
                    acc[a] += wm * q;
                }
            }
            acc
        })
        .collect();
    for (b, col) in boundary.iter().enumerate() {
        for (v, val) in col.iter().enumerate().skip(1) {
            phi.set(g.boundary_index(v), b, r * val);
        }
    }

    for j in 0..nt {
        let mut suffix = 0.0;
        phi.set(g.initial_index(nz - 1), j, 0.0);
        for m in (0..nz - 1).rev() {
            let (a, bm) = moments[m];
            suffix += paths[m].s0[j] * a + paths[m + 1].s0[j] * bm;
            phi.set(g.initial_index(m), j, r * suffix);
        }
    }
    phi
}

/// `1 − Σ_α φ_α`, summed in component order. Corner values `θ(−t, t)` are
/// checked against [`FLOW_SLACK`] and then stored as exact zeros.
pub fn flow_from_phi(grid: &std::sync::Arc<Grid>, phi: &[Flow]) -> Result<Flow> {
    let mut out = Flow::zeros(grid);
    for i in 0..grid.n_xi() {
        for j in 0..grid.n_t() {
            if grid.is_admissible(i, j) {
                let s: f64 = phi.iter().map(|p| p.get(i, j)).sum();
                out.set(i, j, 1.0 - s);
            }
        }
    }
    for j in 0..grid.n_t() {
        let i = grid.first_admissible(j);
        let v = out.get(i, j);
        if v.abs() > FLOW_SLACK {
            return Err(Error::FlowInvariant { what: "theta(-t,t) = 0".into(), magnitude: v.abs() });
        }
        out.set(i, j, 0.0);
    }
    Ok(out)
}

/// `G(θ)`, with the flow invariants of the output checked.
pub fn apply_g(theta: &Flow, scenario: &Scenario, k_max: usize) -> Result<Flow> {
    let phi = phi_components(theta, scenario, k_max);
    let out = flow_from_phi(&theta.grid, &phi)?;
    out.ensure_invariants(FLOW_SLACK)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `d_k = max_j d(θ_{k+1}, θ_k, t_j)`
    pub distance: f64,
    pub envelope: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub records: Vec<IterationRecord>,
    pub k_max: usize,
    pub contraction_constant: f64,
    pub horizon: f64,
    pub tol: f64,
    pub converged: bool,
    pub seconds: f64,
}

impl IterationDiagnostics {
    pub fn last_distance(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.distance)
    }

    /// CSV `iter,d_k,envelope_k,seconds`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::grid::fmt17;
        writeln!(out, "iter,d_k,envelope_k,seconds")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.iter, fmt17(r.distance), fmt17(r.envelope), fmt17(r.seconds))?;
        }
        Ok(())
    }
}

/// Converged characteristic curves and the tables that produced them.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// `y_C = G(θ_K)`.
    pub y_c: Flow,
    /// `φ_α` computed from `θ_K`, so `y_C = 1 − Σ_α φ_α` node by node.
    pub phi: Vec<Flow>,
    pub diagnostics: IterationDiagnostics,
    /// `max_j d(G(y_C), y_C, t_j)`.
    pub residual: f64,
}

/// Picard iteration `θ_{k+1} = G(θ_k)` from `θ₀(ξ, t) = max(0, ξ)`.
pub fn solve_fixed_point(scenario: &Scenario, grid: &std::sync::Arc<Grid>, opts: SolverOptions) -> Result<FixedPoint> {
    let mix = &scenario.mixture;
    if (grid.horizon - mix.horizon).abs() > 1e-12 {
        return Err(Error::Grid(format!("grid horizon {} differs from scenario horizon {}", grid.horizon, mix.horizon)));
    }
    let k_max = opts.k_max.unwrap_or_else(|| default_k_max(mix));
    let c = mix.contraction_constant();
    let start = Instant::now();
    let mut diag = IterationDiagnostics {
        records: Vec::new(),
        k_max,
        contraction_constant: c,
        horizon: mix.horizon,
        tol: opts.tol,
        converged: false,
        seconds: 0.0,
    };
    let mut theta = identity_flow(grid);
    for k in 0..opts.max_iter {
        let t0 = Instant::now();
        let phi = phi_components(&theta, scenario, k_max);
        let next = flow_from_phi(grid, &phi)?;
        next.ensure_invariants(FLOW_SLACK)?;
        let d = sup_distance(&next, &theta)?;
        let e = envelope(c, mix.horizon, k);
        diag.records.push(IterationRecord { iter: k, distance: d, envelope: e, seconds: t0.elapsed().as_secs_f64() });
        if d > e + ENVELOPE_SLACK {
            return Err(Error::Envelope { iter: k, d, envelope: e });
        }
        if d <= opts.tol {
            let check = apply_g(&next, scenario, k_max)?;
            let residual = sup_distance(&check, &next)?;
            diag.converged = true;
            diag.seconds = start.elapsed().as_secs_f64();
            return Ok(FixedPoint { y_c: next, phi, diagnostics: diag, residual });
        }
        theta = next;
    }
    diag.seconds = start.elapsed().as_secs_f64();
    Err(Error::NoConvergence(Box::new(diag)))
}

/// `d(G(θ′), G(θ), t_j) − C ∫_0^{t_j} d(θ′, θ, s) ds` at every `t` node.
pub fn contraction_excess(a: &Flow, b: &Flow, scenario: &Scenario, k_max: usize) -> Result<Vec<f64>> {
    let ga = apply_g(a, scenario, k_max)?;
    let gb = apply_g(b, scenario, k_max)?;
    let g = &a.grid;
    let c = scenario.mixture.contraction_constant();
    let d_in: Vec<f64> = (0..g.n_t()).map(|j| flow_distance(a, b, j)).collect::<Result<_>>()?;
    let cum = crate::quad::cumulative_trapezoid_uniform(g.h, &d_in);
    (0..g.n_t()).map(|j| Ok(flow_distance(&ga, &gb, j)? - c * cum[j])).collect()
}

/// Finite-difference estimates of the derivative bounds on `G(θ)`.
#[derive(Debug, Clone)]
pub struct AppendixReport {
    pub checks: Vec<Check>,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Forward differences of `G(θ)` against
/// `0 ≤ ∂_{y₀}G ≤ 1`, `0 ≤ ∂_t G ≤ M_W + C_osc` on the initial segment and
/// `0 ≤ −∂_{t₀}G, ∂_t G ≤ (M_W + C_osc) e^{2 C_osc T}` on the boundary segment.
pub fn check_appendix_bounds(g_theta: &Flow, mixture: &RateMixture) -> AppendixReport {
    let g = &g_theta.grid;
    let (nz, nt, h) = (g.n_z(), g.n_t(), g.h);
    let dz = 1.0 / (nz - 1) as f64;
    let m_osc = mixture.m_w + mixture.c_osc;
    let b_bound = m_osc * (2.0 * mixture.c_osc * mixture.horizon).exp();
    let outside = |x: f64, hi: f64| (-x).max(x - hi).max(0.0);
    let val = |i: usize, j: usize| g_theta.get(i, j);

    let mut dy0: f64 = 0.0;
    let mut dt_init: f64 = 0.0;
    for m in 0..nz {
        let i = g.initial_index(m);
        for j in 0..nt {
            if m + 1 < nz {
                dy0 = dy0.max(outside((val(g.initial_index(m + 1), j) - val(i, j)) / dz, 1.0));
            }
            if j + 1 < nt {
                dt_init = dt_init.max(outside((val(i, j + 1) - val(i, j)) / h, m_osc));
            }
        }
    }
    let mut dt0: f64 = 0.0;
    let mut dt_bnd: f64 = 0.0;
    for v in 0..nt {
        let i = g.boundary_index(v);
        for j in v..nt {
            if v < j && v + 1 < nt {
                dt0 = dt0.max(outside((val(i, j) - val(g.boundary_index(v + 1), j)) / h, b_bound));
            }
            if j + 1 < nt {
                dt_bnd = dt_bnd.max(outside((val(i, j + 1) - val(i, j)) / h, b_bound));
            }
        }
    }
    AppendixReport {
        checks: vec![
            Check::new("appendix_dG_dy0_initial", dy0, APPENDIX_SLACK),
            Check::new("appendix_dG_dt_initial", dt_init, APPENDIX_SLACK),
            Check::new("appendix_dG_dt0_boundary", dt0, APPENDIX_SLACK),
            Check::new("appendix_dG_dt_boundary", dt_bnd, APPENDIX_SLACK),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{Density, InitialDensity, Poly, RateFunction};

    fn scenario(w: RateFunction) -> Scenario {
        let mix = RateMixture::new(vec![w], vec![1.0], 1.0).unwrap();
        Scenario::new(mix, InitialDensity { sigmas: vec![Density::Uniform] }).unwrap()
    }

    fn grid(n: usize) -> std::sync::Arc<Grid> {
        Grid::new(GridSpec::new(1.0, n, n)).unwrap()
    }

    #[test]
    fn zero_rate_maps_everything_to_identity() {
        let g = grid(17);
        let sc = scenario(RateFunction::Constant(0.0));
        let theta = Flow::from_fn(&g, |xi, t| if xi >= 0.0 { xi + (1.0 - xi) * t / 2.0 } else { 0.5 * (t + xi) });
        let out = apply_g(&theta, &sc, 4).unwrap();
        assert!(sup_distance(&out, &identity_flow(&g)).unwrap() < 1e-15);
        let fp = solve_fixed_point(&sc, &g, SolverOptions::default()).unwrap();
        assert_eq!(fp.diagnostics.records.len(), 1);
        assert_eq!(fp.diagnostics.records[0].distance, 0.0);
    }

    #[test]
    fn constant_rate_two_iterations() {
        let g = grid(33);
        let sc = scenario(RateFunction::Constant(1.0));
        let fp = solve_fixed_point(&sc, &g, SolverOptions::default()).unwrap();
        assert_eq!(fp.diagnostics.records.len(), 2);
        for m in 0..33 {
            let z = g.z[m];
            for j in 0..33 {
                let exact = 1.0 - (1.0 - z) * (-g.t[j]).exp();
                assert!((fp.y_c.get(g.initial_index(m), j) - exact).abs() < 1e-12);
            }
        }
        assert!(fp.residual < 2e-8);
    }

    #[test]
    fn edges_of_g() {
        let g = grid(17);
        let sc = scenario(RateFunction::AffineInY { c0: 1.0, c1: 1.0, time: Poly::constant(1.0) });
        let out = apply_g(&identity_flow(&g), &sc, 20).unwrap();
        for j in 0..17 {
            assert_eq!(out.get(g.first_admissible(j), j), 0.0);
            assert!((out.get(g.n_xi() - 1, j) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn envelope_values() {
        assert_eq!(envelope(0.0, 1.0, 0), 1.0);
        assert_eq!(envelope(0.0, 1.0, 3), 0.0);
        assert!((envelope(2.0, 1.5, 3) - 4.5).abs() < 1e-12);
        let c = 2.0 * 1f64.exp().powi(2);
        assert!((c - 14.778).abs() < 1e-3);
    }

    #[test]
    fn appendix_bounds_zero_rate_exact() {
        let g = grid(17);
        let sc = scenario(RateFunction::Constant(0.0));
        let out = apply_g(&identity_flow(&g), &sc, 2).unwrap();
        let rep = check_appendix_bounds(&out, &sc.mixture);
        assert!(rep.passed());
        assert!(rep.checks.iter().all(|c| c.violation == 0.0));
    }
}
