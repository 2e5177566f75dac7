//! Reconstruction of `μ_t` from the converged curves and checks of the
//! properties the solution must have.
//!
//! `μ_t` is carried by per-component tails `V_α(y, t) = μ_t({w_α} × [y, 1))`,
//! obtained by transporting `φ_α(γ, t)` through `y = y_C(γ, t)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{fmt17, Flow, Grid};
use crate::model::{Check, RateMixture, Scenario};
use crate::picard::{phi_components, FixedPoint};
use crate::quad::{trapezoid, trapezoid_uniform};

/// Tolerance of solidity and conservation.
pub const MEASURE_TOL: f64 = 1e-6;
/// Tolerance of `y_C = 1 − Σ φ_α`.
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// Lower slack of the finite-evaporation check.
pub const EVAPORATION_LOWER_SLACK: f64 = 1e-12;
/// Upper slack of the finite-evaporation check.
pub const EVAPORATION_UPPER_SLACK: f64 = 1e-4;
/// Slack of the Lipschitz inequality.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;
const PHI_SLACK: f64 = 1e-9;

/// `φ_α(γ, t)` per component on the flow layout.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub components: Vec<Flow>,
    pub weights: Vec<f64>,
}

impl PhiTable {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.components[0].grid
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// The tables that produced `fp.y_c`.
    pub fn from_fixed_point(fp: &FixedPoint, scenario: &Scenario) -> Self {
        PhiTable { components: fp.phi.clone(), weights: scenario.mixture.weights.clone() }
    }

    /// Worst violations of: `φ ≥ 0`, `φ((1,0), t) = 0`, `φ` non-increasing in
    /// `t`, and `φ_α(γ, t₀) = r_α ∫_{y₀}^1 σ_α`.
    pub fn checks(&self, scenario: &Scenario) -> Vec<Check> {
        let g = self.grid().clone();
        let (mut neg, mut top, mut mono, mut start): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for (a, phi) in self.components.iter().enumerate() {
            let sigma = &scenario.density.sigmas[a];
            let r = self.weights[a];
            for i in 0..g.n_xi() {
                let j0 = g.boundary_time_index(i).unwrap_or(0);
                let y0 = g.xi[i].max(0.0);
                start = start.max((phi.get(i, j0) - r * sigma.integral(y0, 1.0)).abs());
                for j in j0..g.n_t() {
                    neg = neg.max(-phi.get(i, j));
                    if j + 1 < g.n_t() {
                        mono = mono.max(phi.get(i, j + 1) - phi.get(i, j));
                    }
                }
            }
            for j in 0..g.n_t() {
                top = top.max(phi.get(g.n_xi() - 1, j).abs());
            }
        }
        vec![
            Check::new("phi_nonnegative", neg, PHI_SLACK),
            Check::new("phi_zero_at_top", top, PHI_SLACK),
            Check::new("phi_nonincreasing_in_t", mono, PHI_SLACK),
            Check::new("phi_at_start_time", start, 1e-8),
        ]
    }
}

/// `φ_α` computed from the kernels of `flow`.
pub fn build_phi(flow: &Flow, scenario: &Scenario, k_max: usize) -> Result<PhiTable> {
    let phi = PhiTable { components: phi_components(flow, scenario, k_max), weights: scenario.mixture.weights.clone() };
    if let Some(c) = phi.checks(scenario).into_iter().find(|c| !c.passed) {
        return Err(Error::FlowInvariant { what: c.name, magnitude: c.violation });
    }
    Ok(phi)
}

/// `y_C` and `φ_α` along the admissible `ξ` nodes of one time node, for
/// evaluating `V_α(y)` at arbitrary `y`.
#[derive(Debug, Clone)]
struct Column {
    j: usize,
    yc: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

impl Column {
    fn new(y_c: &Flow, phi: &PhiTable, j: usize) -> Self {
        let g = &y_c.grid;
        let range = g.first_admissible(j)..g.n_xi();
        Column {
            j,
            yc: range.clone().map(|i| y_c.get(i, j)).collect(),
            phi: phi.components.iter().map(|p| range.clone().map(|i| p.get(i, j)).collect()).collect(),
        }
    }

    /// Position of the smallest `ξ` with `y_C ≥ y` and the interpolation weight
    /// of its left neighbour.
    fn locate(&self, y: f64) -> Result<(usize, f64)> {
        let i = self.yc.partition_point(|v| *v < y);
        if i == self.yc.len() {
            return Err(Error::Inversion { y, t_index: self.j });
        }
        if i == 0 {
            return Ok((0, 0.0));
        }
        let (lo, hi) = (self.yc[i - 1], self.yc[i]);
        Ok((i, (hi - y) / (hi - lo)))
    }

    fn tail(&self, alpha: usize, y: f64) -> Result<f64> {
        let (i, f) = self.locate(y)?;
        let p = &self.phi[alpha];
        Ok(if f == 0.0 { p[i] } else { p[i] + f * (p[i - 1] - p[i]) })
    }
}

/// `V_α(·, t_j)` on the `y` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSlice {
    pub t_index: usize,
    pub t: f64,
    pub y: Vec<f64>,
    /// `v[α][m] = V_α(y_m)`.
    pub v: Vec<Vec<f64>>,
}

impl MeasureSlice {
    /// CSV with columns `y,alpha,V`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "y,alpha,V")?;
        for (m, y) in self.y.iter().enumerate() {
            for (a, v) in self.v.iter().enumerate() {
                writeln!(out, "{},{a},{}", fmt17(*y), fmt17(v[m]))?;
            }
        }
        Ok(())
    }
}

/// Inverts `y_C(·, t_j)` at the `y` grid (the `z` nodes) and reads off `φ_α`.
pub fn slice_measure(y_c: &Flow, phi: &PhiTable, j: usize) -> Result<MeasureSlice> {
    let g = &y_c.grid;
    if j >= g.n_t() {
        return Err(Error::Domain(format!("time index {j} out of range")));
    }
    let col = Column::new(y_c, phi, j);
    let v = (0..phi.len())
        .map(|a| g.z.iter().map(|&y| col.tail(a, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureSlice { t_index: j, t: g.t[j], y: g.z.clone(), v })
}

/// Slices at every time node.
pub fn all_slices(y_c: &Flow, phi: &PhiTable) -> Result<Vec<MeasureSlice>> {
    (0..y_c.grid.n_t()).into_par_iter().map(|j| slice_measure(y_c, phi, j)).collect()
}

/// `max |Σ_α V_α(y) − (1 − y)|` over all slices and `y` nodes.
pub fn solidity_violation(slices: &[MeasureSlice]) -> f64 {
    slices
        .iter()
        .flat_map(|s| s.y.iter().enumerate().map(move |(m, y)| (s.v.iter().map(|v| v[m]).sum::<f64>() - (1.0 - y)).abs()))
        .fold(0.0, f64::max)
}

/// `max |V_α(0) − r_α|` over all slices and components.
pub fn conservation_violation(slices: &[MeasureSlice], weights: &[f64]) -> f64 {
    slices
        .iter()
        .flat_map(|s| s.v.iter().zip(weights).map(|(v, r)| (v[0] - r).abs()))
        .fold(0.0, f64::max)
}

/// `max |y_C − (1 − Σ_α φ_α)|` over admissible nodes.
pub fn coordinate_consistency(y_c: &Flow, phi: &PhiTable) -> f64 {
    let g = &y_c.grid;
    let mut worst: f64 = 0.0;
    for i in 0..g.n_xi() {
        for j in 0..g.n_t() {
            if g.is_admissible(i, j) {
                let s: f64 = phi.components.iter().map(|p| p.get(i, j)).sum();
                worst = worst.max((y_c.get(i, j) - (1.0 - s)).abs());
            }
        }
    }
    worst
}

/// Worst excess of forward differences of `y_C` in `t` outside
/// `[0, M_W e^{2 C_W t}]`, with the slacks applied.
pub fn finite_evaporation_violation(y_c: &Flow, mixture: &RateMixture) -> f64 {
    let g = &y_c.grid;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..g.n_xi() {
        let j0 = g.boundary_time_index(i).unwrap_or(0);
        for j in j0..g.n_t() - 1 {
            let d = (y_c.get(i, j + 1) - y_c.get(i, j)) / g.h;
            let hi = mixture.m_w * (2.0 * mixture.c_w * g.t[j + 1]).exp() + EVAPORATION_UPPER_SLACK;
            worst = worst.max(-EVAPORATION_LOWER_SLACK - d).max(d - hi);
        }
    }
    worst
}

/// Fixed `(γ, t)` sample lattice: `ξ ∈ {−kT/8} ∪ {k/8}`, `t ∈ {qT/16}`,
/// rounded to grid nodes, admissible pairs with `t > t₀` only.
pub fn residual_lattice(grid: &Grid) -> Vec<(usize, usize)> {
    let nb = (grid.n_t() - 1) as f64;
    let nz = (grid.n_z() - 1) as f64;
    let mut xis: Vec<usize> = (0..8).map(|k| grid.boundary_index((k as f64 * nb / 8.0).round() as usize)).collect();
    xis.extend((1..=8).map(|k| grid.initial_index((k as f64 * nz / 8.0).round() as usize)));
    xis.sort_unstable();
    xis.dedup();
    let mut ts: Vec<usize> = (1..=16).map(|q| (q as f64 * nb / 16.0).round() as usize).collect();
    ts.dedup();
    let mut out = Vec::new();
    for &i in &xis {
        let j0 = grid.boundary_time_index(i).unwrap_or(0);
        out.extend(ts.iter().filter(|&&j| j > j0).map(|&j| (i, j)));
    }
    out
}

/// Quadrature points on `[a, 1]` for integrals against `V(·, s)`: `a`, the
/// `y` nodes not too close to an end, the kink `y_C((0,0), s)` and `1`.
/// Returned as one or two segments, split at the kink.
fn inner_segments(grid: &Grid, a: f64, kink: f64) -> Vec<Vec<f64>> {
    let hy = 1.0 / (grid.n_z() - 1) as f64;
    let split = kink > a + hy / 4.0 && kink < 1.0 - hy / 4.0;
    let far = |y: f64, lo: f64, hi: f64| y > lo + hy / 4.0 && y < hi - hy / 4.0;
    let build = |lo: f64, hi: f64| {
        let mut pts = vec![lo];
        pts.extend(grid.z.iter().copied().filter(|&y| far(y, lo, hi)));
        pts.push(hi);
        pts
    };
    if a >= 1.0 {
        return Vec::new();
    }
    if split {
        vec![build(a, kink), build(kink, 1.0)]
    } else {
        vec![build(a, 1.0)]
    }
}

/// `∫_a^1 f(x) dμ_α(x)` where `dμ_α = −∂_x V_α dx`. The density is the
/// centered difference of `V_α` at each cell midpoint and the integral is the
/// midpoint rule, so constant `f` telescopes to `f·(V(a) − V(1))` exactly.
fn against_measure<F: Fn(f64) -> f64>(col: &Column, alpha: usize, segs: &[Vec<f64>], f: F) -> Result<f64> {
    let mut total = 0.0;
    for x in segs {
        let v: Vec<f64> = x.iter().map(|&y| col.tail(alpha, y)).collect::<Result<_>>()?;
        for k in 0..x.len() - 1 {
            total += f(0.5 * (x[k] + x[k + 1])) * (v[k] - v[k + 1]);
        }
    }
    Ok(total)
}

/// `I_α(i, s_j) = ∫_{y_C(ξ_i, s_j)}^1 w_α(x, s_j) dμ_{s_j}(x)` for every
/// lattice `ξ` and admissible `j`, indexed `[α][j]` per `ξ`.
fn inner_rate_integrals(y_c: &Flow, phi: &PhiTable, mixture: &RateMixture, xis: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
    let g = &y_c.grid;
    let cols: Vec<Column> = (0..g.n_t()).map(|j| Column::new(y_c, phi, j)).collect();
    xis.par_iter()
        .map(|&i| {
            let j0 = g.boundary_time_index(i).unwrap_or(0);
            let mut out = vec![vec![0.0; g.n_t()]; phi.len()];
            for j in j0..g.n_t() {
                let segs = inner_segments(g, y_c.get(i, j), y_c.get(g.i0, j));
                let s = g.t[j];
                for (a, w) in mixture.rates.iter().enumerate() {
                    out[a][j] = against_measure(&cols[j], a, &segs, |x| w.value(x, s))?;
                }
            }
            Ok(out)
        })
        .collect()
}

fn lattice_xis(lattice: &[(usize, usize)]) -> Vec<usize> {
    let mut xis: Vec<usize> = lattice.iter().map(|p| p.0).collect();
    xis.dedup();
    xis
}

/// `max |y_C(γ,t) − y₀ − ∫_{t₀}^t Σ_α ∫_{y_C(γ,s)}^1 w_α(x,s) dμ_s ds|` over the lattice.
pub fn residual_velocity(y_c: &Flow, phi: &PhiTable, mixture: &RateMixture) -> Result<f64> {
    let g = &y_c.grid;
    let lattice = residual_lattice(g);
    let xis = lattice_xis(&lattice);
    let inner = inner_rate_integrals(y_c, phi, mixture, &xis)?;
    let mut worst: f64 = 0.0;
    for &(i, j) in &lattice {
        let k = xis.binary_search(&i).expect("lattice xi");
        let j0 = g.boundary_time_index(i).unwrap_or(0);
        let sum: Vec<f64> = (j0..=j).map(|s| inner[k].iter().map(|v| v[s]).sum()).collect();
        let rhs = g.xi[i].max(0.0) + trapezoid_uniform(g.h, &sum);
        worst = worst.max((y_c.get(i, j) - rhs).abs());
    }
    Ok(worst)
}

/// Per component: `max |φ_α(γ,t) − φ_α(γ,t₀) + ∫_{t₀}^t ∫_{y_C(γ,s)}^1 w_α dμ_s ds|`.
pub fn residual_evolution(y_c: &Flow, phi: &PhiTable, mixture: &RateMixture) -> Result<Vec<f64>> {
    let g = &y_c.grid;
    let lattice = residual_lattice(g);
    let xis = lattice_xis(&lattice);
    let inner = inner_rate_integrals(y_c, phi, mixture, &xis)?;
    let mut worst = vec![0.0f64; phi.len()];
    for &(i, j) in &lattice {
        let k = xis.binary_search(&i).expect("lattice xi");
        let j0 = g.boundary_time_index(i).unwrap_or(0);
        for (a, wa) in worst.iter_mut().enumerate() {
            let p = &phi.components[a];
            let flux = trapezoid_uniform(g.h, &inner[k][a][j0..=j]);
            *wa = wa.max((p.get(i, j) - p.get(i, j0) + flux).abs());
        }
    }
    Ok(worst)
}

/// Per component: `max |V_α(y_C(γ,t), t) − e^{−Ω̃(t₀,t)} V_α(y₀, t₀) − ∫_{t₀}^t e^{−Ω̃(s,t)} J_α(s) ds|`
/// with `Ω̃(s,t) = ∫_s^t w_α(1,u) du` and
/// `J_α(s) = ∫_{y_C(γ,s)}^1 ∂_y w_α(x,s) μ_s([y_C(γ,s), x)) dx`.
pub fn residual_uniqueness_form(y_c: &Flow, phi: &PhiTable, mixture: &RateMixture) -> Result<Vec<f64>> {
    let g = &y_c.grid;
    let lattice = residual_lattice(g);
    let xis = lattice_xis(&lattice);
    let cols: Vec<Column> = (0..g.n_t()).map(|j| Column::new(y_c, phi, j)).collect();
    // J[xi][α][s]
    let big_j: Vec<Vec<Vec<f64>>> = xis
        .par_iter()
        .map(|&i| {
            let j0 = g.boundary_time_index(i).unwrap_or(0);
            let mut out = vec![vec![0.0; g.n_t()]; phi.len()];
            for s in j0..g.n_t() {
                let lo = y_c.get(i, s);
                let segs = inner_segments(g, lo, y_c.get(g.i0, s));
                for (a, w) in mixture.rates.iter().enumerate() {
                    let v_lo = cols[s].tail(a, lo)?;
                    let mut total = 0.0;
                    for x in &segs {
                        let f: Vec<f64> = x
                            .iter()
                            .map(|&y| Ok(w.dy(y, g.t[s]) * (v_lo - cols[s].tail(a, y)?)))
                            .collect::<Result<_>>()?;
                        total += trapezoid(x, &f);
                    }
                    out[a][s] = total;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut worst = vec![0.0f64; phi.len()];
    for &(i, j) in &lattice {
        let k = xis.binary_search(&i).expect("lattice xi");
        let j0 = g.boundary_time_index(i).unwrap_or(0);
        for (a, wa) in worst.iter_mut().enumerate() {
            let w = &mixture.rates[a];
            let decay = |s: usize| (-w.time_integral(1.0, g.t[s], g.t[j])).exp();
            let p = &phi.components[a];
            let integrand: Vec<f64> = (j0..=j).map(|s| decay(s) * big_j[k][a][s]).collect();
            let rhs = decay(j0) * p.get(i, j0) + trapezoid_uniform(g.h, &integrand);
            *wa = wa.max((p.get(i, j) - rhs).abs());
        }
    }
    Ok(worst)
}

/// Outcome of the Lipschitz test.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub test_functions: usize,
    /// `max (|Σ h_α ΔV_α| − |Δy| − M_W e^{2 C_W T} |Δt|)` over all samples.
    pub worst_excess: f64,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.worst_excess <= LIPSCHITZ_SLACK
    }
}

/// Test functions `h = 1_S` for every non-empty component subset `S`. The
/// sign is irrelevant since the inequality bounds an absolute value.
pub fn subset_indicators(m: usize) -> Vec<Vec<f64>> {
    (1..1usize << m).map(|bits| (0..m).map(|a| ((bits >> a) & 1) as f64).collect()).collect()
}

/// Samples `n_pairs` node pairs `((y,t), (y′,t′))` and checks every subset
/// indicator against `|Δy| + M_W e^{2 C_W T} |Δt|`.
pub fn check_lipschitz(slices: &[MeasureSlice], mixture: &RateMixture, n_pairs: usize, seed: u64) -> LipschitzReport {
    let slope = mixture.m_w * (2.0 * mixture.c_w * mixture.horizon).exp();
    check_lipschitz_with(slices, &subset_indicators(mixture.len()), slope, n_pairs, seed)
}

/// Largest `|Σ h_α ΔV_α| − |Δy| − slope·|Δt|` over sampled node pairs and
/// the given test functions.
pub fn check_lipschitz_with(slices: &[MeasureSlice], hs: &[Vec<f64>], slope: f64, n_pairs: usize, seed: u64) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny = slices[0].y.len();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let (s1, s2) = (&slices[rng.random_range(0..slices.len())], &slices[rng.random_range(0..slices.len())]);
        let (m1, m2) = (rng.random_range(0..ny), rng.random_range(0..ny));
        let bound = (s1.y[m1] - s2.y[m2]).abs() + slope * (s1.t - s2.t).abs();
        for h in hs {
            let diff: f64 = h.iter().enumerate().map(|(a, ha)| ha * (s1.v[a][m1] - s2.v[a][m2])).sum();
            worst = worst.max(diff.abs() - bound);
        }
    }
    LipschitzReport { pairs: n_pairs, test_functions: hs.len(), worst_excess: worst }
}

/// `y_C(γ, t)` for rates that do not depend on `y`:
/// `1 − Σ_β U_β(γ) exp(−∫_{t₀}^t w_β)`, with `U_β((y₀,0)) = r_β ∫_{y₀}^1 σ_β`
/// and `U_β((0,t₀)) = r_β`.
pub fn closed_form_oracle(scenario: &Scenario, xi: f64, t: f64) -> Result<f64> {
    let mix = &scenario.mixture;
    if !mix.is_spatially_independent() {
        return Err(Error::Precondition("closed form needs rates that do not depend on y".into()));
    }
    let t0 = (-xi).max(0.0);
    if t < t0 || t > mix.horizon + 1e-12 || xi > 1.0 || xi < -mix.horizon - 1e-12 {
        return Err(Error::Domain(format!("(xi, t) = ({xi}, {t}) is not admissible")));
    }
    let y0 = xi.max(0.0);
    let mass: f64 = mix
        .rates
        .iter()
        .zip(&mix.weights)
        .zip(&scenario.density.sigmas)
        .map(|((w, r), sigma)| {
            let u = if xi >= 0.0 { r * sigma.integral(y0, 1.0) } else { *r };
            u * (-w.time_integral(0.0, t0, t)).exp()
        })
        .sum();
    Ok(1.0 - mass)
}

/// `max |y_C − closed_form_oracle|` over admissible nodes.
pub fn oracle_error(y_c: &Flow, scenario: &Scenario) -> Result<f64> {
    let g = &y_c.grid;
    let mut worst: f64 = 0.0;
    for i in 0..g.n_xi() {
        for j in 0..g.n_t() {
            if g.is_admissible(i, j) {
                worst = worst.max((y_c.get(i, j) - closed_form_oracle(scenario, g.xi[i], g.t[j])?).abs());
            }
        }
    }
    Ok(worst)
}

/// Residual maxima and invariant checks of a converged solution.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub checks: Vec<Check>,
    pub residual_velocity: f64,
    pub residual_evolution: Vec<f64>,
    pub residual_uniqueness: Vec<f64>,
    pub lipschitz: LipschitzReport,
}

impl SolutionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Number of Lipschitz sample pairs.
pub const LIPSCHITZ_PAIRS: usize = 10_000;

/// Hard invariants (which decide the exit status) and residual diagnostics.
/// Residual maxima are reported but not thresholded here since their size
/// depends on the grid.
pub fn verify(fp: &FixedPoint, scenario: &Scenario, slices: &[MeasureSlice], seed: u64) -> Result<SolutionReport> {
    let mix = &scenario.mixture;
    let phi = PhiTable::from_fixed_point(fp, scenario);
    let mut checks = phi.checks(scenario);
    checks.push(Check::new("solidity", solidity_violation(slices), MEASURE_TOL));
    checks.push(Check::new("conservation", conservation_violation(slices, &mix.weights), MEASURE_TOL));
    checks.push(Check::new("coordinate_consistency", coordinate_consistency(&fp.y_c, &phi), CONSISTENCY_TOL));
    checks.push(Check::new("finite_evaporation", finite_evaporation_violation(&fp.y_c, mix).max(0.0), 0.0));
    let lipschitz = check_lipschitz(slices, mix, LIPSCHITZ_PAIRS, seed);
    checks.push(Check::new("lipschitz", lipschitz.worst_excess.max(0.0), LIPSCHITZ_SLACK));
    checks.push(Check::new("fixed_point_residual", fp.residual, 2.0 * fp.diagnostics.tol));
    Ok(SolutionReport {
        residual_velocity: residual_velocity(&fp.y_c, &phi, mix)?,
        residual_evolution: residual_evolution(&fp.y_c, &phi, mix)?,
        residual_uniqueness: residual_uniqueness_form(&fp.y_c, &phi, mix)?,
        checks,
        lipschitz,
    })
}
