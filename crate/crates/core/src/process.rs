//! Point process with last-arrival-time dependent intensity.
//!
//! Given a flow `θ`, a rate `w` and a start position `z`, arrivals occur at
//! intensity `ω(τ_{k−1}, t)` where `τ_{k−1}` is the previous arrival time:
//! `ω(0, t) = w(θ((z,0), t), t)` before the first arrival and
//! `ω(s, t) = w(θ((0,s), t), t)` afterwards.
//!
//! # Discretization
//!
//! Arrival times are tracked per time cell `(t_{c−1}, t_c]`. The state after
//! node `t_j` is either "no arrival yet" (probability `S0(t_j) = e^{−Ω(0,t_j)}`)
//! or "last arrival in cell `c`", whose survival to a later node uses the
//! intensity seen from the cell midpoint. Survival exponents are trapezoid sums
//! of `ω` over nodes. Mass leaving a state during a cell moves to "last arrival
//! in this cell", so probability is conserved exactly and the sum rule holds
//! to roundoff for every flow. Counts inside a cell follow the exact law for an
//! entering intensity `μ` and a post-arrival intensity `λ` that are constant
//! over the cell, which makes constant rates reproduce the Poisson law exactly.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{fmt17, Flow, Grid};
use crate::model::RateFunction;
use crate::quad::{cumulative_trapezoid_uniform, trapezoid_uniform};

/// Bound on the truncated count tail used to pick `K_max`.
pub const TAIL_TOL: f64 = 1e-10;

/// Smallest `K ≥ 1` with `x^{K+1}/(K+1)! ≤ tol`, where `x = (‖w‖ + C_W) T`.
pub fn k_max_for(x: f64, tol: f64) -> usize {
    (1..400).find(|k| tail_bound(x, *k) <= tol).unwrap_or(400)
}

/// `x^{K+1}/(K+1)!`, an upper bound for `P(N(T) > K)`.
pub fn tail_bound(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let m = (k + 1) as f64;
    (m * x.ln() - ln_factorial(k + 1)).exp()
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Law of the number of arrivals inside one cell for an entering intensity with
/// integral `a = μh` and a post-arrival intensity with integral `l = λh`:
/// `P(n) = a e^{−a} l^{n−1}/(n−1)! Σ_i (a−l)^i / (i! (n+i))` for `n ≥ 1`.
/// Entry 0 is `e^{−a}`.
pub fn cell_counts(a: f64, l: f64, k_max: usize) -> Vec<f64> {
    let mut p = vec![0.0; k_max + 1];
    let decay = (-a).exp();
    p[0] = decay;
    if a <= 0.0 {
        return p;
    }
    let x = a - l;
    let mut pref = a * decay;
    for (n, slot) in p.iter_mut().enumerate().skip(1) {
        if pref == 0.0 {
            break;
        }
        let nf = n as f64;
        let mut coef = 1.0;
        let mut sum = 1.0 / nf;
        for i in 1..600 {
            coef *= x / i as f64;
            let term = coef / (nf + i as f64);
            sum += term;
            if coef.abs() < 1e-18 * sum.abs().max(1e-300) && i as f64 > x.abs() {
                break;
            }
        }
        *slot = pref * sum;
        pref *= l / nf;
    }
    p
}

/// Survival factors and within-cell intensities of `N_{θ,w,·}` for one flow and
/// one rate. Everything that does not depend on the start position `z` is
/// computed once and shared by all start positions.
#[derive(Debug, Clone)]
pub struct ArrivalKernel {
    pub grid: Arc<Grid>,
    pub rate: RateFunction,
    pub k_max: usize,
    /// `θ((z_m, 0), t_j)`, row-major over `(m, j)`.
    theta_init: Vec<f64>,
    /// Log-survival `L[c][j] = −Σ trapezoid of ω(m_c, ·)` over `[t_c, t_j]`,
    /// `m_c` the midpoint of cell `c`, for `1 ≤ c ≤ j`.
    log_surv: Vec<f64>,
    surv: Vec<f64>,
    /// `ω(t_v, t_j)` on nodes, `v ≤ j` (`v = 0` is the limit `s → 0+`).
    omega_nodes: Vec<f64>,
    /// Post-arrival intensity inside cell `j`.
    lambda: Vec<f64>,
}

impl ArrivalKernel {
    pub fn build(theta: &Flow, w: &RateFunction, k_max: usize) -> Self {
        let grid = theta.grid.clone();
        let n = grid.n_t();
        let h = grid.h;
        let bnd = |v: usize, j: usize| theta.get(grid.boundary_index(v), j);

        let mut omega_nodes = vec![0.0; n * n];
        for v in 0..n {
            for j in v..n {
                omega_nodes[v * n + j] = w.value(bnd(v, j), grid.t[j]);
            }
        }
        let mut log_surv = vec![0.0; n * n];
        let mut surv = vec![0.0; n * n];
        let mut om = vec![0.0; n];
        for c in 1..n {
            for j in c..n {
                let y = 0.5 * (bnd(c - 1, j) + bnd(c, j));
                om[j] = w.value(y, grid.t[j]);
            }
            surv[c * n + c] = 1.0;
            for j in c + 1..n {
                log_surv[c * n + j] = log_surv[c * n + j - 1] - 0.5 * h * (om[j - 1] + om[j]);
                surv[c * n + j] = log_surv[c * n + j].exp();
            }
        }
        let mut lambda = vec![0.0; n];
        for j in 1..n {
            lambda[j] = 0.5 * (omega_nodes[(j - 1) * n + j - 1] + omega_nodes[j * n + j]);
        }
        let mut theta_init = vec![0.0; grid.n_z() * n];
        for m in 0..grid.n_z() {
            for j in 0..n {
                theta_init[m * n + j] = theta.get(grid.initial_index(m), j);
            }
        }
        ArrivalKernel {
            grid,
            rate: w.clone(),
            k_max,
            theta_init,
            log_surv,
            surv,
            omega_nodes,
            lambda,
        }
    }

    pub fn n_t(&self) -> usize {
        self.grid.n_t()
    }

    /// `S[c][j]`: survival from cell `c` to node `j ≥ c`.
    #[inline]
    pub fn survival(&self, c: usize, j: usize) -> f64 {
        self.surv[c * self.n_t() + j]
    }

    /// `Ω` from cell `c` to node `j`.
    pub fn big_omega(&self, c: usize, j: usize) -> f64 {
        -self.log_surv[c * self.n_t() + j]
    }

    /// `K[c][j]`: mass per unit time moving from "last arrival in cell `c`" to
    /// "last arrival in cell `j`", `j > c`.
    pub fn transfer(&self, c: usize, j: usize) -> f64 {
        (self.survival(c, j - 1) - self.survival(c, j)) / self.grid.h
    }

    /// `ω(t_v, t_j)` for `v ≤ j`.
    pub fn omega(&self, v: usize, j: usize) -> f64 {
        self.omega_nodes[v * self.n_t() + j]
    }

    /// Post-arrival intensity inside cell `j`.
    pub fn cell_lambda(&self, j: usize) -> f64 {
        self.lambda[j]
    }

    /// `θ((z, 0), t_j)` by linear interpolation between initial nodes.
    pub fn theta_at(&self, z: f64, j: usize) -> f64 {
        let n = self.n_t();
        let nz = self.grid.n_z();
        let pos = (z.clamp(0.0, 1.0) * (nz - 1) as f64).min((nz - 1) as f64);
        let m = (pos.floor() as usize).min(nz - 2);
        let f = pos - m as f64;
        let a = self.theta_init[m * n + j];
        if f == 0.0 {
            return a;
        }
        a + f * (self.theta_init[(m + 1) * n + j] - a)
    }

    /// `ω(0, t_j)` for start position `z`.
    pub fn omega0(&self, z: f64) -> Vec<f64> {
        (0..self.n_t()).map(|j| self.rate.value(self.theta_at(z, j), self.grid.t[j])).collect()
    }

    /// Start-position dependent part: `Ω(0, ·)`, `S0` and last-arrival masses.
    pub fn path(&self, z: f64) -> ArrivalPath {
        self.path_from_omega0(&self.omega0(z))
    }

    pub(crate) fn path_from_omega0(&self, omega0: &[f64]) -> ArrivalPath {
        let n = self.n_t();
        let big_omega0 = cumulative_trapezoid_uniform(self.grid.h, omega0);
        let s0: Vec<f64> = big_omega0.iter().map(|o| (-o).exp()).collect();
        let mut last = vec![0.0; n];
        for c in 1..n {
            let mut acc = s0[c - 1] - s0[c];
            for (cp, lm) in last.iter().enumerate().take(c).skip(1) {
                acc += lm * (self.surv[cp * n + c - 1] - self.surv[cp * n + c]);
            }
            last[c] = acc;
        }
        ArrivalPath { big_omega0, s0, last }
    }

    /// Per-count last-arrival masses for start position `z`.
    pub fn densities(&self, z: f64) -> ArrivalDensities {
        let path = self.path(z);
        self.densities_for(&path)
    }

    fn densities_for(&self, path: &ArrivalPath) -> ArrivalDensities {
        let n = self.n_t();
        let kk = self.k_max;
        let h = self.grid.h;
        let mut per_count = vec![vec![0.0; n]; kk + 1];
        for j in 1..n {
            let l = self.lambda[j] * h;
            let a0 = path.big_omega0[j] - path.big_omega0[j - 1];
            let p0 = cell_counts(a0, l, kk);
            for k in 1..=kk {
                per_count[k][j] += path.s0[j - 1] * p0[k];
            }
            for c in 1..j {
                let prev = self.surv[c * n + j - 1];
                if prev == 0.0 {
                    continue;
                }
                let a = self.log_surv[c * n + j - 1] - self.log_surv[c * n + j];
                let pc = cell_counts(a, l, kk);
                for k1 in 1..kk {
                    let src = per_count[k1][c] * prev;
                    if src == 0.0 {
                        continue;
                    }
                    for m in 1..=kk - k1 {
                        per_count[k1 + m][j] += src * pc[m];
                    }
                }
            }
        }
        ArrivalDensities { first: (0..n).map(|c| if c == 0 { 0.0 } else { path.s0[c - 1] - path.s0[c] }).collect(), per_count, total: path.last.clone() }
    }

    /// Worst violations of the kernel invariants: `Ω` non-decreasing in `t`,
    /// `0 < S ≤ 1`, `K ≥ 0`.
    pub fn invariant_violation(&self) -> f64 {
        let n = self.n_t();
        let mut worst: f64 = 0.0;
        for c in 1..n {
            for j in c..n {
                let s = self.survival(c, j);
                worst = worst.max(s - 1.0).max(if s > 0.0 { 0.0 } else { 1.0 });
                if j > c {
                    worst = worst.max(self.big_omega(c, j - 1) - self.big_omega(c, j));
                    worst = worst.max(-self.transfer(c, j));
                }
            }
        }
        worst
    }

    /// Largest `S[c][j] − exp(−Ω̃(t_c, t_j) + C_W (t_j − t_c))`, where
    /// `Ω̃(s,t) = ∫_s^t w(1,u) du` by the same trapezoid sums.
    pub fn omega_tilde_excess(&self, c_w: f64) -> f64 {
        let n = self.n_t();
        let g = &self.grid;
        let w1: Vec<f64> = g.t.iter().map(|t| self.rate.value(1.0, *t)).collect();
        let cum = cumulative_trapezoid_uniform(g.h, &w1);
        let mut worst = f64::NEG_INFINITY;
        for c in 1..n {
            for j in c..n {
                let bound = (-(cum[j] - cum[c]) + c_w * (g.t[j] - g.t[c])).exp();
                worst = worst.max(self.survival(c, j) - bound);
            }
        }
        worst
    }
}

/// Start-position dependent quantities for one `z`.
#[derive(Debug, Clone)]
pub struct ArrivalPath {
    /// `Ω(0, t_j)`.
    pub big_omega0: Vec<f64>,
    /// `S0(t_j) = P(N(t_j) = 0)`.
    pub s0: Vec<f64>,
    /// `last[c] = P(at least one arrival in cell c, none in (t_c, ...])` at `t_c`,
    /// i.e. the probability that the last arrival up to `t_c` lies in cell `c`.
    pub last: Vec<f64>,
}

impl ArrivalPath {
    /// `P(N(t_b) = N(t_a))` for `a ≤ b`, summed over counts.
    pub fn no_arrival(&self, kernel: &ArrivalKernel, a: usize, b: usize) -> f64 {
        self.s0[b] + (1..=a).map(|c| self.last[c] * kernel.survival(c, b)).sum::<f64>()
    }

    /// `P(N(t_b) = N(t_a))` for all `a ≤ b` at once.
    pub fn no_arrival_column(&self, kernel: &ArrivalKernel, b: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(b + 1);
        let mut acc = self.s0[b];
        out.push(acc);
        for c in 1..=b {
            acc += self.last[c] * kernel.survival(c, b);
            out.push(acc);
        }
        out
    }
}

/// Cell masses of the arrival process for one start position.
#[derive(Debug, Clone)]
pub struct ArrivalDensities {
    /// `first[c] = P(τ_1 ∈ cell c)`.
    pub first: Vec<f64>,
    /// `per_count[k][c] = P(N(t_c) = k, last arrival in cell c)`, `k = 1..=K_max`.
    pub per_count: Vec<Vec<f64>>,
    /// Sum over all counts, computed without truncation.
    pub total: Vec<f64>,
}

impl ArrivalDensities {
    /// `P(N(t_b) = N(t_a) = k)` for `k ≥ 1`.
    pub fn count_no_arrival(&self, kernel: &ArrivalKernel, k: usize, a: usize, b: usize) -> f64 {
        (1..=a).map(|c| self.per_count[k][c] * kernel.survival(c, b)).sum()
    }
}

/// Answer of [`prob_no_arrival`].
#[derive(Debug, Clone)]
pub struct NoArrival {
    /// `p_k = P(N(t) = N(s) = k)` for `k = 0..=K_max`.
    pub per_count: Vec<f64>,
    /// `Σ_k p_k`.
    pub total: f64,
    /// The same probability from the untruncated last-arrival masses.
    pub total_summed: f64,
    /// `|total − total_summed|`.
    pub consistency: f64,
}

/// `P(N(t) = N(s) = k)` for `k ≤ K_max` and the total, at grid times `s ≤ t`.
pub fn prob_no_arrival(kernel: &ArrivalKernel, z: f64, s: f64, t: f64) -> Result<NoArrival> {
    let g = &kernel.grid;
    let a = g.time_index(s)?;
    let b = g.time_index(t)?;
    if a > b {
        return Err(Error::Precondition(format!("need s <= t, got s = {s}, t = {t}")));
    }
    let path = kernel.path(z);
    let dens = kernel.densities_for(&path);
    let mut per_count = vec![path.s0[b]];
    per_count.extend((1..=kernel.k_max).map(|k| dens.count_no_arrival(kernel, k, a, b)));
    let total: f64 = per_count.iter().sum();
    let total_summed = path.no_arrival(kernel, a, b);
    let consistency = (total - total_summed).abs();
    if consistency > 1e3 * TAIL_TOL {
        return Err(Error::Precondition(format!(
            "K_max = {} truncates {consistency:.3e} of the count distribution",
            kernel.k_max
        )));
    }
    Ok(NoArrival { per_count, total, total_summed, consistency })
}

/// `P(N(t) = k)` at a grid time `t`.
pub fn prob_count(kernel: &ArrivalKernel, z: f64, t: f64, k: usize) -> Result<f64> {
    if k > kernel.k_max {
        return Err(Error::Precondition(format!("k = {k} exceeds K_max = {}", kernel.k_max)));
    }
    Ok(prob_no_arrival(kernel, z, t, t)?.per_count[k])
}

/// All `P(N(t_j) = k)` for `k ≤ K_max` and every node `j`: `out[k][j]`.
pub fn count_table(kernel: &ArrivalKernel, z: f64) -> Vec<Vec<f64>> {
    let path = kernel.path(z);
    let dens = kernel.densities_for(&path);
    let n = kernel.n_t();
    let mut out = vec![path.s0.clone()];
    for k in 1..=kernel.k_max {
        out.push((0..n).map(|j| dens.count_no_arrival(kernel, k, j, j)).collect());
    }
    out
}

/// Residual of `∂_t P(N(t)=N(s)=k) = −∫_0^s ω(u,t) ∂_u P(N(t)=N(u)=k) du`
/// with centered differences in `t` and `u` and the trapezoid rule in `u`.
pub fn check_st_dep(kernel: &ArrivalKernel, z: f64, s: f64, t: f64, k: usize) -> Result<f64> {
    let g = &kernel.grid;
    let a = g.time_index(s)?;
    let b = g.time_index(t)?;
    if k == 0 || k > kernel.k_max {
        return Err(Error::Precondition(format!("need 1 <= k <= K_max, got {k}")));
    }
    if a >= b || b + 1 >= g.n_t() || b < 2 {
        return Err(Error::Precondition("need s < t with one node on either side of t".into()));
    }
    let dens = kernel.densities(z);
    let p = |u: usize, tt: usize| dens.count_no_arrival(kernel, k, u, tt);
    let h = g.h;
    let lhs = (p(a, b + 1) - p(a, b - 1)) / (2.0 * h);
    let integrand: Vec<f64> = (0..=a)
        .map(|v| {
            let du = if v == 0 {
                (-3.0 * p(0, b) + 4.0 * p(1, b) - p(2, b)) / (2.0 * h)
            } else {
                (p(v + 1, b) - p(v - 1, b)) / (2.0 * h)
            };
            kernel.omega(v, b) * du
        })
        .collect();
    let rhs = -trapezoid_uniform(h, &integrand);
    Ok((lhs - rhs).abs())
}

/// Debug dump `z,s,t,k,p` of every `P(N(t)=N(s)=k)` at grid nodes `s ≤ t`.
pub fn write_pk_csv<W: Write>(mut out: W, kernel: &ArrivalKernel, zs: &[f64]) -> io::Result<()> {
    let g = &kernel.grid;
    writeln!(out, "z,s,t,k,p")?;
    for &z in zs {
        let path = kernel.path(z);
        let dens = kernel.densities_for(&path);
        for b in 0..g.n_t() {
            for a in 0..=b {
                writeln!(out, "{},{},{},0,{}", fmt17(z), fmt17(g.t[a]), fmt17(g.t[b]), fmt17(path.s0[b]))?;
                for k in 1..=kernel.k_max {
                    let p = dens.count_no_arrival(kernel, k, a, b);
                    writeln!(out, "{},{},{},{k},{}", fmt17(z), fmt17(g.t[a]), fmt17(g.t[b]), fmt17(p))?;
                }
            }
        }
    }
    Ok(())
}
