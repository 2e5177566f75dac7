//! The `(ξ, t)` mesh and discretized flows.
//!
//! A point `γ` of the initial/boundary set is stored as one coordinate
//! `ξ ∈ [−T, 1]`: the boundary point `(0, t₀)` is `ξ = −t₀` and the initial
//! point `(z, 0)` is `ξ = z`. The order on `Γ` becomes `γ ⪰ γ′ ⟺ ξ ≤ ξ′` and
//! `(γ, t)` is admissible iff `t ≥ max(0, −ξ)`.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::trapezoid;

/// Slack for the monotonicity checks on adjacent nodes.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub n_t: usize,
    pub n_z: usize,
    pub n_b: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, n_t: usize, n_z: usize) -> Self {
        GridSpec { horizon, n_t, n_z, n_b: n_t }
    }

    /// The grid with every step halved.
    pub fn refined(&self) -> Self {
        GridSpec {
            horizon: self.horizon,
            n_t: 2 * self.n_t - 1,
            n_z: 2 * self.n_z - 1,
            n_b: 2 * self.n_b - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub horizon: f64,
    /// Uniform time step.
    pub h: f64,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// Sorted `ξ` nodes: boundary nodes `−t_{n_b−1} … −t_1`, then `0 = z_0 … z_{n_z−1} = 1`.
    pub xi: Vec<f64>,
    /// Index of `ξ = 0`.
    pub i0: usize,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        if spec.n_t < 2 || spec.n_z < 2 {
            return Err(Error::Grid(format!("need n_t >= 2 and n_z >= 2, got {} and {}", spec.n_t, spec.n_z)));
        }
        if spec.n_b != spec.n_t {
            return Err(Error::Grid(format!(
                "boundary nodes must coincide with time nodes (n_b = n_t), got n_b = {} and n_t = {}",
                spec.n_b, spec.n_t
            )));
        }
        if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
            return Err(Error::Grid(format!("horizon must be positive, got {}", spec.horizon)));
        }
        let nt = spec.n_t;
        let t: Vec<f64> = (0..nt).map(|j| spec.horizon * j as f64 / (nt - 1) as f64).collect();
        let z: Vec<f64> = (0..spec.n_z).map(|m| m as f64 / (spec.n_z - 1) as f64).collect();
        let mut xi: Vec<f64> = (1..nt).rev().map(|v| -t[v]).collect();
        let i0 = xi.len();
        xi.extend(z.iter().copied());
        Ok(Arc::new(Grid { spec, horizon: spec.horizon, h: t[1] - t[0], t, z, xi, i0 }))
    }

    pub fn n_t(&self) -> usize {
        self.t.len()
    }

    pub fn n_z(&self) -> usize {
        self.z.len()
    }

    pub fn n_xi(&self) -> usize {
        self.xi.len()
    }

    /// `ξ` index of the boundary point `(0, t_v)`.
    pub fn boundary_index(&self, v: usize) -> usize {
        self.i0 - v
    }

    /// `ξ` index of the initial point `(z_m, 0)`.
    pub fn initial_index(&self, m: usize) -> usize {
        self.i0 + m
    }

    /// Time index `v` of a boundary node (`ξ_i = −t_v`), `None` on the initial segment.
    pub fn boundary_time_index(&self, i: usize) -> Option<usize> {
        (i <= self.i0).then(|| self.i0 - i)
    }

    /// Smallest admissible `ξ` index at time index `j`.
    pub fn first_admissible(&self, j: usize) -> usize {
        self.i0 - j
    }

    pub fn is_admissible(&self, i: usize, j: usize) -> bool {
        i + j >= self.i0
    }

    /// Node index of a time that lies on the grid.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let j = (t / self.h).round();
        if j < 0.0 || j as usize >= self.n_t() || (self.t[j as usize] - t).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::Domain(format!("time {t} is not a grid node")));
        }
        Ok(j as usize)
    }

    /// Node index of a `z` on the initial grid.
    pub fn z_index(&self, z: f64) -> Result<usize> {
        let hz = self.z[1];
        let m = (z / hz).round();
        if m < 0.0 || m as usize >= self.n_z() || (self.z[m as usize] - z).abs() > 1e-9 {
            return Err(Error::Domain(format!("z = {z} is not a grid node")));
        }
        Ok(m as usize)
    }
}

/// Cell index and fractional offset of `x` in sorted `nodes`. Exact nodes give
/// offset zero so node values are reproduced bit for bit.
fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    let k = nodes.partition_point(|v| *v <= x).clamp(1, n - 1) - 1;
    if x == nodes[k] {
        return (k, 0.0);
    }
    (k, ((x - nodes[k]) / (nodes[k + 1] - nodes[k])).clamp(0.0, 1.0))
}

/// A discretized flow `θ ∈ Θ_T`: values on `ξ` nodes × `t` nodes. Entries with
/// `t_j < −ξ_i` lie outside `Δ_T` and hold zero, which is also the value on the
/// moving corner `θ(−t, t) = 0`; this keeps bilinear interpolation monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Flow {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Flow { grid: grid.clone(), values: vec![0.0; grid.n_xi() * grid.n_t()] }
    }

    /// Samples `f(ξ, t)` at admissible nodes.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &Arc<Grid>, f: F) -> Self {
        let mut flow = Flow::zeros(grid);
        for i in 0..grid.n_xi() {
            for j in 0..grid.n_t() {
                if grid.is_admissible(i, j) {
                    flow.set(i, j, f(grid.xi[i], grid.t[j]));
                }
            }
        }
        flow
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_t() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nt = self.grid.n_t();
        self.values[i * nt + j] = v;
    }

    /// Piecewise-linear interpolation in `ξ` and `t`.
    pub fn eval(&self, xi: f64, t: f64) -> f64 {
        let g = &self.grid;
        let (i, fx) = locate(&g.xi, xi.clamp(-g.horizon, 1.0));
        let (j, ft) = locate(&g.t, t.clamp(0.0, g.horizon));
        let v00 = self.get(i, j);
        let v01 = self.get(i, j + 1);
        let v10 = self.get(i + 1, j);
        let v11 = self.get(i + 1, j + 1);
        let a = if ft == 0.0 { v00 } else { v00 + ft * (v01 - v00) };
        let b = if ft == 0.0 { v10 } else { v10 + ft * (v11 - v10) };
        if fx == 0.0 {
            a
        } else {
            a + fx * (b - a)
        }
    }

    /// Maximum violation of each flow invariant.
    pub fn invariants(&self) -> FlowInvariants {
        let g = &self.grid;
        let nt = g.n_t();
        let mut rep = FlowInvariants::default();
        for i in 0..g.n_xi() {
            for j in 0..nt {
                if !g.is_admissible(i, j) {
                    continue;
                }
                let v = self.get(i, j);
                rep.range = rep.range.max((-v).max(v - 1.0).max(0.0));
                if i + 1 < g.n_xi() {
                    rep.monotone_xi = rep.monotone_xi.max(v - self.get(i + 1, j));
                }
                if j + 1 < nt {
                    rep.monotone_t = rep.monotone_t.max(v - self.get(i, j + 1));
                }
            }
            let j_start = g.boundary_time_index(i).unwrap_or(0);
            let start = g.xi[i].max(0.0);
            rep.initial_condition = rep.initial_condition.max((self.get(i, j_start) - start).abs());
        }
        for j in 0..nt {
            rep.upper_edge = rep.upper_edge.max((self.get(g.n_xi() - 1, j) - 1.0).abs());
            rep.corner = rep.corner.max(self.get(g.first_admissible(j), j).abs());
        }
        rep
    }

    /// Fails if any invariant is violated by more than `slack`.
    pub fn ensure_invariants(&self, slack: f64) -> Result<()> {
        let rep = self.invariants();
        match rep.worst() {
            (name, mag) if mag > slack => Err(Error::FlowInvariant { what: name.to_string(), magnitude: mag }),
            _ => Ok(()),
        }
    }

    /// CSV with columns `xi,t,<name>` over admissible nodes.
    pub fn write_csv<W: Write>(&self, mut out: W, name: &str) -> io::Result<()> {
        let g = &self.grid;
        writeln!(out, "xi,t,{name}")?;
        for i in 0..g.n_xi() {
            for j in 0..g.n_t() {
                if g.is_admissible(i, j) {
                    writeln!(out, "{},{},{}", fmt17(g.xi[i]), fmt17(g.t[j]), fmt17(self.get(i, j)))?;
                }
            }
        }
        Ok(())
    }
}

/// Worst violations of the flow invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowInvariants {
    /// `|θ(ξ, max(0,−ξ)) − max(0, ξ)|`
    pub initial_condition: f64,
    /// `θ(ξ_i, t) − θ(ξ_{i+1}, t)`
    pub monotone_xi: f64,
    /// `θ(ξ, t_j) − θ(ξ, t_{j+1})`
    pub monotone_t: f64,
    /// `|θ(1, t) − 1|`
    pub upper_edge: f64,
    /// `|θ(−t, t)|`
    pub corner: f64,
    /// distance of values from `[0, 1]`
    pub range: f64,
}

impl FlowInvariants {
    pub fn worst(&self) -> (&'static str, f64) {
        [
            ("initial condition", self.initial_condition),
            ("monotone in xi", self.monotone_xi),
            ("monotone in t", self.monotone_t),
            ("theta(1,t) = 1", self.upper_edge),
            ("theta(-t,t) = 0", self.corner),
            ("range [0,1]", self.range),
        ]
        .into_iter()
        .fold(("none", 0.0), |acc, c| if c.1 > acc.1 { c } else { acc })
    }
}

/// `θ₀(ξ, t) = max(0, ξ)`.
pub fn identity_flow(grid: &Arc<Grid>) -> Flow {
    Flow::from_fn(grid, |xi, _| xi.max(0.0))
}

/// `d(a, b, t_j)`: max over admissible `ξ` nodes of `|a − b|`.
pub fn flow_distance(a: &Flow, b: &Flow, j: usize) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::Grid("flows live on different grids".into()));
    }
    let g = &a.grid;
    if j >= g.n_t() {
        return Err(Error::Domain(format!("time index {j} out of range")));
    }
    Ok((g.first_admissible(j)..g.n_xi()).map(|i| (a.get(i, j) - b.get(i, j)).abs()).fold(0.0, f64::max))
}

/// `max_j d(a, b, t_j)`.
pub fn sup_distance(a: &Flow, b: &Flow) -> Result<f64> {
    (0..a.grid.n_t()).try_fold(0.0f64, |acc, j| Ok(acc.max(flow_distance(a, b, j)?)))
}

/// `∫ f(γ′) dγ′` over `{γ′ ∈ Γ_t : γ_upper ⪰ γ′}`, i.e. over `ξ′ ∈ [ξ_upper, 1]`,
/// by the trapezoid rule on the `ξ` nodes.
pub fn gamma_line_integral<F: Fn(f64) -> f64>(grid: &Grid, f: F, xi_upper: f64, t: f64) -> Result<f64> {
    if t < -xi_upper - 1e-12 || xi_upper > 1.0 || t > grid.horizon + 1e-12 {
        return Err(Error::Domain(format!("(xi, t) = ({xi_upper}, {t}) is not admissible")));
    }
    let mut x = vec![xi_upper];
    x.extend(grid.xi.iter().copied().filter(|v| *v > xi_upper));
    let y: Vec<f64> = x.iter().map(|v| f(*v)).collect();
    Ok(trapezoid(&x, &y))
}

/// Seventeen significant digits, round-trippable.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nt: usize, nz: usize) -> Arc<Grid> {
        Grid::new(GridSpec::new(1.0, nt, nz)).unwrap()
    }

    #[test]
    fn identity_flow_examples() {
        let g = grid(11, 11);
        let th = identity_flow(&g);
        assert_eq!(th.eval(0.4, 0.3), 0.4);
        assert_eq!(th.eval(-0.5, 0.7), 0.0);
        assert_eq!(th.eval(1.0, 1.0), 1.0);
        assert_eq!(th.invariants(), FlowInvariants::default());
    }

    #[test]
    fn layout() {
        let g = grid(5, 3);
        assert_eq!(g.xi, vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.5, 1.0]);
        assert_eq!(g.i0, 4);
        assert_eq!(g.boundary_index(3), 1);
        assert!(g.is_admissible(1, 3) && !g.is_admissible(1, 2));
        assert!(Grid::new(GridSpec { horizon: 1.0, n_t: 5, n_z: 3, n_b: 4 }).is_err());
        assert!(Grid::new(GridSpec::new(1.0, 1, 3)).is_err());
    }

    #[test]
    fn distance_examples() {
        let g = grid(9, 9);
        let a = identity_flow(&g);
        assert_eq!(flow_distance(&a, &a, 8).unwrap(), 0.0);
        let b = Flow::from_fn(&g, |xi, _| (xi.max(0.0) + 0.1).min(1.0));
        let d = flow_distance(&a, &b, 8).unwrap();
        assert!((d - 0.1).abs() < 1e-12);
        let other = identity_flow(&grid(5, 5));
        assert!(flow_distance(&a, &other, 0).is_err());
    }

    #[test]
    fn line_integral_examples() {
        let g = grid(17, 17);
        let one = |_: f64| 1.0;
        assert!((gamma_line_integral(&g, one, -0.25, 0.5).unwrap() - 1.25).abs() < 1e-14);
        assert!((gamma_line_integral(&g, one, 0.3, 0.5).unwrap() - 0.7).abs() < 1e-14);
        assert_eq!(gamma_line_integral(&g, |_| 0.0, -0.5, 0.5).unwrap(), 0.0);
        assert!(gamma_line_integral(&g, one, -0.5, 0.25).is_err());
    }
}
