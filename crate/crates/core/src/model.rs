//! Evaporation-rate mixtures, initial densities and scenario validation.
//!
//! The mixing measure `λ` is a finite set of weighted atoms: component `α`
//! evaporates at rate `w_α(y, t)` and carries weight `r_α`. Its initial volume
//! profile is `r_α σ_α(y) dy`.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Tolerance for the normalization identities (`Σ r = 1`, `∫ σ = 1`, mixing).
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Polynomial with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn antiderivative(&self) -> Poly {
        let mut c = vec![0.0];
        c.extend(self.0.iter().enumerate().map(|(k, a)| a / (k + 1) as f64));
        Poly(c)
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let p = self.antiderivative();
        p.eval(b) - p.eval(a)
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().skip(1).all(|c| *c == 0.0)
    }

    /// Exact range on `[a, b]`: endpoints plus interior roots of the derivative.
    pub fn range(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.eval(a).min(self.eval(b));
        let mut hi = self.eval(a).max(self.eval(b));
        if self.0.len() > 2 {
            for x in self.derivative().roots_in(a, b) {
                let v = self.eval(x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        const SCAN: usize = 2048;
        let mut roots = Vec::new();
        let mut x0 = a;
        let mut f0 = self.eval(a);
        for k in 1..=SCAN {
            let x1 = a + (b - a) * k as f64 / SCAN as f64;
            let f1 = self.eval(x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut l, mut r) = (x0, x1);
                for _ in 0..80 {
                    let m = 0.5 * (l + r);
                    if self.eval(m) * f0 > 0.0 {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                roots.push(0.5 * (l + r));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }
}

/// Tabulated rate on a tensor grid with a companion table for `∂w/∂y`.
/// Both tables are evaluated by bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[iy][it]`
    pub values: Vec<Vec<f64>>,
    /// `dwdy[iy][it]`
    pub dwdy: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(y: Vec<f64>, t: Vec<f64>, values: Vec<Vec<f64>>, dwdy: Vec<Vec<f64>>) -> Result<Self> {
        let sorted = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]);
        if !sorted(&y) || !sorted(&t) {
            return Err(Error::Config("rate table axes must be strictly increasing with at least two nodes".into()));
        }
        for table in [&values, &dwdy] {
            if table.len() != y.len() || table.iter().any(|row| row.len() != t.len()) {
                return Err(Error::Config(format!(
                    "rate table must have {} rows of {} entries",
                    y.len(),
                    t.len()
                )));
            }
        }
        Ok(RateTable { y, t, values, dwdy })
    }

    fn interp(&self, table: &[Vec<f64>], y: f64, t: f64) -> f64 {
        let (iy, fy) = locate(&self.y, y);
        let (it, ft) = locate(&self.t, t);
        let v00 = table[iy][it];
        let v01 = table[iy][it + 1];
        let v10 = table[iy + 1][it];
        let v11 = table[iy + 1][it + 1];
        (1.0 - fy) * ((1.0 - ft) * v00 + ft * v01) + fy * ((1.0 - ft) * v10 + ft * v11)
    }

    fn node_extremes(table: &[Vec<f64>]) -> (f64, f64) {
        table.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
    }
}

/// Cell index and fractional position of `x` in sorted `nodes`, clamped to the table.
fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    let k = nodes.partition_point(|v| *v <= x).clamp(1, n - 1) - 1;
    let f = ((x - nodes[k]) / (nodes[k + 1] - nodes[k])).clamp(0.0, 1.0);
    (k, f)
}

/// Evaporation rate `w(y, t) ≥ 0` on `[0, 1] × [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    Constant(f64),
    /// `a(y) · b(t)`
    Separable { a: Poly, b: Poly },
    /// `(c0 + c1 y) · τ(t)`
    AffineInY { c0: f64, c1: f64, time: Poly },
    Tabulated(RateTable),
}

impl RateFunction {
    #[inline]
    pub fn value(&self, y: f64, t: f64) -> f64 {
        match self {
            RateFunction::Constant(c) => *c,
            RateFunction::Separable { a, b } => a.eval(y) * b.eval(t),
            RateFunction::AffineInY { c0, c1, time } => (c0 + c1 * y) * time.eval(t),
            RateFunction::Tabulated(tab) => tab.interp(&tab.values, y, t),
        }
    }

    /// `∂w/∂y`; the tabulated kind reads its companion table.
    pub fn dy(&self, y: f64, t: f64) -> f64 {
        match self {
            RateFunction::Constant(_) => 0.0,
            RateFunction::Separable { a, b } => a.derivative().eval(y) * b.eval(t),
            RateFunction::AffineInY { c1, time, .. } => c1 * time.eval(t),
            RateFunction::Tabulated(tab) => tab.interp(&tab.dwdy, y, t),
        }
    }

    /// `(inf w, sup w)` over `[0, 1] × [0, T]`. Exact for parametric kinds; over
    /// the table nodes for the tabulated kind (exact for its bilinear interpolant).
    pub fn range(&self, horizon: f64) -> (f64, f64) {
        match self {
            RateFunction::Constant(c) => (*c, *c),
            RateFunction::Separable { a, b } => interval_product(a.range(0.0, 1.0), b.range(0.0, horizon)),
            RateFunction::AffineInY { c0, c1, time } => {
                let ends = (c0.min(c0 + c1), c0.max(c0 + c1));
                interval_product(ends, time.range(0.0, horizon))
            }
            RateFunction::Tabulated(tab) => RateTable::node_extremes(&tab.values),
        }
    }

    /// `‖w‖ = sup |w|`.
    pub fn sup_norm(&self, horizon: f64) -> f64 {
        let (lo, hi) = self.range(horizon);
        lo.abs().max(hi.abs())
    }

    /// `sup |∂w/∂y|`.
    pub fn sup_dy(&self, horizon: f64) -> f64 {
        match self {
            RateFunction::Constant(_) => 0.0,
            RateFunction::Separable { a, b } => {
                let (lo, hi) = interval_product(a.derivative().range(0.0, 1.0), b.range(0.0, horizon));
                lo.abs().max(hi.abs())
            }
            RateFunction::AffineInY { c1, time, .. } => {
                let (lo, hi) = time.range(0.0, horizon);
                c1.abs() * lo.abs().max(hi.abs())
            }
            RateFunction::Tabulated(tab) => {
                let (lo, hi) = RateTable::node_extremes(&tab.dwdy);
                lo.abs().max(hi.abs())
            }
        }
    }

    /// `sup w − inf w`.
    pub fn oscillation(&self, horizon: f64) -> f64 {
        let (lo, hi) = self.range(horizon);
        hi - lo
    }

    pub fn is_spatially_independent(&self) -> bool {
        match self {
            RateFunction::Constant(_) => true,
            RateFunction::Separable { a, .. } => a.is_constant(),
            RateFunction::AffineInY { c1, .. } => *c1 == 0.0,
            RateFunction::Tabulated(tab) => tab.values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// `∫_{t0}^{t} w(y, u) du`, exact for every kind (the tabulated kind is
    /// piecewise linear in `u` between table nodes).
    pub fn time_integral(&self, y: f64, t0: f64, t: f64) -> f64 {
        match self {
            RateFunction::Constant(c) => c * (t - t0),
            RateFunction::Separable { a, b } => a.eval(y) * b.integral(t0, t),
            RateFunction::AffineInY { c0, c1, time } => (c0 + c1 * y) * time.integral(t0, t),
            RateFunction::Tabulated(tab) => {
                let mut pts = vec![t0];
                pts.extend(tab.t.iter().copied().filter(|u| *u > t0 && *u < t));
                pts.push(t);
                pts.windows(2)
                    .map(|p| 0.5 * (p[1] - p[0]) * (self.value(y, p[0]) + self.value(y, p[1])))
                    .sum()
            }
        }
    }

    fn covers(&self, horizon: f64) -> bool {
        match self {
            RateFunction::Tabulated(tab) => {
                tab.y[0] <= 0.0 && *tab.y.last().unwrap() >= 1.0 && tab.t[0] <= 0.0 && *tab.t.last().unwrap() >= horizon
            }
            _ => true,
        }
    }
}

fn interval_product(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Checked evaluation of `w(y, t)` on `[0, 1] × [0, T]`.
pub fn eval_rate(w: &RateFunction, y: f64, t: f64, horizon: f64) -> Result<f64> {
    const EPS: f64 = 1e-12;
    if !(-EPS..=1.0 + EPS).contains(&y) || !(-EPS..=horizon * (1.0 + EPS) + EPS).contains(&t) {
        return Err(Error::Domain(format!("rate queried at (y, t) = ({y}, {t}) outside [0,1]x[0,{horizon}]")));
    }
    Ok(w.value(y, t))
}

/// Initial density `σ_α` of one component on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform,
    Polynomial(Poly),
    /// Piecewise linear through `(y_i, values_i)`.
    Tabulated { y: Vec<f64>, values: Vec<f64> },
}

impl Density {
    pub fn value(&self, y: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Polynomial(p) => p.eval(y),
            Density::Tabulated { y: ys, values } => {
                let (k, f) = locate(ys, y);
                (1.0 - f) * values[k] + f * values[k + 1]
            }
        }
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Density::Uniform => b - a,
            Density::Polynomial(p) => p.integral(a, b),
            Density::Tabulated { .. } => self.split(a, b).windows(2).map(|p| gauss_legendre(|z| self.value(z), p[0], p[1])).sum(),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Polynomial(p) => p.range(0.0, 1.0).0,
            Density::Tabulated { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// `(∫_a^b σ(z)(b−z)/(b−a) dz, ∫_a^b σ(z)(z−a)/(b−a) dz)`: the weights that
    /// pair `σ` with the two hat functions of the cell `[a, b]`.
    pub fn hat_moments(&self, a: f64, b: f64) -> (f64, f64) {
        let len = b - a;
        self.split(a, b).windows(2).fold((0.0, 0.0), |(l, r), p| {
            (
                l + gauss_legendre(|z| self.value(z) * (b - z) / len, p[0], p[1]),
                r + gauss_legendre(|z| self.value(z) * (z - a) / len, p[0], p[1]),
            )
        })
    }

    fn split(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        if let Density::Tabulated { y, .. } = self {
            pts.extend(y.iter().copied().filter(|v| *v > a && *v < b));
        }
        pts.push(b);
        pts
    }
}

/// Finite mixture `{(w_α, r_α)}` with its derived constants.
#[derive(Debug, Clone)]
pub struct RateMixture {
    pub rates: Vec<RateFunction>,
    pub weights: Vec<f64>,
    pub horizon: f64,
    /// `Σ r_α ‖w_α‖`
    pub m_w: f64,
    /// `max_α sup |∂w_α/∂y|`
    pub c_w: f64,
    /// `max_α (sup w_α − inf w_α)`
    pub c_osc: f64,
    /// `max_α ‖w_α‖`
    pub max_norm: f64,
}

impl RateMixture {
    pub fn new(rates: Vec<RateFunction>, weights: Vec<f64>, horizon: f64) -> Result<Self> {
        if rates.is_empty() || rates.len() != weights.len() {
            return Err(Error::Config("mixture needs one weight per rate and at least one component".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        let norms: Vec<f64> = rates.iter().map(|w| w.sup_norm(horizon)).collect();
        let m_w = norms.iter().zip(&weights).map(|(n, r)| n * r).sum();
        let c_w = rates.iter().map(|w| w.sup_dy(horizon)).fold(0.0, f64::max);
        let c_osc = rates.iter().map(|w| w.oscillation(horizon)).fold(0.0, f64::max);
        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        Ok(RateMixture { rates, weights, horizon, m_w, c_w, c_osc, max_norm })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Contraction constant `C = 2 C_W e^{2 C_W T}`.
    pub fn contraction_constant(&self) -> f64 {
        2.0 * self.c_w * (2.0 * self.c_w * self.horizon).exp()
    }

    pub fn is_spatially_independent(&self) -> bool {
        self.rates.iter().all(RateFunction::is_spatially_independent)
    }
}

/// Per-component initial densities `σ_α`.
#[derive(Debug, Clone)]
pub struct InitialDensity {
    pub sigmas: Vec<Density>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub mixture: RateMixture,
    pub density: InitialDensity,
}

impl Scenario {
    pub fn new(mixture: RateMixture, density: InitialDensity) -> Result<Self> {
        if mixture.len() != density.sigmas.len() {
            return Err(Error::Config(format!(
                "{} rates but {} densities",
                mixture.len(),
                density.sigmas.len()
            )));
        }
        Ok(Scenario { mixture, density })
    }

    pub fn horizon(&self) -> f64 {
        self.mixture.horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, violation: f64, tolerance: f64) -> Self {
        Check { name: name.to_string(), violation, tolerance, passed: violation <= tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub m_w: f64,
    pub c_w: f64,
    pub c_osc: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({:.3e} > {:.1e})", c.name, c.violation, c.tolerance))
            .collect();
        if failed.is_empty() {
            "all checks passed".into()
        } else {
            failed.join(", ")
        }
    }
}

/// Computes `M_W`, `C_W`, `C_osc` and checks the standing assumptions on the
/// `n_check`-point uniform grid in `y`. Fails with the full report attached.
pub fn validate_scenario(scenario: &Scenario, n_check: usize) -> Result<ValidationReport> {
    let mix = &scenario.mixture;
    let sig = &scenario.density.sigmas;
    let n_check = n_check.max(2);
    let mut checks = Vec::new();

    let min_r = mix.weights.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::new("weights_nonnegative", (-min_r).max(0.0), 0.0));
    let sum_r: f64 = mix.weights.iter().sum();
    checks.push(Check::new("weights_sum_to_one", (sum_r - 1.0).abs(), NORMALIZATION_TOL));

    let min_w = mix.rates.iter().map(|w| w.range(mix.horizon).0).fold(f64::INFINITY, f64::min);
    checks.push(Check::new("rates_nonnegative", (-min_w).max(0.0), 0.0));
    let uncovered = mix.rates.iter().filter(|w| !w.covers(mix.horizon)).count();
    checks.push(Check::new("rate_tables_cover_domain", uncovered as f64, 0.0));

    let min_sigma = sig.iter().map(Density::min).fold(f64::INFINITY, f64::min);
    checks.push(Check::new("densities_nonnegative", (-min_sigma).max(0.0), 0.0));
    let norm_err = sig.iter().map(|s| (s.integral(0.0, 1.0) - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::new("densities_normalized", norm_err, NORMALIZATION_TOL));

    let mixing_err = (0..n_check)
        .map(|i| {
            let y = i as f64 / (n_check - 1) as f64;
            let s: f64 = mix.weights.iter().zip(sig).map(|(r, s)| r * s.value(y)).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::new("mixing_identity", mixing_err, NORMALIZATION_TOL));

    let report = ValidationReport { m_w: mix.m_w, c_w: mix.c_w, c_osc: mix.c_osc, checks };
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::Validation(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: RateFunction, horizon: f64) -> Scenario {
        Scenario::new(
            RateMixture::new(vec![w], vec![1.0], horizon).unwrap(),
            InitialDensity { sigmas: vec![Density::Uniform] },
        )
        .unwrap()
    }

    #[test]
    fn constant_rate_constants() {
        let rep = validate_scenario(&single(RateFunction::Constant(2.0), 1.0), 129).unwrap();
        assert_eq!(rep.m_w, 2.0);
        assert_eq!(rep.c_w, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn two_constants_weighted() {
        let mix = RateMixture::new(
            vec![RateFunction::Constant(1.0), RateFunction::Constant(3.0)],
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        assert_eq!(mix.m_w, 2.0);
        assert_eq!(mix.c_osc, 0.0);
    }

    #[test]
    fn affine_rate_constants() {
        let w = RateFunction::AffineInY { c0: 1.0, c1: 1.0, time: Poly::constant(1.0) };
        let rep = validate_scenario(&single(w, 1.0), 129).unwrap();
        assert_eq!(rep.c_w, 1.0);
        assert_eq!(rep.m_w, 2.0);
        assert_eq!(rep.c_osc, 1.0);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_rate(&RateFunction::Constant(2.0), 0.3, 1.0, 1.0).unwrap(), 2.0);
        let w = RateFunction::AffineInY { c0: 1.0, c1: 1.0, time: Poly::constant(1.0) };
        assert_eq!(eval_rate(&w, 0.5, 0.7, 1.0).unwrap(), 1.5);
        let tab = RateTable::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 1.0],
            vec![vec![2.0; 2]; 3],
            vec![vec![0.0; 2]; 3],
        )
        .unwrap();
        assert_eq!(eval_rate(&RateFunction::Tabulated(tab), 0.37, 0.61, 1.0).unwrap(), 2.0);
        assert!(eval_rate(&RateFunction::Constant(1.0), 1.5, 0.0, 1.0).is_err());
        assert!(eval_rate(&RateFunction::Constant(1.0), 0.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        let mix = RateMixture::new(vec![RateFunction::Constant(1.0)], vec![0.9], 1.0).unwrap();
        let sc = Scenario::new(mix, InitialDensity { sigmas: vec![Density::Uniform] }).unwrap();
        match validate_scenario(&sc, 33) {
            Err(Error::Validation(rep)) => {
                let c = rep.checks.iter().find(|c| c.name == "weights_sum_to_one").unwrap();
                assert!((c.violation - 0.1).abs() < 1e-12);
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_rate_and_bad_mixing() {
        let w = RateFunction::AffineInY { c0: 1.0, c1: -2.0, time: Poly::constant(1.0) };
        assert!(validate_scenario(&single(w, 1.0), 33).is_err());
        let mix = RateMixture::new(
            vec![RateFunction::Constant(1.0), RateFunction::Constant(1.0)],
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let dens = InitialDensity {
            sigmas: vec![Density::Polynomial(Poly(vec![2.0, -2.0])), Density::Uniform],
        };
        assert!(validate_scenario(&Scenario::new(mix, dens).unwrap(), 33).is_err());
    }

    #[test]
    fn complementary_linear_densities_mix_to_one() {
        let mix = RateMixture::new(
            vec![RateFunction::Constant(1.0), RateFunction::Constant(3.0)],
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let dens = InitialDensity {
            sigmas: vec![
                Density::Polynomial(Poly(vec![2.0, -2.0])),
                Density::Tabulated { y: vec![0.0, 1.0], values: vec![0.0, 2.0] },
            ],
        };
        assert!(validate_scenario(&Scenario::new(mix, dens).unwrap(), 257).is_ok());
    }

    #[test]
    fn polynomial_range_finds_interior_extremum() {
        let p = Poly(vec![0.0, 1.0, -1.0]);
        let (lo, hi) = p.range(0.0, 1.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hat_moments_sum_to_cell_integral() {
        let d = Density::Polynomial(Poly(vec![0.5, 0.0, 1.5]));
        let (l, r) = d.hat_moments(0.2, 0.45);
        assert!((l + r - d.integral(0.2, 0.45)).abs() < 1e-15);
    }
}
