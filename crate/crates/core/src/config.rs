//! Scenario files (TOML).
//!
//! ```toml
//! horizon = 1.0
//!
//! [grid]
//! n_t = 129
//! n_z = 129
//!
//! [solver]
//! tolerance = 1e-8
//! max_iter = 60
//!
//! [mc]
//! trajectories = 100000
//! seed = 7
//!
//! [[components]]
//! weight = 1.0
//! kind = "affine_in_y"
//! c0 = 1.0
//! c1 = 1.0
//! sigma = { kind = "uniform" }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{Density, InitialDensity, Poly, RateFunction, RateMixture, RateTable, Scenario};
use crate::picard::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    Constant { c: f64 },
    /// `a(y) b(t)` with polynomial coefficients, lowest degree first.
    Separable { a: Vec<f64>, b: Vec<f64> },
    /// `(c0 + c1 y) time(t)`; `time` defaults to 1.
    AffineInY { c0: f64, c1: f64, time: Option<Vec<f64>> },
    /// `values[iy][it]` on `y × t`, with the companion `∂w/∂y` table.
    Tabulated { y: Vec<f64>, t: Vec<f64>, values: Vec<Vec<f64>>, dwdy: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Uniform,
    Polynomial { coeffs: Vec<f64> },
    Tabulated { y: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub weight: f64,
    #[serde(flatten)]
    pub rate: RateSpec,
    pub sigma: SigmaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_nodes")]
    pub n_t: usize,
    #[serde(default = "default_nodes")]
    pub n_z: usize,
    pub n_b: Option<usize>,
}

fn default_nodes() -> usize {
    129
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_t: default_nodes(), n_z: default_nodes(), n_b: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub k_max: Option<usize>,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    60
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: default_tolerance(), max_iter: default_max_iter(), k_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_trajectories() -> u64 {
    100_000
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { trajectories: default_trajectories(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub horizon: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mc: McConfig,
    pub components: Vec<ComponentSpec>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the scenario; validation of the standing assumptions is separate.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut rates = Vec::new();
        let mut weights = Vec::new();
        let mut sigmas = Vec::new();
        for c in &self.components {
            weights.push(c.weight);
            rates.push(c.rate.build()?);
            sigmas.push(c.sigma.build()?);
        }
        Scenario::new(RateMixture::new(rates, weights, self.horizon)?, InitialDensity { sigmas })
    }

    pub fn grid_spec(&self) -> GridSpec {
        let mut spec = GridSpec::new(self.horizon, self.grid.n_t, self.grid.n_z);
        if let Some(nb) = self.grid.n_b {
            spec.n_b = nb;
        }
        spec
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.solver.tolerance, max_iter: self.solver.max_iter, k_max: self.solver.k_max }
    }
}

impl RateSpec {
    pub fn build(&self) -> Result<RateFunction> {
        Ok(match self {
            RateSpec::Constant { c } => RateFunction::Constant(*c),
            RateSpec::Separable { a, b } => RateFunction::Separable { a: poly(a)?, b: poly(b)? },
            RateSpec::AffineInY { c0, c1, time } => RateFunction::AffineInY {
                c0: *c0,
                c1: *c1,
                time: time.as_deref().map_or(Ok(Poly::constant(1.0)), poly)?,
            },
            RateSpec::Tabulated { y, t, values, dwdy } => {
                RateFunction::Tabulated(RateTable::new(y.clone(), t.clone(), values.clone(), dwdy.clone())?)
            }
        })
    }
}

impl SigmaSpec {
    pub fn build(&self) -> Result<Density> {
        Ok(match self {
            SigmaSpec::Uniform => Density::Uniform,
            SigmaSpec::Polynomial { coeffs } => Density::Polynomial(poly(coeffs)?),
            SigmaSpec::Tabulated { y, values } => {
                if y.len() < 2 || y.len() != values.len() || y.windows(2).any(|p| p[0] >= p[1]) {
                    return Err(Error::Config("tabulated sigma needs matching, increasing nodes".into()));
                }
                if y[0] > 0.0 || *y.last().unwrap() < 1.0 {
                    return Err(Error::Config("tabulated sigma must cover [0, 1]".into()));
                }
                Density::Tabulated { y: y.clone(), values: values.clone() }
            }
        })
    }
}

fn poly(coeffs: &[f64]) -> Result<Poly> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config("polynomial needs finite coefficients".into()));
    }
    Ok(Poly(coeffs.to_vec()))
}
