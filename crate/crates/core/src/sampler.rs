//! Monte Carlo oracle for the arrival process.
//!
//! Trajectories are drawn by thinning against the constant majorant `‖w‖`.
//! Each trajectory owns a ChaCha8 stream selected by its index, so estimates
//! are reproducible bit for bit and independent of the thread count.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{fmt17, Flow};
use crate::model::RateFunction;

/// Relative slack before an intensity above the majorant is reported.
const MAJORANT_SLACK: f64 = 1e-12;

/// Arrival times of one realization on `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub arrival_times: Vec<f64>,
    pub z: f64,
    pub component: usize,
}

impl Trajectory {
    /// `N(t)`.
    pub fn count_until(&self, t: f64) -> usize {
        self.arrival_times.partition_point(|&a| a <= t)
    }
}

/// Intensity `ω(s, t)` seen by a particle started at `z`, with `s = None`
/// before the first arrival.
fn intensity(theta: &Flow, w: &RateFunction, z: f64, last: Option<f64>, t: f64) -> f64 {
    let xi = match last {
        None => z,
        Some(s) => -s,
    };
    w.value(theta.eval(xi, t), t)
}

/// Draws one trajectory using `rng`.
pub fn sample_with<R: Rng>(theta: &Flow, w: &RateFunction, z: f64, component: usize, rng: &mut R) -> Result<Trajectory> {
    let horizon = theta.grid.horizon;
    let majorant = w.sup_norm(horizon);
    let mut arrival_times = Vec::new();
    if majorant > 0.0 {
        let gap = Exp::new(majorant).map_err(|e| Error::Domain(e.to_string()))?;
        let mut t = 0.0;
        let mut last = None;
        loop {
            t += gap.sample(rng);
            if t > horizon {
                break;
            }
            let rate = intensity(theta, w, z, last, t);
            if rate > majorant * (1.0 + MAJORANT_SLACK) {
                return Err(Error::Majorant { rate, bound: majorant });
            }
            if rng.random::<f64>() * majorant < rate {
                arrival_times.push(t);
                last = Some(t);
            }
        }
    }
    Ok(Trajectory { arrival_times, z, component })
}

/// Generator for trajectory `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Trajectory number `index` of the run seeded with `seed`.
pub fn sample_trajectory(theta: &Flow, w: &RateFunction, z: f64, seed: u64, index: u64) -> Result<Trajectory> {
    sample_with(theta, w, z, 0, &mut stream_rng(seed, index))
}

/// Empirical law of `{N(t) = N(s) = k}` over `n` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub z: f64,
    pub s: f64,
    pub t: f64,
    pub n: u64,
    /// Number of trajectories with no arrival in `(s, t]`, split by `N(t)`.
    pub hits_per_count: Vec<u64>,
    pub hits: u64,
}

impl Estimate {
    pub fn estimate(&self) -> f64 {
        self.hits as f64 / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        binomial_se(self.hits, self.n)
    }

    pub fn estimate_k(&self, k: usize) -> f64 {
        self.hits_per_count.get(k).copied().unwrap_or(0) as f64 / self.n as f64
    }

    pub fn stderr_k(&self, k: usize) -> f64 {
        binomial_se(self.hits_per_count.get(k).copied().unwrap_or(0), self.n)
    }
}

fn binomial_se(hits: u64, n: u64) -> f64 {
    let p = hits as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Estimates `P(N(t) = N(s))` and its per-count split for `z` and `(s, t)`.
pub fn estimate_probs(theta: &Flow, w: &RateFunction, z: f64, s: f64, t: f64, n_traj: u64, seed: u64) -> Result<Estimate> {
    Ok(estimate_many(theta, w, z, &[(s, t)], n_traj, seed)?.remove(0))
}

/// Several `(s, t)` queries answered from one set of trajectories.
pub fn estimate_many(
    theta: &Flow,
    w: &RateFunction,
    z: f64,
    queries: &[(f64, f64)],
    n_traj: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if n_traj == 0 {
        return Err(Error::Precondition("need at least one trajectory".into()));
    }
    let horizon = theta.grid.horizon;
    for &(s, t) in queries {
        if !(0.0 <= s && s <= t && t <= horizon) {
            return Err(Error::Precondition(format!("need 0 <= s <= t <= T, got s = {s}, t = {t}")));
        }
    }
    let empty = || vec![Vec::<u64>::new(); queries.len()];
    let tallies = (0..n_traj)
        .into_par_iter()
        .map(|i| sample_trajectory(theta, w, z, seed, i))
        .try_fold(empty, |mut acc, traj| {
            let traj = traj?;
            for (q, &(s, t)) in queries.iter().enumerate() {
                let nt = traj.count_until(t);
                if traj.count_until(s) == nt {
                    bump(&mut acc[q], nt, 1);
                }
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for (k, c) in y.into_iter().enumerate() {
                    bump(x, k, c);
                }
            }
            Ok(a)
        })?;
    Ok(queries
        .iter()
        .zip(tallies)
        .map(|(&(s, t), hits_per_count)| Estimate {
            z,
            s,
            t,
            n: n_traj,
            hits: hits_per_count.iter().sum(),
            hits_per_count,
        })
        .collect())
}

fn bump(v: &mut Vec<u64>, k: usize, by: u64) {
    if v.len() <= k {
        v.resize(k + 1, 0);
    }
    v[k] += by;
}

/// Writes `z,s,t,k,estimate,stderr,n`; `k = -1` rows hold the total.
pub fn write_estimates_csv<W: Write>(mut out: W, estimates: &[Estimate]) -> io::Result<()> {
    writeln!(out, "z,s,t,k,estimate,stderr,n")?;
    for e in estimates {
        let (z, s, t) = (fmt17(e.z), fmt17(e.s), fmt17(e.t));
        writeln!(out, "{z},{s},{t},-1,{},{},{}", fmt17(e.estimate()), fmt17(e.stderr()), e.n)?;
        for k in 0..e.hits_per_count.len() {
            writeln!(out, "{z},{s},{t},{k},{},{},{}", fmt17(e.estimate_k(k)), fmt17(e.stderr_k(k)), e.n)?;
        }
    }
    Ok(())
}
