//! Batch runner: config → validate → solve → reconstruct → check, with CSV
//! artifacts, `report.txt` and `report.json` written to the output directory.
//!
//! Exit codes: 0 all hard checks pass, 1 I/O failure, 2 unparsable config,
//! 3 invalid scenario or grid, 4 Picard iteration did not converge,
//! 5 an invariant or the Monte Carlo comparison failed.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

use evapflow::config::{Config, RateSpec};
use evapflow::grid::{fmt17, Flow};
use evapflow::model::{validate_scenario, Check, Scenario};
use evapflow::picard::{apply_g, check_appendix_bounds, solve_fixed_point, FixedPoint, ENVELOPE_SLACK};
use evapflow::process::{prob_no_arrival, ArrivalKernel};
use evapflow::sampler::{estimate_many, write_estimates_csv, Estimate};
use evapflow::solution::{all_slices, oracle_error, residual_evolution, residual_uniqueness_form, residual_velocity, verify, PhiTable};
use evapflow::{Error, Grid, GridSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NO_CONVERGENCE: u8 = 4;
pub const EXIT_INVARIANT: u8 = 5;

/// Points of the `y` grid used to check the mixing identity.
const VALIDATION_POINTS: usize = 1025;
/// Largest fraction of Monte Carlo queries allowed outside 3 standard errors.
const MC_MAX_MISS: f64 = 0.01;
/// Rate multiplier applied to the analytic side by `--corrupt-kernel`.
const CORRUPTION: f64 = 1.5;
/// `(s, t)` pairs of the Monte Carlo check as fractions of the horizon.
const MC_PAIRS: [(f64, f64); 12] = [
    (0.0, 0.25),
    (0.0, 0.5),
    (0.0, 0.75),
    (0.0, 1.0),
    (0.25, 0.5),
    (0.25, 0.75),
    (0.25, 1.0),
    (0.5, 0.75),
    (0.5, 1.0),
    (0.75, 1.0),
    (0.125, 0.625),
    (0.375, 0.875),
];
const MC_STARTS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];
/// Fractions of the horizon at which `measure_t*.csv` slices are written.
const SLICE_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Parser)]
#[command(name = "evapflow", version, about = "Solve an evaporating mixture scenario and check the solution")]
pub struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Compare arrival probabilities against Monte Carlo estimates.
    #[arg(long)]
    pub mc: bool,
    /// Repeat the solve on K successively halved grids and report convergence orders.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub refine: usize,
    /// Scale the rates used on the analytic side of the Monte Carlo check.
    #[arg(long, hide = true)]
    pub corrupt_kernel: bool,
}

/// A run that stopped early, with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_PARSE,
            Error::Validation(_) | Error::Grid(_) => EXIT_VALIDATION,
            Error::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            Error::Domain(_) | Error::Precondition(_) => EXIT_VALIDATION,
            Error::FlowInvariant { .. } | Error::Majorant { .. } | Error::Envelope { .. } | Error::Inversion { .. } => {
                EXIT_INVARIANT
            }
        };
        Failure::new(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&Check> for CheckRow {
    fn from(c: &Check) -> Self {
        CheckRow { name: c.name.clone(), violation: c.violation, tolerance: c.tolerance, passed: c.passed }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub horizon: f64,
    pub n_t: usize,
    pub n_z: usize,
    pub n_b: usize,
}

impl From<GridSpec> for GridRow {
    fn from(s: GridSpec) -> Self {
        GridRow { horizon: s.horizon, n_t: s.n_t, n_z: s.n_z, n_b: s.n_b }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRow {
    pub iter: usize,
    pub d_k: f64,
    pub envelope_k: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub fixed_point: f64,
    pub velocity: f64,
    pub evolution_max: f64,
    pub uniqueness_max: f64,
    /// Against the closed form, for spatially independent rates only.
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub trajectories: u64,
    pub queries: usize,
    pub within_3se: usize,
    pub corrupted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineLevel {
    pub n_t: usize,
    pub n_z: usize,
    pub iterations: usize,
    /// Max distance to the previous level's `y_C` on that level's nodes.
    pub y_c_change: Option<f64>,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub mc: u64,
    pub lipschitz: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub scenario_hash: String,
    pub grid: GridRow,
    pub m_w: f64,
    pub c_w: f64,
    pub c_osc: f64,
    pub contraction_constant: f64,
    pub k_max: usize,
    pub converged: bool,
    pub iterations: Vec<IterationRow>,
    pub residuals: Residuals,
    pub checks: Vec<CheckRow>,
    pub mc: Option<McSummary>,
    pub refinement: Vec<RefineLevel>,
    pub seeds: Seeds,
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub passed: bool,
}

/// Parses `argv`, runs, prints the outcome and returns the exit code.
pub fn main_with(args: Args) -> u8 {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return EXIT_IO;
        }
    }
    match run(&args) {
        Ok(report) => {
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                println!("all {} checks passed; artifacts in {}", report.checks.len(), args.out.display());
                EXIT_OK
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                EXIT_INVARIANT
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs one scenario and writes every artifact. Failed hard checks still
/// produce a full report; early stops return a [`Failure`].
pub fn run(args: &Args) -> Result<SolveReport, Failure> {
    let start = Instant::now();
    let bytes = fs::read(&args.config)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read {}: {e}", args.config.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::new(EXIT_PARSE, format!("config is not UTF-8: {e}")))?;
    let cfg = Config::from_toml_str(text)?;
    let scenario = cfg.scenario().map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;
    let validation = validate_scenario(&scenario, VALIDATION_POINTS)?;
    let spec = cfg.grid_spec();
    let grid = Grid::new(spec)?;
    let opts = cfg.solver_options();

    let fp = solve_fixed_point(&scenario, &grid, opts)?;
    let solve_seconds = fp.diagnostics.seconds;
    fs::create_dir_all(&args.out)?;
    write_file(&args.out.join("ycurves.csv"), |w| fp.y_c.write_csv(w, "y_c"))?;
    write_file(&args.out.join("diagnostics.csv"), |w| fp.diagnostics.write_csv(w))?;

    let phi = PhiTable::from_fixed_point(&fp, &scenario);
    let slices = all_slices(&fp.y_c, &phi)?;
    for frac in SLICE_FRACTIONS {
        let j = grid.time_index(frac * grid.horizon)?;
        let s = &slices[j];
        write_file(&args.out.join(format!("measure_t{:.4}.csv", s.t)), |w| s.write_csv(w))?;
    }

    let seed = cfg.mc.seed;
    let solution = verify(&fp, &scenario, &slices, seed)?;
    let appendix = check_appendix_bounds(&apply_g(&fp.y_c, &scenario, fp.diagnostics.k_max)?, &scenario.mixture);
    let envelope_excess =
        fp.diagnostics.records.iter().map(|r| r.distance - r.envelope).fold(0.0, f64::max);

    let mut checks: Vec<CheckRow> = validation.checks.iter().map(CheckRow::from).collect();
    checks.push((&Check::new("contraction_envelope", envelope_excess, ENVELOPE_SLACK)).into());
    checks.extend(appendix.checks.iter().map(CheckRow::from));
    checks.extend(solution.checks.iter().map(CheckRow::from));

    let mc = if args.mc {
        let (summary, check) = run_mc(&cfg, &scenario, &fp, args)?;
        checks.push(check);
        Some(summary)
    } else {
        None
    };

    let residuals = Residuals {
        fixed_point: fp.residual,
        velocity: solution.residual_velocity,
        evolution_max: max_of(&solution.residual_evolution),
        uniqueness_max: max_of(&solution.residual_uniqueness),
        oracle: oracle_for(&fp.y_c, &scenario)?,
    };
    let refinement = if args.refine > 0 { refine(&scenario, spec, opts, &fp, residuals.clone(), args.refine)? } else { Vec::new() };
    if !refinement.is_empty() {
        write_file(&args.out.join("refine.csv"), |w| write_refine_csv(w, &refinement))?;
    }

    let d = &fp.diagnostics;
    let report = SolveReport {
        scenario_hash: sha256_hex(&bytes),
        grid: spec.into(),
        m_w: scenario.mixture.m_w,
        c_w: scenario.mixture.c_w,
        c_osc: scenario.mixture.c_osc,
        contraction_constant: d.contraction_constant,
        k_max: d.k_max,
        converged: d.converged,
        iterations: d
            .records
            .iter()
            .map(|r| IterationRow { iter: r.iter, d_k: r.distance, envelope_k: r.envelope, seconds: r.seconds })
            .collect(),
        residuals,
        passed: checks.iter().all(|c| c.passed),
        checks,
        mc,
        refinement,
        seeds: Seeds { mc: seed, lipschitz: seed },
        solve_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_file(&args.out.join("report.txt"), |w| w.write_all(render_report(&report).as_bytes()))?;
    write_file(&args.out.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    Ok(report)
}

fn write_file<F: FnOnce(&mut BufWriter<File>) -> io::Result<()>>(path: &Path, f: F) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn oracle_for(y_c: &Flow, scenario: &Scenario) -> Result<Option<f64>, Failure> {
    if scenario.mixture.is_spatially_independent() {
        Ok(Some(oracle_error(y_c, scenario)?))
    } else {
        Ok(None)
    }
}

/// The config with every rate multiplied by `factor`.
fn scaled_config(cfg: &Config, factor: f64) -> Config {
    let mut out = cfg.clone();
    for c in &mut out.components {
        c.rate = match &c.rate {
            RateSpec::Constant { c } => RateSpec::Constant { c: c * factor },
            RateSpec::Separable { a, b } => {
                RateSpec::Separable { a: a.iter().map(|x| x * factor).collect(), b: b.clone() }
            }
            RateSpec::AffineInY { c0, c1, time } => {
                RateSpec::AffineInY { c0: c0 * factor, c1: c1 * factor, time: time.clone() }
            }
            RateSpec::Tabulated { y, t, values, dwdy } => {
                let scale = |m: &Vec<Vec<f64>>| m.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect();
                RateSpec::Tabulated { y: y.clone(), t: t.clone(), values: scale(values), dwdy: scale(dwdy) }
            }
        };
    }
    out
}

/// Samples each component's arrival process along `y_C` and compares with the
/// analytic no-arrival probabilities. Writes `mc_check.csv` and `mc_estimates.csv`.
fn run_mc(cfg: &Config, scenario: &Scenario, fp: &FixedPoint, args: &Args) -> Result<(McSummary, CheckRow), Failure> {
    let analytic = if args.corrupt_kernel {
        scaled_config(cfg, CORRUPTION).scenario().map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?
    } else {
        scenario.clone()
    };
    let horizon = scenario.horizon();
    let pairs: Vec<(f64, f64)> = MC_PAIRS.iter().map(|&(s, t)| (s * horizon, t * horizon)).collect();
    let n = cfg.mc.trajectories;
    let k_max = fp.diagnostics.k_max;

    let mut rows = String::from("component,z,s,t,analytic,estimate,stderr,n,within_3se\n");
    let mut all: Vec<Estimate> = Vec::new();
    let (mut within, mut total) = (0, 0);
    for (a, w) in scenario.mixture.rates.iter().enumerate() {
        let kernel = ArrivalKernel::build(&fp.y_c, &analytic.mixture.rates[a], k_max);
        for z in MC_STARTS {
            for e in estimate_many(&fp.y_c, w, z, &pairs, n, cfg.mc.seed)? {
                let exact = prob_no_arrival(&kernel, z, e.s, e.t)?.total;
                let ok = (e.estimate() - exact).abs() <= 3.0 * e.stderr();
                total += 1;
                within += usize::from(ok);
                let _ = writeln!(
                    rows,
                    "{a},{},{},{},{},{},{},{},{}",
                    fmt17(z),
                    fmt17(e.s),
                    fmt17(e.t),
                    fmt17(exact),
                    fmt17(e.estimate()),
                    fmt17(e.stderr()),
                    e.n,
                    u8::from(ok)
                );
                all.push(e);
            }
        }
    }
    write_file(&args.out.join("mc_check.csv"), |w| w.write_all(rows.as_bytes()))?;
    write_file(&args.out.join("mc_estimates.csv"), |w| write_estimates_csv(w, &all))?;
    let miss = (total - within) as f64 / total as f64;
    let check = (&Check::new("mc_within_3se", miss, MC_MAX_MISS)).into();
    Ok((McSummary { trajectories: n, queries: total, within_3se: within, corrupted: args.corrupt_kernel }, check))
}

/// Solves on `k` successively halved grids after the base one.
fn refine(
    scenario: &Scenario,
    base: GridSpec,
    opts: evapflow::picard::SolverOptions,
    base_fp: &FixedPoint,
    base_residuals: Residuals,
    k: usize,
) -> Result<Vec<RefineLevel>, Failure> {
    let mut levels = vec![RefineLevel {
        n_t: base.n_t,
        n_z: base.n_z,
        iterations: base_fp.diagnostics.records.len(),
        y_c_change: None,
        residuals: base_residuals,
    }];
    let mut prev = base_fp.y_c.clone();
    let mut spec = base;
    for _ in 0..k {
        spec = spec.refined();
        let grid = Grid::new(spec)?;
        let fp = solve_fixed_point(scenario, &grid, opts)?;
        let phi = PhiTable::from_fixed_point(&fp, scenario);
        let mix = &scenario.mixture;
        let residuals = Residuals {
            fixed_point: fp.residual,
            velocity: residual_velocity(&fp.y_c, &phi, mix)?,
            evolution_max: max_of(&residual_evolution(&fp.y_c, &phi, mix)?),
            uniqueness_max: max_of(&residual_uniqueness_form(&fp.y_c, &phi, mix)?),
            oracle: oracle_for(&fp.y_c, scenario)?,
        };
        levels.push(RefineLevel {
            n_t: spec.n_t,
            n_z: spec.n_z,
            iterations: fp.diagnostics.records.len(),
            y_c_change: Some(change_on_coarse(&prev, &fp.y_c)),
            residuals,
        });
        prev = fp.y_c;
    }
    Ok(levels)
}

fn change_on_coarse(coarse: &Flow, fine: &Flow) -> f64 {
    let g = &coarse.grid;
    let mut worst: f64 = 0.0;
    for i in 0..g.n_xi() {
        for j in 0..g.n_t() {
            if g.is_admissible(i, j) {
                worst = worst.max((coarse.get(i, j) - fine.eval(g.xi[i], g.t[j])).abs());
            }
        }
    }
    worst
}

/// `log2(e_k / e_{k+1})`, or `None` when either error is not positive.
pub fn order(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2())
}

fn write_refine_csv<W: Write>(mut w: W, levels: &[RefineLevel]) -> io::Result<()> {
    writeln!(w, "n_t,n_z,iterations,y_c_change,residual_velocity,residual_evolution,residual_uniqueness,oracle_error")?;
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt17);
    for l in levels {
        let r = &l.residuals;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            l.n_t,
            l.n_z,
            l.iterations,
            opt(l.y_c_change),
            fmt17(r.velocity),
            fmt17(r.evolution_max),
            fmt17(r.uniqueness_max),
            opt(r.oracle)
        )?;
    }
    Ok(())
}

/// Human-readable summary; the envelope table lists `d_k` next to `(CT)^k/k!`.
pub fn render_report(r: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario sha256  {}", r.scenario_hash);
    let _ = writeln!(s, "grid             T = {}, n_t = {}, n_z = {}, n_b = {}", r.grid.horizon, r.grid.n_t, r.grid.n_z, r.grid.n_b);
    let _ = writeln!(s, "constants        M_W = {:.6}, C_W = {:.6}, C_osc = {:.6}, C = {:.6}", r.m_w, r.c_w, r.c_osc, r.contraction_constant);
    let _ = writeln!(s, "truncation       K_max = {}", r.k_max);
    let _ = writeln!(s, "seeds            mc = {}, lipschitz = {}", r.seeds.mc, r.seeds.lipschitz);
    let _ = writeln!(s, "status           {}", if r.passed { "PASS" } else { "FAIL" });

    let _ = writeln!(s, "\ncontraction envelope ({} iterations, converged = {})", r.iterations.len(), r.converged);
    let _ = writeln!(s, "{:>4}  {:>12}  {:>12}  {:>10}", "k", "d_k", "(CT)^k/k!", "d_k/env");
    for it in &r.iterations {
        let ratio = if it.envelope_k > 0.0 { format!("{:.3e}", it.d_k / it.envelope_k) } else { "-".into() };
        let _ = writeln!(s, "{:>4}  {:>12.4e}  {:>12.4e}  {:>10}", it.iter, it.d_k, it.envelope_k, ratio);
    }

    let res = &r.residuals;
    let _ = writeln!(s, "\nresiduals");
    let _ = writeln!(s, "  fixed point      {:.4e}", res.fixed_point);
    let _ = writeln!(s, "  velocity         {:.4e}", res.velocity);
    let _ = writeln!(s, "  evolution (max)  {:.4e}", res.evolution_max);
    let _ = writeln!(s, "  uniqueness (max) {:.4e}", res.uniqueness_max);
    if let Some(o) = res.oracle {
        let _ = writeln!(s, "  closed form      {o:.4e}");
    }

    let _ = writeln!(s, "\nchecks");
    for c in &r.checks {
        let _ = writeln!(
            s,
            "  {:<4} {:<28} {:.4e} (tol {:.1e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.violation,
            c.tolerance
        );
    }

    if let Some(mc) = &r.mc {
        let _ = writeln!(
            s,
            "\nmonte carlo      {}/{} queries within 3 SE, {} trajectories each{}",
            mc.within_3se,
            mc.queries,
            mc.trajectories,
            if mc.corrupted { " (analytic rates scaled)" } else { "" }
        );
    }

    if !r.refinement.is_empty() {
        let _ = writeln!(s, "\nrefinement (orders are log2 of successive ratios)");
        let _ = writeln!(
            s,
            "{:>5} {:>5}  {:>11} {:>6}  {:>11} {:>6}  {:>11} {:>6}  {:>11} {:>6}",
            "n_t", "n_z", "y_c change", "order", "velocity", "order", "evolution", "order", "uniqueness", "order"
        );
        let fmt_order = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => order(a, b).map_or("-".into(), |o| format!("{o:.2}")),
            _ => "-".to_string(),
        };
        for (i, l) in r.refinement.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| &r.refinement[p]);
            let rr = &l.residuals;
            let pr = prev.map(|p| &p.residuals);
            let _ = writeln!(
                s,
                "{:>5} {:>5}  {:>11} {:>6}  {:>11.4e} {:>6}  {:>11.4e} {:>6}  {:>11.4e} {:>6}",
                l.n_t,
                l.n_z,
                l.y_c_change.map_or("-".into(), |x| format!("{x:.4e}")),
                fmt_order(prev.and_then(|p| p.y_c_change), l.y_c_change),
                rr.velocity,
                fmt_order(pr.map(|p| p.velocity), Some(rr.velocity)),
                rr.evolution_max,
                fmt_order(pr.map(|p| p.evolution_max), Some(rr.evolution_max)),
                rr.uniqueness_max,
                fmt_order(pr.map(|p| p.uniqueness_max), Some(rr.uniqueness_max)),
            );
        }
    }
    let _ = writeln!(s, "\nsolve {:.3}s, total {:.3}s", r.solve_seconds, r.total_seconds);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn order_of_halving_errors() {
        assert_eq!(order(4.0, 1.0), Some(2.0));
        assert_eq!(order(0.0, 1.0), None);
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(Failure::from(Error::Config("x".into())).code, EXIT_PARSE);
        assert_eq!(Failure::from(Error::Grid("x".into())).code, EXIT_VALIDATION);
        assert_eq!(Failure::from(Error::Envelope { iter: 1, d: 1.0, envelope: 0.5 }).code, EXIT_INVARIANT);
    }

    #[test]
    fn scaling_touches_only_rates() {
        let cfg = Config::from_toml_str(
            "horizon = 1.0\n[[components]]\nweight = 1.0\nkind = \"affine_in_y\"\nc0 = 1.0\nc1 = 2.0\nsigma = { kind = \"uniform\" }\n",
        )
        .unwrap();
        let sc = scaled_config(&cfg, 1.5).scenario().unwrap();
        assert_eq!(sc.mixture.m_w, 4.5);
        assert_eq!(sc.mixture.weights, vec![1.0]);
    }
}
