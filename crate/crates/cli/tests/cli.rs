use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const ZERO: &str = r#"
horizon = 1.0
[grid]
n_t = 17
n_z = 17
[mc]
trajectories = 2000
seed = 3
[[components]]
weight = 1.0
kind = "constant"
c = 0.0
sigma = { kind = "uniform" }
"#;

const CONSTANT: &str = r#"
horizon = 1.0
[grid]
n_t = 65
n_z = 65
[mc]
trajectories = 100000
seed = 1
[[components]]
weight = 1.0
kind = "constant"
c = 1.0
sigma = { kind = "uniform" }
"#;

const AFFINE: &str = r#"
horizon = 1.0
[grid]
n_t = 33
n_z = 33
[mc]
trajectories = 20000
seed = 2
[[components]]
weight = 1.0
kind = "affine_in_y"
c0 = 1.0
c1 = 1.0
sigma = { kind = "uniform" }
"#;

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
    _dir: TempDir,
}

fn run(config: &str, extra: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_evapflow"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run { code: o.status.code().unwrap(), out, stderr: String::from_utf8_lossy(&o.stderr).into_owned(), _dir: dir }
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_rate_gives_identity_curves() {
    let r = run(ZERO, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for row in rows(&r.out.join("ycurves.csv")) {
        assert_eq!(row[2], row[0].max(0.0));
    }
    for name in ["diagnostics.csv", "report.txt", "report.json", "measure_t0.0000.csv", "measure_t1.0000.csv"] {
        assert!(r.out.join(name).exists(), "{name}");
    }
}

#[test]
fn constant_rate_matches_closed_form() {
    let r = run(CONSTANT, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut worst: f64 = 0.0;
    for row in rows(&r.out.join("ycurves.csv")) {
        let (xi, t) = (row[0], row[1]);
        let (u, t0) = if xi >= 0.0 { (1.0 - xi, 0.0) } else { (1.0, -xi) };
        worst = worst.max((row[2] - (1.0 - u * (-(t - t0)).exp())).abs());
    }
    assert!(worst < 5e-4, "{worst}");
}

#[test]
fn weights_not_summing_to_one_exit_3() {
    let r = run(&CONSTANT.replace("weight = 1.0", "weight = 0.9"), &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("weights_sum_to_one"), "{}", r.stderr);
}

#[test]
fn unequal_boundary_nodes_exit_3() {
    let r = run(&ZERO.replace("n_z = 17", "n_z = 17\nn_b = 9"), &[]);
    assert_eq!(r.code, 3);
}

#[test]
fn unparsable_config_exit_2() {
    assert_eq!(run("horizon = [", &[]).code, 2);
    assert_eq!(run(&ZERO.replace("constant", "cubic"), &[]).code, 2);
}

#[test]
fn missing_config_exit_2() {
    let dir = TempDir::new().unwrap();
    let code = Command::new(env!("CARGO_BIN_EXE_evapflow"))
        .args(["--config", "/nonexistent/scenario.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(2));
}

#[test]
fn non_convergence_exit_4() {
    let r = run(&AFFINE.replace("[mc]", "[solver]\nmax_iter = 2\n[mc]"), &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("no convergence"), "{}", r.stderr);
}

#[test]
fn monte_carlo_agrees_for_constant_rate() {
    let r = run(CONSTANT, &["--mc"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mc = rows(&r.out.join("mc_check.csv"));
    assert_eq!(mc.len(), 48);
    assert!(mc.iter().all(|row| row[8] == 1.0));
    assert!(r.out.join("mc_estimates.csv").exists());
}

#[test]
fn monte_carlo_zero_rate_is_certain() {
    let r = run(ZERO, &["--mc"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for row in rows(&r.out.join("mc_check.csv")) {
        assert_eq!(row[5], 1.0);
        assert_eq!(row[4], 1.0);
    }
}

#[test]
fn corrupted_kernel_exit_5() {
    let r = run(CONSTANT.replace("100000", "20000").as_str(), &["--mc", "--corrupt-kernel"]);
    assert_eq!(r.code, 5);
    assert!(r.stderr.contains("mc_within_3se"), "{}", r.stderr);
    let rep = json(&r.out.join("report.json"));
    assert_eq!(rep["passed"], false);
    assert_eq!(rep["mc"]["corrupted"], true);
}

#[test]
fn outputs_are_deterministic_across_runs_and_threads() {
    let a = run(AFFINE, &["--mc", "--threads", "1"]);
    let b = run(AFFINE, &["--mc"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(b.code, 0, "{}", b.stderr);
    let mut names: Vec<_> = fs::read_dir(&a.out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")) {
        let (x, y) = (fs::read_to_string(a.out.join(name)).unwrap(), fs::read_to_string(b.out.join(name)).unwrap());
        if name == "diagnostics.csv" {
            // wall-clock seconds differ between runs
            let strip = |s: &str| s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
            assert_eq!(strip(&x), strip(&y));
        } else {
            assert_eq!(x, y, "{name:?}");
        }
    }
    assert_eq!(json(&a.out.join("report.json"))["scenario_hash"], json(&b.out.join("report.json"))["scenario_hash"]);
}

#[test]
fn report_lists_every_check_once() {
    let r = run(AFFINE, &["--mc"]);
    let rep = json(&r.out.join("report.json"));
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    for want in [
        "contraction_envelope",
        "appendix_dG_dy0_initial",
        "solidity",
        "conservation",
        "coordinate_consistency",
        "finite_evaporation",
        "lipschitz",
        "fixed_point_residual",
        "mc_within_3se",
    ] {
        assert!(names.contains(&want), "{want}");
    }
    let text = fs::read_to_string(r.out.join("report.txt")).unwrap();
    assert!(text.contains("(CT)^k/k!"));
    assert_eq!(rep["seeds"]["mc"], 2);
}

#[test]
fn refinement_reports_second_order() {
    let r = run(AFFINE, &["--refine", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let levels = fs::read_to_string(r.out.join("refine.csv")).unwrap().lines().count() - 1;
    assert_eq!(levels, 3);
    let rep = json(&r.out.join("report.json"));
    let vel: Vec<f64> = rep["refinement"].as_array().unwrap().iter().map(|l| l["residuals"]["velocity"].as_f64().unwrap()).collect();
    let order = (vel[1] / vel[2]).log2();
    assert!(order > 1.8, "{vel:?}");
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = evapflow::config::Config::from_toml_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let sc = cfg.scenario().unwrap();
        assert!(evapflow::model::validate_scenario(&sc, 1025).is_ok(), "{path:?}");
    }
}
