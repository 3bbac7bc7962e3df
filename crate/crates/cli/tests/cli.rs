use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GOLDEN: &str = include_str!("../configs/golden.toml");

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.with_extension("toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_kamlind"))
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .env("KAMLIND_THREADS", "2")
        .output()
        .unwrap()
}

fn meta(path: PathBuf, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}: ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().to_string()
}

fn small_atlas() -> String {
    GOLDEN
        .replace("resolution = [120, 120]", "resolution = [40, 30]")
        .replace("measure_k_max = 2000", "measure_k_max = 300")
}

#[test]
fn verify_on_golden_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    let o = run("verify", GOLDEN, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("verify.txt")).unwrap();
    assert!(report
        .lines()
        .filter(|l| !l.starts_with('#'))
        .all(|l| l.starts_with("PASS")));
    assert!(fs::read_to_string(out.join("manifest.txt"))
        .unwrap()
        .contains("verify.txt "));
}

#[test]
fn missing_frequency_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "solve",
        &GOLDEN.replace("omega = [\"golden\"]\n", ""),
        &dir.path().join("x"),
        &[],
    );
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega"));
}

#[test]
fn unknown_key_is_a_parse_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "solve",
        &GOLDEN.replace("kappa = 0.5", "kappa = 0.5\nkapa = 0.5"),
        &dir.path().join("x"),
        &[],
    );
    assert_eq!(o.status.code(), Some(64));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kapa") && err.contains("line"), "{err}");
}

#[test]
fn atlas_without_good_set_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GOLDEN.replace("[good_set]\nA = 100.0\nN = 1\nr0 = 0.3\n", "");
    let o = run("atlas", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(64), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_at_zero_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve");
    let o = run("solve", GOLDEN, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let residual: f64 = meta(out.join("solution.txt"), "residual").parse().unwrap();
    assert!(residual <= 1e-13);
}

#[test]
fn solve_away_from_zero_converges_from_a_perturbed_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve");
    let cfg = GOLDEN.replace("eps = [0.0, 0.0]\n", "eps = [0.05, 0.0]\nperturbation = 0.01\n");
    let o = run("solve", &cfg, &out, &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let residual: f64 = meta(out.join("solution.txt"), "residual").parse().unwrap();
    assert!(residual <= 1e-13);
    assert!(fs::read_to_string(out.join("trace.txt")).unwrap().lines().count() > 4);
}

#[test]
fn resonant_point_exits_with_the_small_divisor_status() {
    let dir = tempfile::tempdir().unwrap();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    // inside the excluded ball around the ε-preimage of e^{2πiω}, off its center
    let (re, im) = ((2.0 * PI * g).cos() - 1.0 + 0.01, (2.0 * PI * g).sin());
    let cfg = GOLDEN
        .replace("kappa = 0.5", "kappa = 0.01")
        .replace("tol = 1e-13", "tol = 1e-11")
        .replace("r0 = 0.3", "r0 = 2.0")
        .replace("eps = [0.0, 0.0]\n", &format!("eps = [{re}, {im}]\n"));
    let o = run("solve", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let forced = run("solve", &cfg, &dir.path().join("y"), &["--force"]);
    assert_eq!(
        forced.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&forced.stderr)
    );
}

#[test]
fn outputs_are_byte_identical_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let solve_cfg = GOLDEN.replace("eps = [0.0, 0.0]\n", "eps = [0.05, 0.0]\nperturbation = 0.01\n");
    for (cmd, cfg) in [
        ("atlas", small_atlas()),
        ("solve", solve_cfg),
        ("double", GOLDEN.to_string()),
    ] {
        let a = dir.path().join(format!("{cmd}_a"));
        let b = dir.path().join(format!("{cmd}_b"));
        assert_eq!(run(cmd, &cfg, &a, &["--seed", "11"]).status.code(), Some(0));
        assert_eq!(run(cmd, &cfg, &b, &["--seed", "11"]).status.code(), Some(0));
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 2);
        for name in names {
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{cmd}: {name:?} differs"
            );
        }
    }
}

#[test]
fn manifest_lists_every_file_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("atlas");
    assert_eq!(run("atlas", &small_atlas(), &out, &[]).status.code(), Some(0));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for name in ["balls.txt", "grid.txt", "atlas.svg", "divisors.txt", "measure.txt"] {
        let line = manifest.lines().find(|l| l.starts_with(&format!("{name} "))).unwrap();
        assert_eq!(line.len(), name.len() + 1 + 64);
    }
    assert!(manifest.contains("command: atlas"));
    assert!(!fs::read_dir(&out)
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn sweep_along_the_real_axis_reaches_its_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = run("sweep", GOLDEN, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.txt")).unwrap();
    assert!(table.contains("reached_end=true"));
    let eps = meta(out.join("solution.txt"), "eps");
    assert!(
        eps.starts_with("2.9999999999999999e-1") || eps.starts_with("3.0000000000000000e-1"),
        "{eps}"
    );
}

#[test]
fn iteration_cap_exits_with_the_no_convergence_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GOLDEN
        .replace("max_iter = 30", "max_iter = 1")
        .replace("eps = [0.0, 0.0]\n", "eps = [0.05, 0.0]\n");
    let o = run("solve", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(dir.path().join("x/manifest.txt"))
        .unwrap()
        .contains("status: 4"));
}
