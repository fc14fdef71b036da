use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nestlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestlab")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const SMALL: &str = "experiment = custom\nseed = 9\nobjective = logistic\nn = 6\nk_max = 150\n\
                     [method.dng]\nc = 1\neta = 0.1\n[method.dnc]\nalpha = 1/L\n";

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "small.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = nestlab(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["dnc.csv", "dnc_bounds.csv", "dng.csv", "dng_bounds.csv", "first_hits.csv", "summary.txt"]);
    assert_eq!(fa, fb);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "small.cfg", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(nestlab(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(nestlab(&["run", "--config", &cfg, "--seed", "10", "--out", b.to_str().unwrap()]).status.success());
    assert_ne!(fs::read(a.join("dng.csv")).unwrap(), fs::read(b.join("dng.csv")).unwrap());
}

#[test]
fn fig1_left_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = nestlab(&["fig1-left", "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert!(!text(&out.stdout).contains("[FAIL]"), "{}", text(&out.stdout));
    }
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
}

#[test]
fn unknown_method_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.cfg", "experiment = custom\nseed = 3\n[method.newton]\nc = 1\n");
    let out = nestlab(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("method.newton.kind"), "{}", text(&out.stderr));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn missing_seed_and_unknown_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let no_seed = write_config(&tmp, "a.cfg", "experiment = custom\n[method.dng]\nc = 1\n");
    let out = nestlab(&["run", "--config", &no_seed]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`seed`"));
    let extra = write_config(&tmp, "b.cfg", "experiment = custom\nseed = 1\nfoo = 2\n");
    let out = nestlab(&["run", "--config", &extra]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`foo`"));
}

#[test]
fn config_must_match_subcommand() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "small.cfg", SMALL);
    let out = nestlab(&["fig1-right", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`experiment`"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(nestlab(&["bogus"]).status.code(), Some(1));
    assert_eq!(nestlab(&["run"]).status.code(), Some(1));
    assert_eq!(nestlab(&["verify", "--tamper", "bogus"]).status.code(), Some(1));
    assert_eq!(nestlab(&["--help"]).status.code(), Some(0));
    assert_eq!(nestlab(&["--version"]).status.code(), Some(0));
}

#[test]
fn verify_passes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("v");
    let out = nestlab(&["verify", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let csv = fs::read_to_string(dir.join("verify.csv")).unwrap();
    assert!(csv.starts_with("check,passed,value,threshold\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")), "{csv}");
}

#[test]
fn tampered_verification_exits_two() {
    let tmp = TempDir::new().unwrap();
    for (tamper, check) in [("halve_c_cons", "consensus"), ("fixed_momentum", "single")] {
        let dir = tmp.path().join(tamper);
        let out = nestlab(&["verify", "--tamper", tamper, "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{tamper}");
        let csv = fs::read_to_string(dir.join("verify.csv")).unwrap();
        let failed: Vec<&str> = csv.lines().filter(|l| l.split(',').nth(1) == Some("false")).collect();
        assert!(!failed.is_empty() && failed.iter().all(|l| l.contains(check)), "{tamper}: {failed:?}");
    }
}

#[test]
fn single_node_dng_matches_centralized() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "n1.cfg",
        "experiment = custom\nseed = 4\nobjective = fair\nn = 1\nk_max = 300\nx0 = 2.5\n\
         [method.dng]\nc = 0.8\n[method.central]\nkind = centralized\nc = 0.8\n",
    );
    let out = nestlab(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.contains("[ ok ] dng matches centralized"), "{stdout}");
    let strip = |name: &str| -> Vec<String> {
        fs::read_to_string(tmp.path().join("o").join(name))
            .unwrap()
            .lines()
            .map(|l| l.split(',').skip(3).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip("dng.csv"), strip("central.csv"));
}

#[test]
fn demos_run_from_the_command_line() {
    let tmp = TempDir::new().unwrap();
    for args in [
        vec!["hard", "unbounded-dnc", "--k", "12"],
        vec!["hard", "unbounded-dng", "--m", "2"],
        vec!["diverge", "assumption-1b"],
    ] {
        let dir = tmp.path().join(args[1]);
        let mut full = args.clone();
        full.extend(["--out", dir.to_str().unwrap()]);
        let out = nestlab(&full);
        assert!(out.status.success(), "{args:?}: {}", text(&out.stderr));
        assert!(!text(&out.stdout).contains("[FAIL]"), "{args:?}: {}", text(&out.stdout));
        assert!(dir.join("summary.txt").exists());
    }
}
