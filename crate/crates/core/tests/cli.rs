use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stickyflow");

fn stickyflow(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("STICKYFLOW_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const STATIONARY: &str = "flow = pressureless\nprofile = stationary\n[grid]\nn_cells = 16\n[time]\nt_end = 0.5\n[output]\ndir = out\n";

const COMPRESSION: &str =
    "flow = pressureless\nprofile = linear-compression\n[grid]\nn_cells = 32\n[time]\nt_end = 1\n[output]\ndir = out\n";

#[test]
fn selfsimilar_square_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickyflow(&["selfsimilar", "--alpha", "1", "--sigma0", "1", "--dsigma0", "1", "--t-end", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("sigma(4) = 3.000000"), "{text}");
    assert!(text.contains("classification = large-energy"), "{text}");
}

#[test]
fn selfsimilar_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickyflow(
        &["selfsimilar", "--alpha", "1", "--sigma0", "1", "--dsigma0", "0.5", "--t-end", "10", "--out", "s/sigma.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("s/sigma.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with('t'));
    assert!(lines.count() > 2);
}

#[test]
fn selfsimilar_rejects_bad_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickyflow(&["selfsimilar", "--alpha", "1", "--sigma0", "-1", "--dsigma0", "0", "--t-end", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn verify_stationary_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.ini", STATIONARY);
    let o = stickyflow(&["verify", &cfg], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().any(|l| l.starts_with("PASS ")));
    assert!(!text.contains("FAIL "), "{text}");
    for f in ["trajectory.csv", "config.ini", "report.txt"] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
}

#[test]
fn run_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.ini", COMPRESSION);
    let a = stickyflow(&["run", &cfg], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let first = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    let b = stickyflow(&["run", &cfg], dir.path());
    assert_eq!(b.status.code(), Some(0));
    let second = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(first, second);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn echoed_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.ini", COMPRESSION);
    assert_eq!(stickyflow(&["run", &cfg], dir.path()).status.code(), Some(0));
    let first = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    let echo = dir.path().join("echo.ini");
    fs::copy(dir.path().join("out/config.ini"), &echo).unwrap();
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    assert_eq!(stickyflow(&["run", echo.to_str().unwrap()], dir.path()).status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("out/trajectory.csv")).unwrap());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.ini", STATIONARY);
    let o = Command::new(BIN)
        .args(["run", &cfg])
        .current_dir(dir.path())
        .env("STICKYFLOW_OUT", dir.path().join("elsewhere"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("elsewhere/trajectory.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn sweep_runs_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.ini", COMPRESSION);
    let o = stickyflow(&["sweep", &cfg, "--vary", "flow.mu=1,2", "--vary", "grid.n_cells=16,32"], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().count(), 4, "{text}");
    let runs = fs::read_dir(dir.path().join("out")).unwrap().count();
    assert_eq!(runs, 4);
    let csv = fs::read_to_string(dir.path().join("out/flow.mu=2_grid.n_cells=16/trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.ini", "[grid]\nn_cells = 0\n");
    let o = stickyflow(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("n_cells"), "{err}");

    let o = stickyflow(&["run", "missing.ini"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), "unknown.ini", "[grid]\ncells = 4\n");
    assert_eq!(stickyflow(&["verify", &cfg], dir.path()).status.code(), Some(2));

    let cfg = write_config(dir.path(), "nsf.ini", "flow = nsf\n");
    assert_eq!(stickyflow(&["run", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stickyflow(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(stickyflow(&[], dir.path()).status.code(), Some(2));
    assert_eq!(stickyflow(&["selfsimilar", "--alpha", "1"], dir.path()).status.code(), Some(2));
    let help = stickyflow(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("selfsimilar"));
}

#[test]
fn aborted_run_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // A step floor far above what the compression needs forces an abort.
    let cfg = write_config(
        dir.path(),
        "a.ini",
        "flow = pressureless\n[profile]\nvelocity = sine(-50, 1)\n[grid]\nn_cells = 64\n[time]\nt_end = 1\ndt_init = 0.5\ndt_min = 0.5\ndt_max = 0.5\n[output]\ndir = out\n",
    );
    let o = stickyflow(&["run", &cfg], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{text}{}", String::from_utf8_lossy(&o.stderr));
    assert!(text.contains("aborted"), "{text}");
    assert!(dir.path().join("out/trajectory.csv").exists());
}
