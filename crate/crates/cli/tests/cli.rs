use std::path::Path;
use std::process::{Command, Output};

fn lwsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LWSIM_OUT")
        .output()
        .expect("binary runs")
}

fn csv(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("results.csv")).unwrap()
}

fn column(text: &str, name: &str, row: &str) -> f64 {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    let rep = header.iter().position(|h| *h == "replication").unwrap();
    lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|cells| cells[rep] == row)
        .map(|cells| cells[idx].parse().unwrap())
        .unwrap()
}

#[test]
fn repeated_run_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "run",
        "--nodes",
        "100",
        "--days",
        "2",
        "--confirmed",
        "0.05",
        "--seed",
        "1",
        "--replications",
        "2",
    ];
    let first = lwsim(&args, a.path());
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let mut serial = args.to_vec();
    serial.extend(["--parallel", "1"]);
    assert!(lwsim(&serial, b.path()).status.success());
    assert_eq!(csv(a.path()), csv(b.path()));
}

#[test]
fn sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lwsim(
        &[
            "run",
            "--days",
            "0.2",
            "--replications",
            "3",
            "--sweep",
            "n_nodes=100,500,1000",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = csv(dir.path());
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9 + 3);
    assert_eq!(rows.iter().filter(|r| r.contains(",mean,")).count(), 3);
    assert!(text
        .lines()
        .next()
        .unwrap()
        .starts_with("n_nodes,replication,seed,"));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("n_nodes=500"));
}

#[test]
fn fully_confirmed_traffic_costs_goodput() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = [
        "run",
        "--nodes",
        "2000",
        "--days",
        "0.5",
        "--replications",
        "1",
    ];
    let mut c0 = base.to_vec();
    c0.extend(["--confirmed", "0.0"]);
    let mut c1 = base.to_vec();
    c1.extend(["--confirmed", "1.0"]);
    assert!(lwsim(&c0, a.path()).status.success());
    assert!(lwsim(&c1, b.path()).status.success());
    let g0 = column(&csv(a.path()), "goodput", "mean");
    let g1 = column(&csv(b.path()), "goodput", "mean");
    assert!(g1 < 0.3 * g0, "{g1} vs {g0}");
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (args, key) in [
        (vec!["run", "--nodes", "many"], "n_nodes"),
        (vec!["run", "--confirmed", "1.5"], "confirmed_fraction"),
        (
            vec!["run", "--set", "capture_threshold=0"],
            "capture_threshold",
        ),
        (vec!["run", "--set", "no_such_key=1"], "no_such_key"),
        (vec!["run", "--sweep", "max_attempts=3,99"], "max_attempts"),
    ] {
        let out = lwsim(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(key), "{args:?}: {err}");
    }
}

#[test]
fn scenario_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.conf");
    std::fs::write(
        &file,
        "# small\nn_nodes = 20\nsim_days = 0.1\nreplications = 1\nseed = 9\n",
    )
    .unwrap();
    let out = lwsim(
        &[
            "run",
            "--config",
            file.to_str().unwrap(),
            "--seed",
            "4",
            "--log",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = csv(dir.path());
    assert_eq!(column(&text, "seed", "0"), 4.0);
    assert!(dir.path().join("log_point0.txt").exists());

    std::fs::write(&file, "n_nodes 20\n").unwrap();
    let bad = lwsim(&["run", "--config", file.to_str().unwrap()], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = lwsim(
        &["run", "--nodes", "5", "--days", "0.01"],
        &blocker.join("sub"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn keys_lists_configuration() {
    let out = Command::new(env!("CARGO_BIN_EXE_lwsim"))
        .arg("keys")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["n_nodes", "confirmed_fraction", "shadowing", "max_attempts"] {
        assert!(text.lines().any(|l| l == key), "{key}");
    }
}
