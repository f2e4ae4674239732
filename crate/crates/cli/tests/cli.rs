use std::path::Path;
use std::process::{Command, Output};

fn dnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parses a CSV file with a header into (columns, rows of f64; blank -> NaN).
fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn sidecar(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(format!("{}.json", path.display())).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn no_arguments_prints_help() {
    let o = dnls(&[]);
    assert!(o.status.success());
    let out = stdout(&o);
    for cmd in ["constants", "phase-scan", "gibbs-run", "dnls-evolve"] {
        assert!(out.contains(cmd), "{out}");
    }
}

#[test]
fn invalid_parameter_is_reported_before_work() {
    let o = dnls(&["gibbs-run", "--theta", "-1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
}

#[test]
fn malformed_grid_names_the_flag() {
    let o = dnls(&["phase-scan", "--no-cache", "--nu", "1:2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--nu") && err.contains("lo:hi:count"), "{err}");
}

#[test]
fn xi_curve_matches_stationarity_condition() {
    let o = dnls(&["xi-curve", "--p-min", "2", "--p-max", "5", "--count", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (cols, rows) = read_csv(&stdout(&o));
    assert_eq!(cols, ["p", "t", "xi", "argmin"]);
    assert_eq!(rows.len(), 4);
    for r in rows {
        let e = 0.5 * (r[0] + 1.0);
        // interior minimum of -ln(1-a)/a^e solves a = -e (1-a) ln(1-a)
        let g = |a: f64| a + e * (1.0 - a) * (-a).ln_1p();
        let (mut lo, mut hi) = (1e-6, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let value = -(-a).ln_1p() / a.powf(e);
        assert!((r[2] - value).abs() < 1e-9 * value, "p={} {} vs {value}", r[0], r[2]);
        assert!((r[3] - a).abs() < 1e-5, "argmin {} vs {a}", r[3]);
    }
    let o = dnls(&["xi-curve", "--t", "0.5", "--count", "2"]);
    let (_, rows) = read_csv(&stdout(&o));
    assert!(rows.iter().all(|r| r[2] == 0.0 && r[3].is_nan()));
}

#[test]
fn constants_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let cache = dir.path().join("cache");
    let o = dnls(&[
        "constants",
        "--d",
        "3",
        "--cache-dir",
        cache.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("C_3 = 0.2527"), "{}", stdout(&o));
    let (_, rows) = read_csv(&std::fs::read_to_string(&out).unwrap());
    assert!((rows[0][1] - 0.252731).abs() < 1e-6);
    let side = sidecar(&out);
    assert_eq!(side["config"]["command"], "constants");
    assert_eq!(side["provenance"]["d"], "flag");
    assert_eq!(side["provenance"]["method"], "default");
    assert_eq!(side["columns"][1], "C_d");
    let hash = side["caches"][0]["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(!side["build"]["version"].as_str().unwrap().is_empty());
}

#[test]
fn divergent_dimension_has_its_own_exit_code() {
    let o = dnls(&["constants", "--no-cache", "--d", "2"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("xi.csv");
    std::fs::write(
        &cfg,
        r#"{"command": "xi-curve", "params": {"p-min": 2.0, "p-max": 3.0, "count": 5}, "seed": 9}"#,
    )
    .unwrap();
    let o = dnls(&[
        "--config",
        cfg.to_str().unwrap(),
        "xi-curve",
        "--count",
        "2",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[1][0]), (2.0, 3.0));
    let side = sidecar(&out);
    assert_eq!(side["seed"], 9);
    assert_eq!(side["provenance"]["count"], "flag");
    assert_eq!(side["provenance"]["p-min"], "file");
    assert_eq!(side["provenance"]["t"], "default");
    // the resolved config can be fed back in
    let again = dir.path().join("again.json");
    let mut replay = side["config"].clone();
    replay["output"] = serde_json::Value::Null;
    std::fs::write(&again, serde_json::to_string(&replay).unwrap()).unwrap();
    let o2 = dnls(&["--config", again.to_str().unwrap(), "xi-curve"]);
    assert!(o2.status.success(), "{}", stderr(&o2));
    assert_eq!(stdout(&o2), std::fs::read_to_string(&out).unwrap());
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"command": "xi-curve", "params": {"pmin": 2.0}}"#).unwrap();
    let o = dnls(&["--config", cfg.to_str().unwrap(), "xi-curve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pmin"), "{}", stderr(&o));
    std::fs::write(&cfg, r#"{"command": "soliton"}"#).unwrap();
    let o = dnls(&["--config", cfg.to_str().unwrap(), "xi-curve"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gibbs_checkpoint_resume_continues_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    let base = ["gibbs-run", "--n", "3", "--thin", "5", "--seed", "4"];
    let run = |extra: &[&str], out: &Path| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["-o", out.to_str().unwrap()]);
        let o = dnls(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out).unwrap()
    };
    let whole = run(&["--sweeps", "400", "--burn-in", "500"], &dir.path().join("whole.csv"));
    let first = run(
        &[
            "--sweeps",
            "200",
            "--burn-in",
            "500",
            "--checkpoint",
            ck.to_str().unwrap(),
        ],
        &dir.path().join("a.csv"),
    );
    let second = run(
        &["--sweeps", "200", "--burn-in", "0", "--resume", ck.to_str().unwrap()],
        &dir.path().join("b.csv"),
    );
    let joined: Vec<&str> = first.lines().chain(second.lines().skip(1)).collect();
    assert_eq!(joined, whole.lines().collect::<Vec<_>>());
    assert!(whole.starts_with("step,mass_frac,max_frac,part_ratio,E_grad,E_nl"));

    // a checkpoint for other parameters is refused
    let o = dnls(&[
        "gibbs-run",
        "--n",
        "3",
        "--theta",
        "2",
        "--resume",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gibbs_partition_check_at_zero_nu() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = dnls(&[
        "gibbs-run",
        "--n",
        "2",
        "--nu",
        "0",
        "--burn-in",
        "0",
        "--sweeps",
        "10",
        "--partition",
        "--partition-samples",
        "20000",
        "--seed",
        "3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = sidecar(&out);
    assert_eq!(side["checks"][0]["name"], "partition-oracle");
    assert_eq!(side["checks"][0]["passed"], true);
}

#[test]
fn dnls_evolve_conserves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = dnls(&[
        "dnls-evolve",
        "--n",
        "5",
        "--t-final",
        "0.3",
        "--sample-every",
        "50",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (cols, rows) = read_csv(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(cols, ["t", "mass", "energy", "max_modulus"]);
    assert_eq!(rows.len(), 7);
    for r in &rows {
        assert!((r[1] - rows[0][1]).abs() < 1e-9 * rows[0][1]);
        assert!((r[2] - rows[0][2]).abs() < 1e-9 * rows[0][2].abs());
    }
    // an impossible tolerance trips the check and exit status 1
    let o = dnls(&["dnls-evolve", "--n", "5", "--t-final", "0.3", "--drift-tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("check failed"));
}

#[test]
fn small_phase_scan_is_a_staircase() {
    let o = dnls(&[
        "phase-scan",
        "--no-cache",
        "--theta",
        "log:0.2:4:4",
        "--nu",
        "5,20,80",
        "--a-grid",
        "128",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,nu,F,a_star,region,err_flags"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let solitonic = |r: &Vec<&str>| r[4] == "solitonic";
    for a in rows.iter().filter(|r| solitonic(r)) {
        let (ta, na): (f64, f64) = (a[0].parse().unwrap(), a[1].parse().unwrap());
        assert!(na > 10.8, "solitonic below the excitation threshold: {a:?}");
        for b in &rows {
            let (tb, nb): (f64, f64) = (b[0].parse().unwrap(), b[1].parse().unwrap());
            if tb >= ta && nb >= na {
                assert!(solitonic(b), "{a:?} then {b:?}");
            }
        }
    }
    // nu = 5 is below threshold: no atom, F independent of nu
    for r in rows.iter().filter(|r| r[1] == "5.0") {
        assert_eq!(r[3], "0.0");
        assert_eq!(r[4], "dispersive");
    }
    assert!(rows.iter().any(solitonic));
}
