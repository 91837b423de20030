use std::path::Path;
use std::process::{Command, Output};

fn kvbeam(args: &[&str], env: &[(&str, &str)], dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kvbeam"));
    cmd.args(args).current_dir(dir);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("KVBEAM_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn table(out: &Output) -> (Vec<String>, Vec<Vec<String>>, Vec<String>) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut meta = Vec::new();
    let mut footer = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(m) = line.strip_prefix("# ") {
            if header.is_empty() {
                meta.push(m.to_string());
            } else {
                footer.push(m.to_string());
            }
        } else if header.is_empty() {
            header = line.split(',').map(String::from).collect();
        } else {
            rows.push(line.split(',').map(String::from).collect());
        }
    }
    let _ = meta;
    (header, rows, footer)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn footer_value(footer: &[String], key: &str) -> f64 {
    let line = footer.iter().find(|l| l.starts_with("fit:")).expect("fit footer");
    let start = line.find(&format!("{key} = ")).expect("key present") + key.len() + 3;
    line[start..].split(',').next().unwrap().trim().parse().unwrap()
}

#[test]
fn spectrum_rows_are_sorted_and_match_reference_roots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[beam]\nc = 1.0\n[spectrum]\nn_min = 50\nn_max = 53\n").unwrap();
    let out = kvbeam(&["spectrum", "--config", "run.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows, _) = table(&out);
    assert_eq!(header, ["branch", "n", "status", "re", "im", "residual", "error", "pred_re", "pred_im"]);
    assert_eq!(rows.len(), 8);
    let keys: Vec<(i64, i64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(rows.iter().all(|r| r[2] == "ok"));
    let re: f64 = rows[0][3].parse().unwrap();
    let im: f64 = rows[0][4].parse().unwrap();
    assert!((re + 0.002530391028666986).abs() < 1e-12 && (im - 314.16159224838805).abs() < 1e-9);
    let re2: f64 = rows[4][3].parse().unwrap();
    assert!((re2 + 0.04259903756143136).abs() < 1e-12);
}

#[test]
fn empty_mode_range_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = kvbeam(
        &["spectrum", "--out", "roots.csv"],
        &[("KVBEAM_SPECTRUM__N_MIN", "10"), ("KVBEAM_SPECTRUM__N_MAX", "9")],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("roots.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, ["branch,n,status,re,im,residual,error,pred_re,pred_im"]);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let env = [("KVBEAM_DAMPING__KIND", "global"), ("KVBEAM_GRID__N_CELLS", "200"), ("KVBEAM_RESOLVENT__MODES", "[2, 6]")];
    for (name, threads) in [("a.csv", "1"), ("b.csv", "3")] {
        let out = kvbeam(&["resolvent", "--out", name, "--threads", threads], &env, dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stderr(&out).contains("wall time"));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("# seed: 42"));
    assert!(text.contains("kvbeam-cli"));
}

#[test]
fn conservative_simulation_has_flat_energy() {
    let dir = tempfile::tempdir().unwrap();
    let env = [
        ("KVBEAM_DAMPING__KIND", "zero"),
        ("KVBEAM_GRID__N_CELLS", "100"),
        ("KVBEAM_SIMULATE__T_FINAL", "20"),
        ("KVBEAM_SIMULATE__WINDOW", "[2.0, 20.0]"),
    ];
    let out = kvbeam(&["simulate"], &env, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows, footer) = table(&out);
    assert_eq!(header, ["t", "E", "E_t"]);
    let e: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(e.iter().all(|v| (v - e[0]).abs() <= 1e-10 * e[0]));
    assert!(footer_value(&footer, "p").abs() < 1e-6);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("hypothesis violated"));
}

#[test]
fn damped_simulation_loses_energy() {
    let dir = tempfile::tempdir().unwrap();
    let env = [("KVBEAM_GRID__N_CELLS", "100"), ("KVBEAM_SIMULATE__T_FINAL", "30"), ("KVBEAM_SIMULATE__WINDOW", "[3.0, 30.0]")];
    let out = kvbeam(&["simulate"], &env, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (_, rows, footer) = table(&out);
    let e: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(e[e.len() - 1] < 0.5 * e[0]);
    assert!(footer_value(&footer, "p") > 0.0);
}

#[test]
fn resolvent_scan_on_global_damping_grows_quadratically() {
    let dir = tempfile::tempdir().unwrap();
    let env = [("KVBEAM_DAMPING__KIND", "global"), ("KVBEAM_GRID__N_CELLS", "800")];
    let out = kvbeam(&["resolvent"], &env, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (_, rows, footer) = table(&out);
    assert_eq!(rows.len(), 31);
    let slope = footer_value(&footer, "slope");
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\n[grid]\nn_cels = 3\n").unwrap();
    let out = kvbeam(&["simulate", "--config", "bad.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("n_cels"), "{err}");

    std::fs::write(dir.path().join("bad2.toml"), "[beam]\nk1 = -2.0\n").unwrap();
    let out = kvbeam(&["simulate", "--config", "bad2.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = kvbeam(&["spectrum"], &[("KVBEAM_SPECTRUM__COLOUR", "1")], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kvbeam(&["simulate", "--config", "missing.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kvbeam(&["frobnicate"], &[], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let env = [
        ("KVBEAM_BEAM__LENGTH", "1e200"),
        ("KVBEAM_GRID__N_CELLS", "8"),
        ("KVBEAM_SIMULATE__T_FINAL", "1.0"),
        ("KVBEAM_SIMULATE__WINDOW", "[0.1, 1.0]"),
    ];
    let out = kvbeam(&["simulate", "--out", "trace.csv"], &env, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn verify_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = kvbeam(&["verify"], &[("KVBEAM_VERIFY__SUITES", "[\"identities\"]")], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows, _) = table(&out);
    assert_eq!(header, ["criterion", "suite", "outcome", "check", "value", "bound", "pass"]);
    assert!(rows.len() >= 8);
    assert!(rows.iter().all(|r| r[2] == "pass" && r[6] == "true"));
    assert!(stderr(&out).contains("PASS"));
}

#[test]
fn verify_decay_on_conservative_profile_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("v.toml"),
        "[damping]\nkind = \"zero\"\n[verify]\nsuites = [\"decay\"]\nuse_damping = true\n",
    )
    .unwrap();
    let out = kvbeam(&["verify", "--config", "v.toml"], &[], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (_, rows, _) = table(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "not-applicable (H violated)");
}

#[test]
fn verify_exits_nonzero_when_a_criterion_fails() {
    // the literal wavenumber sum identity does not hold, so this suite fails
    let dir = tempfile::tempdir().unwrap();
    let out = kvbeam(&["verify"], &[("KVBEAM_VERIFY__SUITES", "[\"properties\", \"remainder\"]")], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let (_, rows, footer) = table(&out);
    assert!(rows.iter().any(|r| r[1] == "remainder" && r[2] == "pass"));
    assert!(rows.iter().any(|r| r[3] == "s_sum_equals_lambda_sq" && r[6] == "false"));
    assert!(footer.iter().any(|f| f.starts_with("properties failed")));
}
