use std::path::Path;
use std::process::{Command, Output};

fn geosnap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosnap"))
        .args(args)
        .current_dir(dir)
        .env_remove("GEOSNAP_OUT_DIR")
        .output()
        .unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn default_manifest_lists_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let o = geosnap(&["simulate", "--out", "run"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read(tmp.path().join("run/manifest.toml"));
    for needle in [
        "chi_mhz = 2.5",
        "gamma_decay_mhz = 0.00145",
        "gamma_phi_mhz = 0.00145",
        "n_max = 10",
        "rtol",
    ] {
        assert!(m.contains(needle), "{needle} not in manifest:\n{m}");
    }
    let chi: f64 = m
        .lines()
        .find_map(|l| l.strip_prefix("chi_rad_s = "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(chi, 2.5 * std::f64::consts::TAU * 1e6);
    for f in ["report.csv", "error_budget.csv", "trajectory.csv"] {
        assert!(tmp.path().join("run").join(f).exists());
    }
}

#[test]
fn rwa_closed_report_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[run]\ndecoherence = false\ntrajectory = false\n",
    );
    let o = geosnap(
        &["simulate", "--config", &cfg, "--mode", "rwa", "--out", "a"],
        tmp.path(),
    );
    assert!(o.status.success());
    let r = read(tmp.path().join("a/report.csv"));
    assert!(value(&r, "fidelity_closed") >= 1.0 - 1e-6);
    assert!(!r.contains("fidelity_open"));
    for (scheme, want) in [("oss", "oss"), ("pd", "pd")] {
        let o = geosnap(
            &[
                "simulate", "--config", &cfg, "--mode", "rwa", "--scheme", scheme, "--out", scheme,
            ],
            tmp.path(),
        );
        assert!(o.status.success());
        let r = read(tmp.path().join(scheme).join("report.csv"));
        assert!(r.contains(&format!("scheme,{want}")));
        assert!(value(&r, "fidelity_closed") >= 1.0 - 1e-6);
    }
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[run]\nomega_ratoi = 0.2\n");
    let o = geosnap(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega_ratoi"));

    let cfg = write_config(tmp.path(), "[system]\nchi_mhz = -1.0\n");
    let o = geosnap(&["simulate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.chi_mhz"));

    let o = geosnap(&["simulate", "--config", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unwritable_output_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), "").unwrap();
    let o = geosnap(&["correlate", "--out", "blocker/sub"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geosnap"))
        .args(["figure", "fig3b"])
        .current_dir(tmp.path())
        .env("GEOSNAP_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from_env/fig3b.csv").exists());
}

#[test]
fn gate_time_figure() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(geosnap(&["figure", "fig3b", "--out", "f"], tmp.path())
        .status
        .success());
    let text = read(tmp.path().join("f/fig3b.csv"));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("omega_ratio,gate_time_oss_s,gate_time_pd_s,ratio")
    );
    let mut n = 0;
    for l in lines {
        let ratio: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!((ratio - 0.5).abs() < 0.01, "{l}");
        n += 1;
    }
    assert_eq!(n, 25);
}

#[test]
fn correlation_has_unit_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(geosnap(&["figure", "corrC", "--out", "c"], tmp.path())
        .status
        .success());
    let text = read(tmp.path().join("c/correlation.csv"));
    let mut diag = 0;
    for l in text.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        if f[1] == f[2] {
            assert_eq!(f[3].parse::<f64>().unwrap(), 1.0);
            diag += 1;
        }
    }
    assert_eq!(diag, 15);
    assert!(tmp.path().join("c/rho02.csv").exists());
}

#[test]
fn trajectories_for_both_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[run]\ntrajectory_points = 21\n");
    assert!(geosnap(
        &["figure", "fig2bc", "--config", &cfg, "--out", "t"],
        tmp.path()
    )
    .status
    .success());
    for f in ["fig2bc_unoptimized.csv", "fig2bc_optimized.csv"] {
        let text = read(tmp.path().join("t").join(f));
        assert_eq!(text.lines().count(), 1 + 3 * 21);
        // Every trajectory starts at the north pole.
        assert!(text.lines().nth(1).unwrap().ends_with(",1.000000000000e0"));
    }
}

#[test]
fn sweeps_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sweep]\nkind = \"robustness\"\nerror_points = 3\n[run]\nscheme = \"pd\"\n",
    );
    for (dir, threads) in [("a", "1"), ("b", "2")] {
        let o = geosnap(
            &[
                "sweep",
                "--config",
                &cfg,
                "--out",
                dir,
                "--threads",
                threads,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = read(tmp.path().join("a/sweep.csv"));
    assert_eq!(a, read(tmp.path().join("b/sweep.csv")));
    assert_eq!(a.lines().next(), Some("epsilon,eta,fidelity"));
    assert_eq!(a.lines().count(), 10);
}

#[test]
fn optimize_never_worsens() {
    let tmp = tempfile::tempdir().unwrap();
    let o = geosnap(&["optimize", "--out", "o", "--scheme", "oss"], tmp.path());
    assert!(o.status.success());
    let s = read(tmp.path().join("o/adjust_summary.csv"));
    assert!(value(&s, "infidelity_after") <= value(&s, "infidelity_before"));
    assert_eq!(read(tmp.path().join("o/adjustment.csv")).lines().count(), 4);
}
