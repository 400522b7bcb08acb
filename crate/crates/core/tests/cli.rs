//! End-to-end runs of the `qhweak` binary on a reduced desk configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qhweak::config::RunConfig;
use qhweak::report::{METER_HEADER, WEAK_VALUE_HEADER};
use tempfile::TempDir;

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.grid.r_max = 1500.0;
    cfg.grid.n_pts = 29_981;
    cfg.window.e_min = -0.5 / 5.0f64.powi(2);
    cfg.window.e_max = -0.5 / 18.0f64.powi(2);
    cfg.wavepacket.center = 150.0;
    cfg.sweep.linspace.as_mut().unwrap().count = 41;
    cfg
}

struct Workdir {
    dir: TempDir,
}

impl Workdir {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write_config(&self, name: &str, cfg: &RunConfig) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, cfg.to_toml_string().unwrap()).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_qhweak"))
            .args(args)
            .current_dir(self.dir.path())
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn is_e12(field: &str) -> bool {
    let Some((mantissa, exp)) = field.split_once('e') else { return false };
    let digits = mantissa.strip_prefix('-').unwrap_or(mantissa);
    let exp_digits = exp.strip_prefix(['+', '-']).unwrap_or("");
    digits.len() == 14
        && digits.as_bytes()[1] == b'.'
        && digits.chars().filter(|c| c.is_ascii_digit()).count() == 13
        && exp_digits.len() >= 2
        && exp_digits.chars().all(|c| c.is_ascii_digit())
}

fn column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

fn floats(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|v| v.parse().unwrap()).collect()
}

#[test]
fn help_and_usage_errors() {
    let w = Workdir::new();
    assert_eq!(code(&w.run(&["--help"])), 0);
    assert_eq!(code(&w.run(&["--version"])), 0);
    assert_eq!(code(&w.run(&[])), 1);
    assert_eq!(code(&w.run(&["frobnicate"])), 1);
    assert_eq!(code(&w.run(&["weakvalue", "--observable", "spin"])), 1);
    assert_eq!(code(&w.run(&["spectrum", "--config", "missing.toml"])), 1);
    std::fs::write(w.path("bad.toml"), "schema_version = 99\n").unwrap();
    let out = w.run(&["spectrum", "--config", "bad.toml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error"));
    std::fs::write(w.path("junk.json"), "{}").unwrap();
    assert_eq!(code(&w.run(&["metric", "--model", "junk.json"])), 1);
}

#[test]
fn numerical_failure_exits_with_two() {
    let w = Workdir::new();
    let mut cfg = small_config();
    // Demands every metric eigenvalue exceed 10, which no basis satisfies.
    cfg.tolerances.metric = 10.0;
    let p = w.write_config("strict.toml", &cfg);
    let out = w.run(&["build", "--config", s(&p)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("positive definite"));
}

#[test]
fn model_round_trip_gives_identical_outputs() {
    let w = Workdir::new();
    let cfg = w.write_config("small.toml", &small_config());
    let model = w.path("model.json");
    let out = w.run(&["build", "--config", s(&cfg), "--model", s(&model)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    for (cmd, name) in [("spectrum", "spectrum"), ("weakvalue", "weakvalue"), ("metersim", "metersim")] {
        let direct = w.path(&format!("{name}_direct.csv"));
        let a = w.path(&format!("{name}_a.csv"));
        let b = w.path(&format!("{name}_b.csv"));
        assert_eq!(code(&w.run(&[cmd, "--config", s(&cfg), "--out", s(&direct)])), 0);
        assert_eq!(code(&w.run(&[cmd, "--model", s(&model), "--out", s(&a)])), 0);
        let out = w.run(&[cmd, "--model", s(&model), "--config", s(&cfg), "--out", s(&b)]);
        assert_eq!(code(&out), 0);
        assert!(!stderr(&out).contains("differs"), "{}", stderr(&out));
        assert_eq!(read(&a), read(&b), "{cmd}");
        assert_eq!(read(&a), read(&direct), "{cmd}");
    }

    // A second build from the same config reproduces the file byte for byte.
    let again = w.path("model2.json");
    assert_eq!(code(&w.run(&["build", "--config", s(&cfg), "--model", s(&again)])), 0);
    assert!(std::fs::read(&model).unwrap() == std::fs::read(&again).unwrap());

    // Analysis settings may change; the stored basis is reused with a warning.
    let mut other = small_config();
    other.sweep.linspace.as_mut().unwrap().count = 5;
    let other = w.write_config("other.toml", &other);
    let out = w.run(&["weakvalue", "--model", s(&model), "--config", s(&other), "--out", "-"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("differs"));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 5 * 3);
}

#[test]
fn weak_value_csv_follows_the_contract() {
    let w = Workdir::new();
    let cfg = w.write_config("small.toml", &small_config());
    let csv = w.path("wv.csv");
    let out = w.run(&["weakvalue", "--config", s(&cfg), "--observable", "energy", "--observable", "momentum", "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = read(&csv);
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), WEAK_VALUE_HEADER.join(","));
    assert_eq!(
        WEAK_VALUE_HEADER[..9].join(", "),
        "t_over_period, t_au, observable, naive_re, naive_im, corrected_re, corrected_im, denom_naive_abs, denom_corrected_abs"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 41 * 2);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 10);
        assert_eq!(row[2], if i % 2 == 0 { "energy" } else { "momentum" });
        assert!(row[..2].iter().chain(&row[3..9]).all(|f| is_e12(f)), "{row:?}");
        assert_eq!(row[9], "");
    }
    let t = floats(&text, "t_over_period");
    assert_eq!(t[0], 0.0);
    assert_eq!(t[t.len() - 1], 1.0);
}

#[test]
fn hydrogenic_model_has_a_flat_metric() {
    let w = Workdir::new();
    // The states only live on [r0, Rmax]; the omitted core region makes their
    // overlaps of order r0³, so a small r0 on a fine grid is needed.
    let mut hcfg = RunConfig::hydrogenic();
    hcfg.grid.r0 = 0.05;
    hcfg.grid.n_pts = 299_991;
    hcfg.window.e_min = -0.5 / 5.5f64.powi(2);
    hcfg.wavepacket.center = 150.0;
    hcfg.sweep.linspace.as_mut().unwrap().count = 21;
    let cfg = w.write_config("h.toml", &hcfg);
    let out = w.run(&["metric", "--config", s(&cfg), "--out", "-"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_off_diagonal"].as_f64().unwrap() < 1e-6, "{report}");

    let out = w.run(&["weakvalue", "--config", s(&cfg), "--observable", "energy", "--out", "-"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let naive = floats(&text, "naive_re");
    let corrected = floats(&text, "corrected_re");
    for (n, c) in naive.iter().zip(&corrected) {
        assert!((n - c).abs() < 1e-6 * c.abs(), "{n} vs {c}");
    }
}

#[test]
fn meter_csv_and_sigma_scaling() {
    let w = Workdir::new();
    let mut base = small_config();
    base.meter.g = vec![0.02, 0.01];
    let mut wide = base.clone();
    wide.meter.sigma = 2.0;
    wide.meter.half_width = 32.0;
    let c1 = w.write_config("s1.toml", &base);
    let c2 = w.write_config("s2.toml", &wide);
    let m1 = w.path("m1.csv");
    let m2 = w.path("m2.csv");
    assert_eq!(code(&w.run(&["metersim", "--config", s(&c1), "--out", s(&m1)])), 0);
    assert_eq!(code(&w.run(&["metersim", "--config", s(&c2), "--out", s(&m2)])), 0);
    let t1 = read(&m1);
    let t2 = read(&m2);
    assert_eq!(t1.lines().next().unwrap(), METER_HEADER.join(","));
    assert_eq!(t1.lines().count(), 1 + 2);
    let dx1 = floats(&t1, "delta_x");
    let dx2 = floats(&t2, "delta_x");
    let im = floats(&t1, "corrected_im");
    for k in 0..2 {
        let g = base.meter.g[k];
        assert!((dx2[k] / dx1[k] - 4.0).abs() < 0.08, "ratio {}", dx2[k] / dx1[k]);
        assert!((dx1[k] / (2.0 * g * im[k]) - 1.0).abs() < 0.02);
    }
}

#[test]
fn recurrence_and_selftest_reports() {
    let w = Workdir::new();
    let cfg = w.write_config("small.toml", &small_config());
    let out = w.run(&["recurrence", "--config", s(&cfg), "--out", "-"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["mean_energy", "kepler_period_au", "recurrence_au", "recurrence_over_period", "autocorrelation"] {
        assert!(rep[key].is_number(), "{key}");
    }
    let out = w.run(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}

#[test]
fn config_command_prints_a_loadable_config() {
    let w = Workdir::new();
    let out = w.run(&["config", "--out", "-"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::desk());
}
