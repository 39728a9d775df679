use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn microinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// `table1.cfg` with one line replaced, written into `dir`.
fn variant(dir: &TempDir, from: &str, to: &str) -> PathBuf {
    let base = fs::read_to_string(scenario("table1.cfg")).unwrap();
    assert!(base.contains(from), "{from} not in table1.cfg");
    let path = dir.path().join("variant.cfg");
    fs::write(&path, base.replace(from, to)).unwrap();
    path
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| {
            l.strip_prefix(key)?
                .trim()
                .strip_prefix('=')?
                .trim()
                .parse()
                .ok()
        })
        .unwrap_or_else(|| panic!("no {key} in report:\n{report}"))
}

fn csv_rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn design_table1_passes() {
    let dir = TempDir::new().unwrap();
    let kv = dir.path().join("design.txt");
    let cfg = scenario("table1.cfg");
    let o = microinv(&[
        "design",
        cfg.to_str().unwrap(),
        "--out",
        kv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("overall: PASS"));
    assert!(fs::read_to_string(kv).unwrap().contains("all_pass = true"));
}

#[test]
fn design_large_l1_fails_with_name() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "L1_H = 8e-6", "L1_H = 20e-6");
    let o = microinv(&["design", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(
        text(&o.stderr).contains("l1_dcm_bound"),
        "{}",
        text(&o.stderr)
    );
}

#[test]
fn config_problems_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.cfg");
    assert_eq!(code(&microinv(&["design", missing.to_str().unwrap()])), 2);
    let bad = variant(&dir, "Ro_ohm = 194", "Ro_ohm = 194\nbogus = 1");
    assert_eq!(code(&microinv(&["design", bad.to_str().unwrap()])), 2);
    assert_eq!(
        code(&microinv(&[
            "simulate",
            bad.to_str().unwrap(),
            "--out",
            "x"
        ])),
        2
    );
}

#[test]
fn steady_table() {
    let cfg = scenario("table1.cfg");
    let o = microinv(&["steady", cfg.to_str().unwrap(), "--angles", "181"]);
    assert_eq!(code(&o), 0);
    let (h, rows) = csv_rows(&text(&o.stdout));
    assert_eq!(rows.len(), 181);
    let d = column(&h, &rows, "d");
    let peak = d.iter().cloned().fold(0.0, f64::max);
    assert!((peak - 0.777).abs() <= 1e-3, "{peak}");
    for name in [
        "d",
        "d0",
        "d_il1",
        "d_il2",
        "il1_valley",
        "il1_peak",
        "idc_avg",
        "i2_avg",
    ] {
        assert_eq!(column(&h, &rows, name)[0], 0.0, "{name} at angle 0");
    }

    let o = microinv(&["steady", cfg.to_str().unwrap(), "--angles", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn steady_flags_ccm_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = variant(&dir, "L1_H = 8e-6", "L1_H = 12e-6");
    let o = microinv(&["steady", cfg.to_str().unwrap(), "--angles", "91"]);
    assert_eq!(code(&o), 0);
    let (h, rows) = csv_rows(&text(&o.stdout));
    assert_eq!(rows.len(), 91);
    let flags = column(&h, &rows, "ccm_violation");
    assert!(flags.contains(&1.0));
    assert_eq!(flags[0], 0.0);

    let overflow = variant(&dir, "L1_H = 8e-6", "L1_H = 20e-6");
    let o = microinv(&["steady", overflow.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_rated_and_reanalyze() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario("table1.cfg");
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let o = microinv(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--t-end",
            "0.1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    }
    let report = fs::read_to_string(out1.join("report.txt")).unwrap();
    let vo_peak = report_value(&report, "vo_peak");
    assert!((vo_peak - 311.0).abs() <= 0.05 * 311.0, "{vo_peak}");
    assert!(report_value(&report, "thd_pct") <= 2.5);
    assert!(report_value(&report, "dcm_occupancy") >= 0.99);

    for f in ["waveform.csv", "report.txt"] {
        assert_eq!(
            fs::read(out1.join(f)).unwrap(),
            fs::read(out2.join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }

    let wave = out1.join("waveform.csv");
    let o = microinv(&["analyze", cfg.to_str().unwrap(), wave.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let again = text(&o.stdout);
    assert!((report_value(&again, "thd_pct") - report_value(&report, "thd_pct")).abs() < 0.05);
    assert!((report_value(&again, "vo_rms") - report_value(&report, "vo_rms")).abs() < 0.5);
}

#[test]
fn simulate_usage_and_divergence() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario("table1.cfg");
    let out = dir.path().join("o");
    let o = microinv(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--t-end",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);

    let wild = variant(&dir, "Vdc_V = 35", "Vdc_V = 1e7");
    let o = microinv(&[
        "simulate",
        wild.to_str().unwrap(),
        "--t-end",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(
        text(&o.stderr).contains("divergence"),
        "{}",
        text(&o.stderr)
    );
}

#[test]
fn simulate_grid_phase() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario("grid.cfg");
    let out = dir.path().join("g");
    let o = microinv(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let report = text(&o.stdout);
    assert!(report_value(&report, "i2_phase_deg").abs() < 2.0);
    assert!(report_value(&report, "io_phase_deg").abs() < 4.0);
}

#[test]
fn sweep_ipv_power_span() {
    let cfg = scenario("table1.cfg");
    let o = microinv(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "Ipv",
        "--range",
        "1.4:7.1",
        "--steps",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let (h, rows) = csv_rows(&text(&o.stdout));
    assert_eq!(rows.len(), 5);
    assert_eq!(column(&h, &rows, "index"), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    assert_eq!(
        column(&h, &rows, "value"),
        vec![1.4, 2.825, 4.25, 5.675, 7.1]
    );
    let p = column(&h, &rows, "p_out_w");
    assert!(p.windows(2).all(|w| w[1] > w[0]));
    assert!(
        (40.0..60.0).contains(&p[0]) && (230.0..260.0).contains(&p[4]),
        "{p:?}"
    );
    let eta = column(&h, &rows, "eta");
    assert!(eta.iter().all(|e| (0.8..1.0).contains(e)));
}

#[test]
fn sweep_l1_leaves_dcm_past_bound() {
    let cfg = scenario("table1.cfg");
    let o = microinv(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "L1",
        "--range",
        "10e-6:12e-6",
        "--steps",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let (h, rows) = csv_rows(&text(&o.stdout));
    let dcm = column(&h, &rows, "dcm_occupancy");
    assert_eq!(dcm[0], 1.0);
    assert!(dcm[1] < 1.0, "{dcm:?}");
}

#[test]
fn sweep_errors() {
    let cfg = scenario("table1.cfg");
    let c = cfg.to_str().unwrap();
    let o = microinv(&[
        "sweep",
        c,
        "--param",
        "L1",
        "--range",
        "2e-5:1e-5",
        "--steps",
        "3",
    ]);
    assert_eq!(code(&o), 2);
    let o = microinv(&[
        "sweep", c, "--param", "Lg", "--range", "1:2", "--steps", "3",
    ]);
    assert_eq!(code(&o), 2);

    let o = microinv(&[
        "sweep", c, "--param", "Vdc", "--range", "35:1e7", "--steps", "2", "--t-end", "0.04",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let (h, rows) = csv_rows(&text(&o.stdout));
    let status = h.iter().position(|x| x == "status").unwrap();
    assert_eq!(rows[0][status], "ok");
    assert!(rows[1][status].starts_with("error"), "{:?}", rows[1]);
    assert_eq!(rows[1].len(), h.len());
}
