//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `-- --nocapture` to see the lines on success.

mod common;

use microinv_core::analysis::{self, AnalysisReport};
use microinv_core::averaged;
use microinv_core::control::ControllerHandle;
use microinv_core::design::{self, cutoff_frequency};
use microinv_core::sim::{dynamics::Circuit, run_simulation, SimConfig};
use microinv_core::{CircuitParams, HalfCycle, LoadModel, ModeId, OperatingPoint};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

struct Rated {
    report: AnalysisReport,
    final_d_peak: f64,
    shape: Result<String, String>,
    mode3_drift: f64,
}

/// Rise, fall and flat intervals of iL1 in the period nearest the line peak
/// of the final cycle.
fn il1_shape(out: &microinv_core::sim::SimOutput) -> Result<String, String> {
    let rec = &out.record;
    let t_peak = rec.duration() - 0.75 / rec.fg;
    let p = rec
        .periods
        .iter()
        .min_by(|a, b| {
            (a.t_mid() - t_peak)
                .abs()
                .total_cmp(&(b.t_mid() - t_peak).abs())
        })
        .ok_or("no periods")?;
    let s = rec.window(p.t_start, p.t_start + p.ts);
    let modes: Vec<ModeId> = s.iter().map(|x| x.state.mode).collect();
    if !modes.windows(2).all(|w| w[0].number() <= w[1].number()) {
        return Err(format!("mode order {modes:?}"));
    }
    let by = |m: ModeId| {
        s.iter()
            .filter(move |x| x.state.mode == m)
            .map(|x| x.state.i_l1)
    };
    let rise: Vec<f64> = by(ModeId::I).collect();
    let fall: Vec<f64> = by(ModeId::II).collect();
    let flat: Vec<f64> = by(ModeId::III).collect();
    if rise.len() < 2 || fall.len() < 2 || flat.len() < 2 {
        return Err(format!(
            "interval samples {}/{}/{}",
            rise.len(),
            fall.len(),
            flat.len()
        ));
    }
    let swing = rise
        .iter()
        .chain(&fall)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - flat[0];
    let spread = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let rising = rise.windows(2).all(|w| w[1] > w[0]);
    let falling = fall.windows(2).all(|w| w[1] < w[0]);
    if rising && falling && spread < 0.02 * swing {
        Ok(format!(
            "t={:.5}s rise {} falls {} flat {} samples, flat spread {:.3}% of swing",
            p.t_start,
            rise.len(),
            fall.len(),
            flat.len(),
            100.0 * spread / swing
        ))
    } else {
        Err(format!(
            "rising {rising} falling {falling} flat spread {spread:.4} A"
        ))
    }
}

fn rated() -> Rated {
    let s = common::table1();
    let out = common::run(&s);
    let report = analysis::analyze(&out.record, Some(&s.params)).unwrap();
    let mode3_drift = out
        .record
        .samples
        .iter()
        .filter(|x| x.state.mode == ModeId::III)
        .map(|x| x.state.diode_current().abs())
        .fold(0.0, f64::max);
    Rated {
        report,
        final_d_peak: out.diagnostics.final_d_peak,
        shape: il1_shape(&out),
        mode3_drift,
    }
}

fn criterion_1(r: &Rated) -> Outcome {
    let s = common::table1();
    let cf = averaged::d_peak(s.op.ipv, &s.params, s.op.ts(), s.op.vdc).unwrap();
    let sim = r.report.d_peak_measured;
    let pass = within(cf, 0.8, 0.05) && within(sim, 0.8, 0.05) && (cf - 0.777).abs() < 0.001;
    Outcome {
        id: 1,
        name: "peak duty",
        pass,
        detail: format!(
            "closed form {cf:.4}, simulated {sim:.4} (controller {:.4}), target 0.8 +/- 5%",
            r.final_d_peak
        ),
    }
}

fn criterion_2(r: &Rated) -> Outcome {
    let v = r.report.vo_peak;
    Outcome {
        id: 2,
        name: "voltage gain",
        pass: within(v, 311.0, 0.05),
        detail: format!(
            "vo_peak {v:.2} V (fundamental {:.2} V, rms {:.2} V), target 311 V +/- 5%",
            r.report.vo_fundamental, r.report.vo_rms
        ),
    }
}

fn criterion_3(r: &Rated) -> Outcome {
    let t = r.report.thd_pct;
    Outcome {
        id: 3,
        name: "output THD",
        pass: (0.5..=2.5).contains(&t),
        detail: format!("THD {t:.3}%, band [0.5, 2.5]%"),
    }
}

fn criterion_4(r: &Rated) -> Outcome {
    let occ = r.report.dcm_occupancy;
    let pass = occ >= 0.99 && r.shape.is_ok() && r.mode3_drift <= 1e-3;
    let shape = match &r.shape {
        Ok(s) => s.clone(),
        Err(e) => format!("shape check failed: {e}"),
    };
    Outcome {
        id: 4,
        name: "DCM operation",
        pass,
        detail: format!(
            "occupancy {occ:.4} (>= 0.99), max |iL1+iL2| in ModeIII {:.2e} A; {shape}",
            r.mode3_drift
        ),
    }
}

fn criterion_5(r: &Rated) -> Outcome {
    let (sep, cuk) = (r.report.vc1_sepic_avg, r.report.vc1_cuk_peak);
    Outcome {
        id: 5,
        name: "vC1 asymmetry",
        pass: within(sep, 35.0, 0.05) && within(cuk, 346.0, 0.05),
        detail: format!("Sepic mean {sep:.2} V (35 +/- 5%), Cuk peak {cuk:.2} V (346 +/- 5%)"),
    }
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for d in [0.3, 0.5, 0.777] {
        let (_, op, out) = common::clamped_dc_run(d, 400);
        let settled = &out.record.periods[200..];
        let mut dev = 0.0_f64;
        for p in settled {
            let gain = p.mean_vo() / op.vdc;
            let d0 = p.d0();
            let law = averaged::voltage_gain(d, d0, HalfCycle::Sepic).unwrap();
            dev = dev.max((gain - law).abs() / law);
        }
        worst = worst.max(dev);
        parts.push(format!("D={d}: max dev {:.3}%", 100.0 * dev));
    }
    Outcome {
        id: 6,
        name: "simulator vs gain law",
        pass: worst <= 0.02,
        detail: format!("{} (limit 2%)", parts.join(", ")),
    }
}

fn criterion_7() -> Outcome {
    let op = OperatingPoint::table1();
    let report = design::verify_design(&CircuitParams::table1(), &op).unwrap();
    let (l1_max, _) = design::size_l1(&op).unwrap();
    let fc = cutoff_frequency(100e-6, 0.47e-6);
    let (lo, hi) = design::cutoff_band(&op);
    let pass = report.all_pass()
        && within(l1_max, 11.0e-6, 0.01)
        && l1_max >= 8e-6
        && within(fc, 23.2e3, 0.005)
        && fc > lo
        && fc < hi;
    Outcome {
        id: 7,
        name: "design golden",
        pass,
        detail: format!(
            "all rules pass: {}, L1 bound {:.2} uH, fc {:.2} kHz in ({:.0} Hz, {:.0} kHz)",
            report.all_pass(),
            l1_max * 1e6,
            fc / 1e3,
            lo,
            hi / 1e3
        ),
    }
}

fn closed_form_identities(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        ..Config::default()
    });
    let strategy = (
        2e-6..30e-6_f64,
        20e-6..400e-6_f64,
        10.0..60.0_f64,
        50.0..400.0_f64,
        20e3..200e3_f64,
        0.02..0.98_f64,
    );
    runner
        .run(&strategy, |(l1, l2, vdc, vo, fs, frac)| {
            let p = CircuitParams {
                l1,
                l2,
                ..CircuitParams::table1()
            };
            let ts = 1.0 / fs;
            // Any duty below the CCM boundary.
            let d = frac * vo / (vo + vdc);
            let d0 = averaged::solve_d0(d, vdc, vo).unwrap();
            let d2 = 1.0 - d - d0;
            let (r1, r2) = averaged::ripple_currents(&p, ts, vdc, d);
            let iv = averaged::valley_current(&p, ts, vdc, d, d0);
            let idc = averaged::avg_dc_current(&p, ts, vdc, d);
            let idc_wave = iv + r1 * (d + d2) / 2.0;
            prop_assert!((idc - idc_wave).abs() <= 1e-9 * idc.abs().max(1e-12));
            let i2 = averaged::avg_output_current(&p, ts, vdc, d, d0, HalfCycle::Sepic);
            let i2_wave = (r1 + r2) * d2 / 2.0;
            prop_assert!((i2 - i2_wave).abs() <= 1e-9 * i2.abs().max(1e-12));
            let gain = averaged::voltage_gain(d, d0, HalfCycle::Sepic).unwrap();
            prop_assert!((gain - vo / vdc).abs() <= 1e-9 * gain);
            prop_assert!((vdc * idc - vo * i2).abs() <= 1e-9 * vdc * idc);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Randomised lossy scenarios: energy residual and ModeIII current equality.
fn simulation_identities(cases: u32) -> Result<f64, String> {
    let mut runner = TestRunner::new(Config {
        cases,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0_f64);
    let strategy = (
        5e-6..11e-6_f64,
        60e-6..200e-6_f64,
        25.0..45.0_f64,
        0.25..0.65_f64,
        150.0..700.0_f64,
        0.0..2.0_f64,
        prop_oneof![Just(HalfCycle::Sepic), Just(HalfCycle::Cuk)],
    );
    runner
        .run(&strategy, |(l1, l2, vdc, dpk, ro, loss, _)| {
            let base = CircuitParams::table1();
            let params = CircuitParams {
                l1,
                l2,
                r_l1: loss * base.r_l1,
                r_l2: loss * base.r_l2,
                r_c1: loss * base.r_c1,
                r_c2: loss * base.r_c2,
                diode_vf: loss * base.diode_vf,
                ..base
            };
            let op = OperatingPoint {
                vdc,
                load: LoadModel::Resistive { ro },
                ..OperatingPoint::table1()
            };
            let mut sim = SimConfig::for_operating_point(&op);
            sim.t_end = 2.0 / op.fg;
            let ctl = ControllerHandle::open_loop(dpk, op.fg).unwrap();
            let out = run_simulation(&params, &op, ctl, &sim)
                .map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
            let resid = out.diagnostics.energy_residual().abs();
            worst.set(worst.get().max(resid));
            prop_assert!(resid <= 0.005, "energy residual {resid}");
            let circuit = Circuit::new(params, vdc, op.load, op.fg);
            prop_assert!(circuit.params == params);
            for s in out
                .record
                .samples
                .iter()
                .filter(|s| s.state.mode == ModeId::III)
            {
                prop_assert!(s.state.diode_current().abs() <= 1e-3);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(worst.get())
}

fn criterion_8() -> Outcome {
    let cf = closed_form_identities(1000);
    let sim = simulation_identities(6);
    let pass = cf.is_ok() && sim.is_ok();
    let detail = format!(
        "closed forms over 1000 draws: {}; 6 simulation draws: {}",
        cf.map(|_| "ok".to_string()).unwrap_or_else(|e| e),
        sim.map(|w| format!("worst energy residual {:.2e}", w))
            .unwrap_or_else(|e| e)
    );
    Outcome {
        id: 8,
        name: "identity suite",
        pass,
        detail,
    }
}

fn criterion_9() -> Outcome {
    let mut s = common::table1();
    s.op.load = LoadModel::Resistive { ro: 660.0 };
    let out = common::run(&s);
    let r = analysis::analyze(&out.record, Some(&s.params)).unwrap();
    let e = r.efficiency.unwrap();
    let turnon_share = e.losses.switching_turnon / e.losses.total;
    let pass = (0.86..=0.93).contains(&e.eta)
        && within(e.p_out, 73.0, 0.05)
        && r.dcm_occupancy == 1.0
        && turnon_share < 0.01;
    Outcome {
        id: 9,
        name: "efficiency at 73 W",
        pass,
        detail: format!(
            "eta {:.4} at {:.1} W (band [0.86, 0.93]), losses {:.2} W, turn-on share {:.2}%, DCM {:.3}",
            e.eta,
            e.p_out,
            e.losses.total,
            100.0 * turnon_share,
            r.dcm_occupancy
        ),
    }
}

#[test]
fn acceptance() {
    let (rated, c6, c8, c9) = std::thread::scope(|sc| {
        let a = sc.spawn(rated);
        let b = sc.spawn(criterion_6);
        let c = sc.spawn(criterion_8);
        let d = sc.spawn(criterion_9);
        (
            a.join().unwrap(),
            b.join().unwrap(),
            c.join().unwrap(),
            d.join().unwrap(),
        )
    });
    let outcomes = vec![
        criterion_1(&rated),
        criterion_2(&rated),
        criterion_3(&rated),
        criterion_4(&rated),
        criterion_5(&rated),
        c6,
        criterion_7(),
        c8,
        c9,
    ];
    for o in &outcomes {
        println!(
            "[{}] criterion {} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
