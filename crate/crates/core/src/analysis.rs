//! Post-processing of simulation records: harmonic distortion, rms and peak
//! extraction, per-period averages, DCM occupancy and loss accounting.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{CircuitParams, HalfCycle, ModeId};
use crate::sim::dynamics::acc;
use crate::sim::{PeriodSummary, WaveformRecord};

/// Highest harmonic included in the distortion figure.
pub const THD_MAX_HARMONIC: usize = 40;

/// Line cycles at the end of a run used for steady-state metrics.
pub const STEADY_CYCLES: f64 = 2.0;

/// Fourier component of `samples` at frequency `f`, as (amplitude, phase)
/// of `amplitude·sin(2πft + phase)`. Samples are taken at `t0 + k·dt`.
pub fn fourier_component(samples: &[f64], dt: f64, t0: f64, f: f64) -> (f64, f64) {
    let w = 2.0 * PI * f;
    let (mut a, mut b) = (0.0, 0.0);
    for (k, v) in samples.iter().enumerate() {
        let (s, c) = (w * (t0 + k as f64 * dt)).sin_cos();
        a += v * s;
        b += v * c;
    }
    let n = samples.len() as f64;
    let (a, b) = (2.0 * a / n, 2.0 * b / n);
    (a.hypot(b), b.atan2(a))
}

fn whole_cycles(n: usize, dt: f64, fundamental: f64) -> Result<f64> {
    if !(dt > 0.0 && fundamental > 0.0) {
        return Err(Error::Window(
            "sample step and fundamental must be > 0".into(),
        ));
    }
    let cycles = n as f64 * dt * fundamental;
    let per_cycle = 1.0 / (dt * fundamental);
    if cycles < 1.0 - 1e-9 || (cycles - cycles.round()).abs() * per_cycle > 0.5 {
        return Err(Error::Window(format!(
            "window spans {cycles:.4} fundamental cycles; a whole number is required"
        )));
    }
    if per_cycle < 200.0 - 1e-9 {
        return Err(Error::Window(format!(
            "{per_cycle:.1} samples per cycle; at least 200 are required"
        )));
    }
    Ok(cycles.round())
}

/// Total harmonic distortion in percent, harmonics 2 to 40 over the
/// fundamental, from uniformly spaced samples covering whole cycles.
pub fn thd(samples: &[f64], dt: f64, fundamental: f64) -> Result<f64> {
    whole_cycles(samples.len(), dt, fundamental)?;
    let (v1, _) = fourier_component(samples, dt, 0.0, fundamental);
    if v1 == 0.0 {
        return Err(Error::Window("fundamental component is zero".into()));
    }
    let sum: f64 = (2..=THD_MAX_HARMONIC)
        .map(|h| {
            fourier_component(samples, dt, 0.0, h as f64 * fundamental)
                .0
                .powi(2)
        })
        .sum();
    Ok(100.0 * sum.sqrt() / v1)
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Quantities with an exact per-period average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    IL1,
    IL2,
    VC1,
    Vo,
    Io,
    /// Source current (same as iL1).
    Idc,
    /// Current delivered by the unfolder into the output node.
    IUnf,
}

impl Signal {
    fn index(self) -> usize {
        match self {
            Signal::IL1 | Signal::Idc => acc::I_L1,
            Signal::IL2 => acc::I_L2,
            Signal::VC1 => acc::V_C1,
            Signal::Vo => acc::V_O,
            Signal::Io => acc::I_O,
            Signal::IUnf => acc::I_UNF,
        }
    }
}

/// Average of `signal` over each switching period.
pub fn per_period_average(periods: &[PeriodSummary], signal: Signal) -> Vec<(usize, f64)> {
    let k = signal.index();
    periods
        .iter()
        .map(|p| (p.index, p.integrals[k] / p.ts))
        .collect()
}

/// A period counts as discontinuous when it reaches ModeIII, or when nothing
/// conducts at all.
pub fn period_is_dcm(p: &PeriodSummary) -> bool {
    p.has_mode3() || (p.duty == 0.0 && p.mode_time[ModeId::II.index()] == 0.0)
}

/// Fraction of periods that are discontinuous; 1.0 for an empty slice.
pub fn dcm_occupancy(periods: &[PeriodSummary]) -> f64 {
    if periods.is_empty() {
        return 1.0;
    }
    periods.iter().filter(|p| period_is_dcm(p)).count() as f64 / periods.len() as f64
}

/// Steady-state window of a run: its last two line cycles, or its second
/// half when there is no line frequency.
pub fn steady_window(record: &WaveformRecord) -> (f64, f64) {
    let end = record
        .duration()
        .max(record.samples.last().map_or(0.0, |s| s.t + record.dt));
    let span = if record.fg > 0.0 {
        (STEADY_CYCLES / record.fg).min(end)
    } else {
        0.5 * end
    };
    (end - span, end)
}

/// Average power terms and losses over a set of periods (W).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// S1 and the unfolding switches, on-resistance losses.
    pub conduction_switches: f64,
    /// Diode forward drop.
    pub conduction_diode: f64,
    /// Winding and capacitor series resistances.
    pub conduction_esr: f64,
    pub switching_turnoff: f64,
    pub switching_turnon: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn circuit(&self) -> f64 {
        self.conduction_switches + self.conduction_diode + self.conduction_esr
    }
}

/// Input and output power plus losses over whole periods.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Efficiency {
    pub eta: f64,
    /// Source power: the simulated input plus the switching losses.
    pub p_in: f64,
    pub p_out: f64,
    pub losses: LossBreakdown,
}

/// Efficiency from exact period integrals. Switching losses use a linear
/// voltage-current overlap over `t_fall` at every S1 transition with nonzero
/// current; they are not part of the circuit model, so the source supplies
/// them on top of the simulated input power.
pub fn efficiency(periods: &[PeriodSummary], params: &CircuitParams) -> Result<Efficiency> {
    let t: f64 = periods.iter().map(|p| p.ts).sum();
    if !(t > 0.0) {
        return Err(Error::Window("efficiency needs at least one period".into()));
    }
    let sum = |k: usize| periods.iter().map(|p| p.integrals[k]).sum::<f64>();
    let sw = &params.switches;
    let conduction_switches =
        (sw.s1_ron * sum(acc::SQ_S1) + sw.unfolder_ron * (sum(acc::SQ_L2) + sum(acc::SQ_D))) / t;
    let conduction_diode = params.diode_vf * sum(acc::Q_D) / t;
    let conduction_esr = (params.r_l1 * sum(acc::SQ_L1)
        + params.r_l2 * sum(acc::SQ_L2)
        + params.r_c1 * sum(acc::SQ_C1)
        + params.r_c2 * sum(acc::SQ_C2))
        / t;
    let overlap = |v: f64, i: f64| 0.5 * (v * i).max(0.0) * sw.t_fall;
    let switching_turnoff = periods
        .iter()
        .map(|p| overlap(p.v_off, p.i_off))
        .sum::<f64>()
        / t;
    let switching_turnon = periods.iter().map(|p| overlap(p.v_on, p.i_on)).sum::<f64>() / t;
    let mut losses = LossBreakdown {
        conduction_switches,
        conduction_diode,
        conduction_esr,
        switching_turnoff,
        switching_turnon,
        total: 0.0,
    };
    losses.total = losses.circuit() + switching_turnoff + switching_turnon;

    let p_in = sum(acc::E_IN) / t;
    let p_out = sum(acc::E_LOAD) / t;
    let d_stored = periods.last().map_or(0.0, |p| p.stored_end)
        - periods.first().map_or(0.0, |p| p.stored_start);
    let unaccounted = p_in - p_out - losses.circuit() - d_stored / t;
    let scale = p_in.abs().max(f64::MIN_POSITIVE);
    if unaccounted.abs() > 0.01 * scale {
        return Err(Error::EnergyMismatch {
            unaccounted,
            percent: 100.0 * unaccounted / scale,
        });
    }
    let supplied = p_in + switching_turnoff + switching_turnon;
    let eta = if supplied > 0.0 {
        p_out / supplied
    } else {
        0.0
    };
    Ok(Efficiency {
        eta,
        p_in: supplied,
        p_out,
        losses,
    })
}

/// Largest deviation of the per-period iL2 average from the unfolder
/// current magnitude, relative to the peak of the latter, over periods where
/// |sin| of the line angle is at least `min_sin`. Returns (iL2 vs unfolder,
/// iL2 vs load current).
pub fn il2_tracking_error(periods: &[PeriodSummary], fg: f64, min_sin: f64) -> (f64, f64) {
    let peak = periods
        .iter()
        .map(|p| p.mean_i_unf().abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut worst = (0.0_f64, 0.0_f64);
    for p in periods {
        if (2.0 * PI * fg * p.t_mid()).sin().abs() < min_sin || p.blanked {
            continue;
        }
        let il2 = p.mean_i_l2();
        worst.0 = worst.0.max((il2 - p.mean_i_unf().abs()).abs() / peak);
        worst.1 = worst.1.max((il2 - p.mean_io().abs()).abs() / peak);
    }
    worst
}

/// Summary metrics of one steady-state window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisReport {
    pub t_start: f64,
    pub t_end: f64,
    pub thd_pct: f64,
    pub vo_rms: f64,
    /// Largest switching-period average of |vo|.
    pub vo_peak: f64,
    /// Amplitude of the vo fundamental.
    pub vo_fundamental: f64,
    pub io_rms: f64,
    /// Phase of the io fundamental relative to the vo fundamental (degrees).
    pub io_phase_deg: f64,
    /// Same for the unfolder output current, which excludes the C2 current.
    pub i2_phase_deg: f64,
    pub d_peak_measured: f64,
    pub dcm_occupancy: f64,
    /// Sepic-half mean of the per-period vC1 average.
    pub vc1_sepic_avg: f64,
    /// Cuk-half peak of the per-period vC1 average.
    pub vc1_cuk_peak: f64,
    pub ccm_periods: usize,
    pub efficiency: Option<Efficiency>,
}

impl AnalysisReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("window_start_s", format!("{:.6}", self.t_start));
        kv("window_end_s", format!("{:.6}", self.t_end));
        kv("thd_pct", format!("{:.4}", self.thd_pct));
        kv("vo_rms", format!("{:.4}", self.vo_rms));
        kv("vo_peak", format!("{:.4}", self.vo_peak));
        kv("vo_fundamental_peak", format!("{:.4}", self.vo_fundamental));
        kv("io_rms", format!("{:.6}", self.io_rms));
        kv("io_phase_deg", format!("{:.4}", self.io_phase_deg));
        kv("i2_phase_deg", format!("{:.4}", self.i2_phase_deg));
        kv("d_peak_measured", format!("{:.6}", self.d_peak_measured));
        kv("dcm_occupancy", format!("{:.6}", self.dcm_occupancy));
        kv("ccm_periods", self.ccm_periods.to_string());
        kv("vc1_sepic_avg", format!("{:.4}", self.vc1_sepic_avg));
        kv("vc1_cuk_peak", format!("{:.4}", self.vc1_cuk_peak));
        if let Some(e) = &self.efficiency {
            let l = &e.losses;
            kv("eta", format!("{:.6}", e.eta));
            kv("p_in_w", format!("{:.4}", e.p_in));
            kv("p_out_w", format!("{:.4}", e.p_out));
            kv(
                "loss_conduction_switches_w",
                format!("{:.6}", l.conduction_switches),
            );
            kv(
                "loss_conduction_diode_w",
                format!("{:.6}", l.conduction_diode),
            );
            kv("loss_conduction_esr_w", format!("{:.6}", l.conduction_esr));
            kv(
                "loss_switching_turnoff_w",
                format!("{:.6}", l.switching_turnoff),
            );
            kv(
                "loss_switching_turnon_w",
                format!("{:.6}", l.switching_turnon),
            );
            kv("loss_total_w", format!("{:.6}", l.total));
        }
        s
    }
}

fn phase_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    let d = if d > PI { d - 2.0 * PI } else { d };
    d.to_degrees()
}

/// Vo/io harmonic metrics of uniformly spaced samples in `[t0, t1)`.
fn sample_metrics(record: &WaveformRecord, t0: f64, t1: f64) -> Result<(f64, f64, f64, f64)> {
    let win = record.window(t0, t1);
    let start = win.first().map_or(t0, |s| s.t);
    let series = |f: fn(&crate::sim::Sample) -> f64| win.iter().map(f).collect::<Vec<f64>>();
    let vo = series(|s| s.vo);
    let thd_pct = thd(&vo, record.dt, record.fg)?;
    let phase = |v: &[f64]| fourier_component(v, record.dt, start, record.fg).1;
    let (v1, pv) = fourier_component(&vo, record.dt, start, record.fg);
    let pio = phase(&series(|s| s.io));
    let pi2 = phase(&series(|s| s.i_unf));
    Ok((
        thd_pct,
        v1,
        phase_diff_deg(pio, pv),
        phase_diff_deg(pi2, pv),
    ))
}

/// Period summaries rebuilt from samples alone (for records read back from
/// CSV). Only averages, duty and mode occupancy are filled in.
pub fn periods_from_samples(record: &WaveformRecord) -> Vec<PeriodSummary> {
    let ts = 1.0 / record.fs;
    let mut out: Vec<PeriodSummary> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for s in &record.samples {
        let k = (s.t * record.fs + 1e-6).floor() as usize;
        if out.last().map_or(true, |p| p.index != k) {
            out.push(PeriodSummary {
                index: k,
                t_start: k as f64 * ts,
                ts,
                half: s.state.half,
                duty: s.duty,
                blanked: s.duty == 0.0,
                mode_time: [0.0; 3],
                ccm: false,
                reentries: 0,
                integrals: [0.0; crate::sim::dynamics::N_ACC],
                stored_start: 0.0,
                stored_end: 0.0,
                v_off: 0.0,
                i_off: 0.0,
                v_on: 0.0,
                i_on: 0.0,
                diode_fraction: 0.0,
            });
            counts.push(0);
        }
        let p = out.last_mut().unwrap();
        let n = counts.last_mut().unwrap();
        *n += 1;
        p.mode_time[s.state.mode.index()] += 1.0;
        for (k, v) in [
            (acc::I_L1, s.state.i_l1),
            (acc::I_L2, s.state.i_l2),
            (acc::V_C1, s.state.v_c1),
            (acc::V_O, s.vo),
            (acc::I_O, s.io),
            (acc::I_UNF, s.i_unf),
            (acc::SQ_VO, s.vo * s.vo),
            (acc::SQ_IO, s.io * s.io),
        ] {
            p.integrals[k] += v;
        }
    }
    for (p, n) in out.iter_mut().zip(counts) {
        let n = n as f64;
        for v in p.integrals.iter_mut() {
            *v *= ts / n;
        }
        for m in p.mode_time.iter_mut() {
            *m *= ts / n;
        }
    }
    out
}

/// Analyses the steady-state window of a record. Efficiency is computed when
/// the record carries exact period integrals and `params` is given.
pub fn analyze(record: &WaveformRecord, params: Option<&CircuitParams>) -> Result<AnalysisReport> {
    let (t0, t1) = steady_window(record);
    let rebuilt;
    let (periods, exact) = if record.periods.is_empty() {
        rebuilt = periods_from_samples(record);
        let lo = rebuilt.partition_point(|p| p.t_start < t0 - 1e-3 / record.fs);
        (&rebuilt[lo..], false)
    } else {
        (record.periods_in(t0, t1), true)
    };
    if periods.is_empty() {
        return Err(Error::Window(
            "record has no switching periods in the steady-state window".into(),
        ));
    }
    let t: f64 = periods.iter().map(|p| p.ts).sum();
    let vo_rms = (periods.iter().map(|p| p.integrals[acc::SQ_VO]).sum::<f64>() / t).sqrt();
    let io_rms = (periods.iter().map(|p| p.integrals[acc::SQ_IO]).sum::<f64>() / t).sqrt();
    let vo_peak = periods
        .iter()
        .map(|p| p.mean_vo().abs())
        .fold(0.0, f64::max);
    let d_peak_measured = periods.iter().map(|p| p.duty).fold(0.0, f64::max);

    let (thd_pct, vo_fundamental, io_phase_deg, i2_phase_deg) = if record.fg > 0.0 {
        sample_metrics(record, t0, t1)?
    } else {
        (0.0, vo_peak, 0.0, 0.0)
    };

    let (mut sep, mut n_sep, mut cuk) = (0.0, 0usize, f64::NEG_INFINITY);
    for p in periods.iter().filter(|p| !p.blanked) {
        match p.half {
            HalfCycle::Sepic => {
                sep += p.mean_v_c1();
                n_sep += 1;
            }
            HalfCycle::Cuk => cuk = cuk.max(p.mean_v_c1()),
        }
    }

    let efficiency = match params {
        Some(pp) if exact => Some(efficiency(periods, pp)?),
        _ => None,
    };
    Ok(AnalysisReport {
        t_start: t0,
        t_end: t1,
        thd_pct,
        vo_rms,
        vo_peak,
        vo_fundamental,
        io_rms,
        io_phase_deg,
        i2_phase_deg,
        d_peak_measured,
        dcm_occupancy: dcm_occupancy(periods),
        vc1_sepic_avg: if n_sep > 0 { sep / n_sep as f64 } else { 0.0 },
        vc1_cuk_peak: if cuk.is_finite() { cuk } else { 0.0 },
        ccm_periods: periods.iter().filter(|p| p.ccm).count(),
        efficiency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(n: usize, dt: f64, f: f64, harm: &[(usize, f64)]) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let mut v = 311.0 * (2.0 * PI * f * t).sin();
                for &(h, a) in harm {
                    v += a * (2.0 * PI * h as f64 * f * t).sin();
                }
                v
            })
            .collect()
    }

    #[test]
    fn thd_pure_sine() {
        let dt = 1e-5;
        let v = sine(4000, dt, 50.0, &[]);
        assert!(thd(&v, dt, 50.0).unwrap() < 0.01);
    }

    #[test]
    fn thd_single_harmonic() {
        let dt = 1e-5;
        let v = sine(4000, dt, 50.0, &[(3, 3.11)]);
        assert!((thd(&v, dt, 50.0).unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn thd_ignores_harmonics_above_cutoff() {
        let dt = 1e-6;
        let v = sine(20_000, dt, 50.0, &[(41, 30.0), (2000, 30.0)]);
        assert!(thd(&v, dt, 50.0).unwrap() < 0.01);
    }

    #[test]
    fn thd_rejects_partial_cycle() {
        let dt = 1e-5;
        let v = sine(3000, dt, 50.0, &[]);
        assert!(matches!(thd(&v, dt, 50.0), Err(Error::Window(_))));
    }

    #[test]
    fn thd_rejects_coarse_sampling() {
        let dt = 1e-3;
        let v = sine(40, dt, 50.0, &[]);
        assert!(matches!(thd(&v, dt, 50.0), Err(Error::Window(_))));
    }

    #[test]
    fn thd_invariant_to_scale_and_shift() {
        let dt = 1e-5;
        let base = sine(4000, dt, 50.0, &[(3, 6.0), (5, 2.0)]);
        let t0 = thd(&base, dt, 50.0).unwrap();
        let scaled: Vec<f64> = base.iter().map(|v| 0.37 * v).collect();
        let mut shifted = base.clone();
        shifted.rotate_left(777);
        assert!((thd(&scaled, dt, 50.0).unwrap() - t0).abs() < 0.01);
        assert!((thd(&shifted, dt, 50.0).unwrap() - t0).abs() < 0.01);
    }

    #[test]
    fn fourier_phase_of_cosine() {
        let dt = 1e-5;
        let v: Vec<f64> = (0..2000)
            .map(|k| 2.0 * (2.0 * PI * 50.0 * k as f64 * dt).cos())
            .collect();
        let (a, ph) = fourier_component(&v, dt, 0.0, 50.0);
        assert!((a - 2.0).abs() < 1e-9);
        assert!((ph - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn phase_wraps() {
        assert!((phase_diff_deg(0.1, 2.0 * PI - 0.1) - 0.2_f64.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn rms_of_constant() {
        assert!((rms(&[3.0; 10]) - 3.0).abs() < 1e-12);
        assert_eq!(rms(&[]), 0.0);
    }
}
