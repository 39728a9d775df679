//! One simulation per parameter value, run in parallel, reported in order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use microinv_core::analysis::{self, AnalysisReport};
use microinv_core::averaged;
use microinv_core::config::{KeyValues, Scenario};
use microinv_core::control::ControlMode;
use microinv_core::sim::run_simulation;
use microinv_core::{LoadModel, Result};
use rayon::prelude::*;

use crate::{write_or_print, Failure};

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Source current in A. The load follows so the output stays at its
    /// reference: Ro for voltage regulation, the current reference for a
    /// grid load, the peak duty for open loop.
    #[value(name = "Ipv")]
    Ipv,
    /// Load resistance in Ω.
    #[value(name = "Ro")]
    Ro,
    /// Input inductance in H.
    #[value(name = "L1")]
    L1,
    /// Output inductance in H.
    #[value(name = "L2")]
    L2,
    /// Switching frequency in Hz.
    #[value(name = "fs")]
    Fs,
    /// Source voltage in V.
    #[value(name = "Vdc")]
    Vdc,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Ipv => "Ipv",
            SweepParam::Ro => "Ro",
            SweepParam::L1 => "L1",
            SweepParam::L2 => "L2",
            SweepParam::Fs => "fs",
            SweepParam::Vdc => "Vdc",
        }
    }

    fn key(self) -> &'static str {
        match self {
            SweepParam::Ipv => "Ipv_A",
            SweepParam::Ro => "Ro_ohm",
            SweepParam::L1 => "L1_H",
            SweepParam::L2 => "L2_H",
            SweepParam::Fs => "fs_Hz",
            SweepParam::Vdc => "Vdc_V",
        }
    }
}

/// Closed interval `LO:HI` with `LO <= HI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for SweepRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{x}` is not a number"))
        };
        let (lo, hi) = (num(a)?, num(b)?);
        if hi < lo {
            return Err(format!("empty range {lo}:{hi}"));
        }
        Ok(Self { lo, hi })
    }
}

impl SweepRange {
    /// `steps` evenly spaced values, rounded to 12 significant digits so
    /// they print cleanly. A single step gives `lo`.
    pub fn values(&self, steps: usize) -> Vec<f64> {
        if steps == 1 {
            return vec![self.lo];
        }
        (0..steps)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (steps - 1) as f64)
            .map(|v| format!("{v:.11e}").parse().unwrap_or(v))
            .collect()
    }
}

const HEADER: &str = "index,param,value,status,p_out_w,p_in_w,eta,vo_rms,vo_peak,thd_pct,io_rms,dcm_occupancy,d_peak_measured,ccm_periods";

fn scenario_for(base: &KeyValues, param: SweepParam, value: f64) -> Result<Scenario> {
    let mut kv = base.clone();
    kv.set(param.key(), &value.to_string())?;
    if param != SweepParam::Ipv {
        return Scenario::from_key_values(&kv);
    }
    let s = Scenario::from_key_values(&kv)?;
    let op = &s.op;
    match (s.control.mode, op.load) {
        (ControlMode::VoltageRegulation { vorms_ref }, LoadModel::Resistive { .. }) => {
            let ro = vorms_ref * vorms_ref / (op.vdc * value);
            kv.set("Ro_ohm", &ro.to_string())?;
        }
        (ControlMode::CurrentReference { .. }, _) => {
            kv.set("Io_ref_rms_A", &(op.vdc * value / op.vo_rms).to_string())?;
        }
        (ControlMode::OpenLoop { .. }, _) => {
            let d = averaged::d_peak(value, &s.params, op.ts(), op.vdc)?;
            kv.set("D_peak", &d.to_string())?;
        }
        _ => return Ok(s),
    }
    Scenario::from_key_values(&kv)
}

fn run_one(
    base: &KeyValues,
    param: SweepParam,
    value: f64,
    t_end: Option<f64>,
) -> Result<AnalysisReport> {
    let mut s = scenario_for(base, param, value)?;
    if let Some(t) = t_end {
        s.sim.t_end = t;
        s.sim.validate(&s.op)?;
    }
    let out = run_simulation(&s.params, &s.op, s.controller()?, &s.sim)?;
    analysis::analyze(&out.record, Some(&s.params))
}

fn row(index: usize, param: SweepParam, value: f64, result: &Result<AnalysisReport>) -> String {
    let mut line = format!("{index},{},{value}", param.name());
    match result {
        Ok(r) => {
            let (p_out, p_in, eta) = r
                .efficiency
                .as_ref()
                .map_or((f64::NAN, f64::NAN, f64::NAN), |e| (e.p_out, e.p_in, e.eta));
            let _ = write!(
                line,
                ",ok,{p_out:.4},{p_in:.4},{eta:.6},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{}",
                r.vo_rms,
                r.vo_peak,
                r.thd_pct,
                r.io_rms,
                r.dcm_occupancy,
                r.d_peak_measured,
                r.ccm_periods
            );
        }
        Err(e) => {
            let status = format!("error: {e}").replace([',', '\n'], ";");
            let _ = write!(line, ",{status},,,,,,,,,,");
        }
    }
    line
}

pub fn run(
    config: &Path,
    param: SweepParam,
    range: SweepRange,
    steps: usize,
    t_end: Option<f64>,
    out: Option<&Path>,
) -> std::result::Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| crate::io_failure(config, e))?;
    let base = KeyValues::parse(&text)?;
    // The unmodified scenario must be valid before fanning out.
    Scenario::from_key_values(&base)?;
    if let (SweepParam::Ro, Some("grid")) = (param, base.get("load")) {
        return Err(Failure {
            code: 2,
            message: "Ro cannot be swept with a grid load".into(),
        });
    }

    let values = range.values(steps);
    let results: Vec<Result<AnalysisReport>> = values
        .par_iter()
        .map(|&v| run_one(&base, param, v, t_end))
        .collect();

    let mut csv = String::from(HEADER);
    csv.push('\n');
    for (i, (v, r)) in values.iter().zip(&results).enumerate() {
        csv.push_str(&row(i, param, *v, r));
        csv.push('\n');
    }
    write_or_print(out, &csv)
}
