//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment. Circuit keys default to the
//! prototype values; the operating point keys are required.
//!
//! ```text
//! Vdc_V = 35
//! Vo_rms_V = 220
//! fg_Hz = 50
//! fs_Hz = 100e3
//! Ipv_A = 7.13
//! load = resistive
//! Ro_ohm = 194
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::control::{ControlMode, ControllerHandle, PiCadence, PiState, D_PEAK_MAX};
use crate::design::{DesignOptions, DEFAULT_C1_RIPPLE, DEFAULT_L2_RIPPLE};
use crate::error::{Error, Result};
use crate::model::{CircuitParams, LoadModel, OperatingPoint};
use crate::sim::{Integrator, SimConfig};

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "Vdc_V",
    "Vo_rms_V",
    "fg_Hz",
    "fs_Hz",
    "Ipv_A",
    "load",
    "Ro_ohm",
    "grid_phase_rad",
    "L1_H",
    "L2_H",
    "C1_F",
    "C2_F",
    "Lg_H",
    "rL1_ohm",
    "rL2_ohm",
    "rC1_ohm",
    "rC2_ohm",
    "diode_vf_V",
    "S1_ron_ohm",
    "unfolder_ron_ohm",
    "t_fall_s",
    "control",
    "Vo_ref_rms_V",
    "Io_ref_rms_A",
    "D_peak",
    "duty",
    "Kp",
    "Ki",
    "pi_cadence",
    "t_end_s",
    "dt_max_s",
    "event_tol_A",
    "record_decimation",
    "integrator",
    "c1_ripple_ratio",
    "l2_ripple_ratio",
];

/// Raw key-value pairs with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key or value")));
            }
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {line_no}: unknown key `{k}`")));
            }
            if entries
                .insert(k.to_string(), (v.to_string(), line_no))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key `{k}`"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), 0));
        Ok(())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| {
                    Error::Config(format!("line {line}: `{key}` is not a number: `{v}`"))
                }),
        }
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    /// Serialises back to `key = value` lines in key order.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, (v, _))| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Outer-loop choice as written in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSpec {
    pub mode: ControlMode,
    pub kp: f64,
    pub ki: f64,
    pub cadence: PiCadence,
}

/// Everything a scenario file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: CircuitParams,
    pub op: OperatingPoint,
    pub control: ControlSpec,
    pub sim: SimConfig,
    pub design: DesignOptions,
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let base = CircuitParams::table1();
        let sw = base.switches;
        let mut params = CircuitParams {
            l1: kv.or("L1_H", base.l1)?,
            l2: kv.or("L2_H", base.l2)?,
            c1: kv.or("C1_F", base.c1)?,
            c2: kv.or("C2_F", base.c2)?,
            lg: kv.or("Lg_H", base.lg)?,
            r_l1: kv.or("rL1_ohm", base.r_l1)?,
            r_l2: kv.or("rL2_ohm", base.r_l2)?,
            r_c1: kv.or("rC1_ohm", base.r_c1)?,
            r_c2: kv.or("rC2_ohm", base.r_c2)?,
            diode_vf: kv.or("diode_vf_V", base.diode_vf)?,
            switches: base.switches,
        };
        params.switches.s1_ron = kv.or("S1_ron_ohm", sw.s1_ron)?;
        params.switches.unfolder_ron = kv.or("unfolder_ron_ohm", sw.unfolder_ron)?;
        params.switches.t_fall = kv.or("t_fall_s", sw.t_fall)?;
        params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;

        let vo_rms = kv.required("Vo_rms_V")?;
        let load = match kv.get("load").unwrap_or("resistive") {
            "resistive" => LoadModel::Resistive {
                ro: kv.required("Ro_ohm")?,
            },
            "grid" => LoadModel::GridSource {
                vo_rms,
                phase: kv.or("grid_phase_rad", 0.0)?,
                lg: params.lg,
            },
            other => {
                return Err(Error::Config(format!(
                    "`load` must be `resistive` or `grid`, got `{other}`"
                )))
            }
        };
        let op = OperatingPoint {
            vdc: kv.required("Vdc_V")?,
            vo_rms,
            fg: kv.required("fg_Hz")?,
            fs: kv.required("fs_Hz")?,
            load,
            ipv: kv.required("Ipv_A")?,
        };
        op.validate().map_err(|e| Error::Config(e.to_string()))?;

        let pi = PiState::table1();
        let default_control = match load {
            LoadModel::Resistive { .. } => "voltage",
            LoadModel::GridSource { .. } => "current",
        };
        let mode = match kv.get("control").unwrap_or(default_control) {
            "voltage" => ControlMode::VoltageRegulation {
                vorms_ref: kv.or("Vo_ref_rms_V", vo_rms)?,
            },
            "current" => ControlMode::CurrentReference {
                iorms_ref: kv.or("Io_ref_rms_A", op.vdc * op.ipv / vo_rms)?,
            },
            "open_loop" => ControlMode::OpenLoop {
                d_peak: kv.required("D_peak")?,
            },
            "fixed" => ControlMode::FixedDuty {
                duty: kv.required("duty")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "`control` must be voltage, current, open_loop or fixed, got `{other}`"
                )))
            }
        };
        let cadence = match kv.get("pi_cadence").unwrap_or("period") {
            "period" => PiCadence::SwitchingPeriod,
            "half_cycle" => PiCadence::HalfCycle,
            other => {
                return Err(Error::Config(format!(
                    "`pi_cadence` must be `period` or `half_cycle`, got `{other}`"
                )))
            }
        };
        let control = ControlSpec {
            mode,
            kp: kv.or("Kp", pi.kp)?,
            ki: kv.or("Ki", pi.ki)?,
            cadence,
        };

        let mut sim = SimConfig::for_operating_point(&op);
        sim.t_end = kv.or("t_end_s", sim.t_end)?;
        sim.dt_max = kv.or("dt_max_s", sim.dt_max)?;
        sim.event_tol = kv.or("event_tol_A", sim.event_tol)?;
        if let Some(n) = kv.number("record_decimation")? {
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "`record_decimation` must be a positive integer, got {n}"
                )));
            }
            sim.record_decimation = n as usize;
        }
        sim.integrator = match kv.get("integrator").unwrap_or("rk4") {
            "rk4" => Integrator::Rk4,
            "trapezoidal" => Integrator::Trapezoidal,
            other => {
                return Err(Error::Config(format!(
                    "`integrator` must be `rk4` or `trapezoidal`, got `{other}`"
                )))
            }
        };
        sim.validate(&op)?;

        let design = DesignOptions {
            c1_ripple: kv.or("c1_ripple_ratio", DEFAULT_C1_RIPPLE)?,
            l2_ripple: kv.or("l2_ripple_ratio", DEFAULT_L2_RIPPLE)?,
            ..DesignOptions::default()
        };

        let scenario = Self {
            params,
            op,
            control,
            sim,
            design,
        };
        scenario.controller()?;
        Ok(scenario)
    }

    pub fn controller(&self) -> Result<ControllerHandle> {
        let c = &self.control;
        let pi = PiState::new(c.kp, c.ki, 0.0, D_PEAK_MAX)?;
        ControllerHandle::new(c.mode, pi, c.cadence, self.op.fg)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// The prototype scenario: rated power into 194 Ω with 220 V rms regulation.
pub const TABLE1_CFG: &str = include_str!("../../../scenarios/table1.cfg");
