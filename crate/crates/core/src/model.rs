//! Domain types shared by the closed-form model, the simulator, the
//! controller, the sizing routines and the post-processing.
//!
//! Everything is in SI base units (V, A, H, F, s, Hz, Ω).

use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

/// Conduction and switching parameters of the semiconductor devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchParams {
    /// On-resistance of the high-frequency switch S1 (Ω).
    pub s1_ron: f64,
    /// On-resistance of each line-frequency unfolding switch S2..S5 (Ω).
    pub unfolder_ron: f64,
    /// Current-fall (turn-off) transition time of S1 (s). Also used for the
    /// turn-on overlap estimate when a period ends in CCM.
    pub t_fall: f64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self {
            s1_ron: 24e-3,
            unfolder_ron: 37e-3,
            t_fall: 20e-9,
        }
    }
}

/// Passive, parasitic and device values of the power stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Grid-side inductance between C2 and the load/grid (H). Zero connects the
    /// resistive load straight across C2.
    pub lg: f64,
    pub r_l1: f64,
    pub r_l2: f64,
    pub r_c1: f64,
    pub r_c2: f64,
    /// Constant forward drop of the blocking diode (V).
    pub diode_vf: f64,
    pub switches: SwitchParams,
}

impl CircuitParams {
    /// The prototype's converter parameters, with device on-resistances of
    /// the chosen MOSFETs and the typical forward drop of a 600 V SiC
    /// Schottky diode.
    pub fn table1() -> Self {
        Self {
            l1: 8e-6,
            l2: 100e-6,
            c1: 0.47e-6,
            c2: 0.47e-6,
            lg: 1e-3,
            r_l1: 20e-3,
            r_l2: 0.6,
            r_c1: 30e-3,
            r_c2: 30e-3,
            diode_vf: 1.5,
            switches: SwitchParams::default(),
        }
    }

    /// Same reactive elements as `self` with every loss element removed.
    pub fn ideal(&self) -> Self {
        Self {
            r_l1: 0.0,
            r_l2: 0.0,
            r_c1: 0.0,
            r_c2: 0.0,
            diode_vf: 0.0,
            switches: SwitchParams {
                s1_ron: 0.0,
                unfolder_ron: 0.0,
                t_fall: 0.0,
            },
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L1", self.l1),
            ("L2", self.l2),
            ("C1", self.c1),
            ("C2", self.c2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("Lg", self.lg),
            ("rL1", self.r_l1),
            ("rL2", self.r_l2),
            ("rC1", self.r_c1),
            ("rC2", self.r_c2),
            ("diode_vf", self.diode_vf),
            ("s1_ron", self.switches.s1_ron),
            ("unfolder_ron", self.switches.unfolder_ron),
            ("t_fall", self.switches.t_fall),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn leq(&self) -> f64 {
        leq(self)
    }
}

/// Parallel combination L1 || L2.
pub fn leq(params: &CircuitParams) -> f64 {
    params.l1 * params.l2 / (params.l1 + params.l2)
}

/// What the unfolding bridge drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadModel {
    /// Resistor behind the circuit's `lg` (or directly across C2 when `lg` is 0).
    Resistive { ro: f64 },
    /// Stiff sinusoidal source `√2·vo_rms·sin(2π·fg·t + phase)` behind `lg`.
    /// With `fg = 0` this is a dc source of value `√2·vo_rms·sin(phase)`.
    GridSource { vo_rms: f64, phase: f64, lg: f64 },
}

impl LoadModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LoadModel::Resistive { ro } if !(ro.is_finite() && ro > 0.0) => {
                Err(Error::InvalidParameter(format!("Ro must be > 0, got {ro}")))
            }
            LoadModel::GridSource { lg, .. } if !(lg.is_finite() && lg > 0.0) => Err(
                Error::InvalidParameter(format!("grid Lg must be > 0, got {lg}")),
            ),
            LoadModel::GridSource { vo_rms, .. } if !vo_rms.is_finite() => Err(
                Error::InvalidParameter("grid voltage must be finite".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Source, grid, switching and load conditions for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub vdc: f64,
    pub vo_rms: f64,
    pub fg: f64,
    pub fs: f64,
    pub load: LoadModel,
    /// Average current drawn from the source (A).
    pub ipv: f64,
}

impl OperatingPoint {
    /// 35 V module into 220 V / 50 Hz through 194 Ω at 100 kHz, 250 W.
    pub fn table1() -> Self {
        Self {
            vdc: 35.0,
            vo_rms: 220.0,
            fg: 50.0,
            fs: 100e3,
            load: LoadModel::Resistive { ro: 194.0 },
            ipv: 7.13,
        }
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.fs
    }

    /// Peak of the ac output voltage.
    pub fn v_om(&self) -> f64 {
        SQRT_2 * self.vo_rms
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.fg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vdc.is_finite() && self.vdc > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Vdc must be > 0, got {}",
                self.vdc
            )));
        }
        if !(self.vo_rms.is_finite() && self.vo_rms > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Vo_rms must be > 0, got {}",
                self.vo_rms
            )));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) || !(self.fg.is_finite() && self.fg >= 0.0) {
            return Err(Error::InvalidParameter("fs must be > 0 and fg >= 0".into()));
        }
        if self.fg > 0.0 && self.fs / self.fg < 100.0 {
            return Err(Error::InvalidParameter(format!(
                "fs/fg = {} < 100, switching period not short against the line period",
                self.fs / self.fg
            )));
        }
        if !(self.ipv.is_finite() && self.ipv >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Ipv must be >= 0, got {}",
                self.ipv
            )));
        }
        self.load.validate()
    }
}

/// Topology interval within one switching period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeId {
    /// S1 conducting, diode blocked.
    I,
    /// S1 off, diode conducting.
    II,
    /// S1 off, diode off; L1, C1 and L2 carry one circulating current.
    III,
}

impl ModeId {
    pub fn index(self) -> usize {
        match self {
            ModeId::I => 0,
            ModeId::II => 1,
            ModeId::III => 2,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeId::I => "ModeI",
            ModeId::II => "ModeII",
            ModeId::III => "ModeIII",
        }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which pair of unfolding switches is gated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HalfCycle {
    /// Positive grid half cycle, S2/S3 on.
    Sepic,
    /// Negative grid half cycle, S4/S5 on.
    Cuk,
}

impl HalfCycle {
    /// +1 for Sepic, -1 for Cuk: multiplies converter-frame quantities into
    /// grid-frame ones.
    pub fn sign(self) -> f64 {
        match self {
            HalfCycle::Sepic => 1.0,
            HalfCycle::Cuk => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HalfCycle::Sepic => "Sepic",
            HalfCycle::Cuk => "Cuk",
        }
    }
}

impl fmt::Display for HalfCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Instantaneous circuit state.
///
/// `v_c2` is the output capacitor voltage seen from the active converter: it
/// is positive in normal operation in both half cycles and the grid-side
/// voltage is `half.sign() * v_c2`. `i_lg` is the grid-side inductor current
/// in the grid frame (not folded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterState {
    pub i_l1: f64,
    pub i_l2: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    pub i_lg: f64,
    pub mode: ModeId,
    pub half: HalfCycle,
}

impl ConverterState {
    pub fn zero() -> Self {
        Self {
            i_l1: 0.0,
            i_l2: 0.0,
            v_c1: 0.0,
            v_c2: 0.0,
            i_lg: 0.0,
            mode: ModeId::III,
            half: HalfCycle::Sepic,
        }
    }

    /// Diode current when the diode conducts (iL1 + iL2).
    pub fn diode_current(&self) -> f64 {
        self.i_l1 + self.i_l2
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.i_l1, self.i_l2, self.v_c1, self.v_c2, self.i_lg]
    }

    pub fn with_array(&self, x: &[f64; 5]) -> Self {
        Self {
            i_l1: x[0],
            i_l2: x[1],
            v_c1: x[2],
            v_c2: x[3],
            i_lg: x[4],
            ..*self
        }
    }

    /// Stored energy in L1, L2, C1, C2 and the grid inductor.
    pub fn stored_energy(&self, params: &CircuitParams, lg: f64) -> f64 {
        0.5 * params.l1 * self.i_l1 * self.i_l1
            + 0.5 * params.l2 * self.i_l2 * self.i_l2
            + 0.5 * params.c1 * self.v_c1 * self.v_c1
            + 0.5 * params.c2 * self.v_c2 * self.v_c2
            + 0.5 * lg * self.i_lg * self.i_lg
    }
}

/// Closed-form DCM quantities at one line angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteadyStateSolution {
    pub d: f64,
    pub d0: f64,
    pub d_il1: f64,
    pub d_il2: f64,
    pub il1_valley: f64,
    pub il1_peak: f64,
    pub il2_valley: f64,
    pub il2_peak: f64,
    /// Switching-period average of the source current.
    pub idc_avg: f64,
    /// Switching-period average magnitude of the unfolder input current.
    pub i2_avg: f64,
    pub vc1_avg: f64,
    /// Set when the unclamped D0 came out negative and was clamped to 0.
    pub ccm_violation: bool,
}
