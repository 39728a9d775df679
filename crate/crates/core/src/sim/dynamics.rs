//! Piecewise-linear circuit equations for the three topologies of each half
//! cycle.
//!
//! Node names: `A` joins L1, S1 and C1; `B` joins C1, L2 and the diode anode;
//! `M` is the far end of L2 (grounded through S2 in Sepic, tied to the output
//! terminal through S4 in Cuk); `K` is the diode cathode side of S3/S5.
//! `i_l2` flows from M into B. `u` is the C2 terminal voltage in the frame of
//! the active converter, so the grid-side voltage is `sign·u`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CircuitParams, ConverterState, HalfCycle, LoadModel, ModeId};

/// Number of running integrals carried alongside the circuit state.
pub const N_ACC: usize = 17;

/// Indices into the accumulator vector.
pub mod acc {
    /// ∫ Vdc·iL1
    pub const E_IN: usize = 0;
    /// ∫ power delivered to the load resistor or grid source
    pub const E_LOAD: usize = 1;
    pub const SQ_L1: usize = 2;
    pub const SQ_L2: usize = 3;
    pub const SQ_C1: usize = 4;
    pub const SQ_C2: usize = 5;
    pub const SQ_S1: usize = 6;
    pub const SQ_D: usize = 7;
    pub const Q_D: usize = 8;
    pub const SQ_VO: usize = 9;
    pub const SQ_IO: usize = 10;
    pub const I_L1: usize = 11;
    pub const I_L2: usize = 12;
    pub const V_C1: usize = 13;
    pub const V_O: usize = 14;
    pub const I_O: usize = 15;
    pub const I_UNF: usize = 16;
}

/// Gate pattern for one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gates {
    pub s1: bool,
    pub half: HalfCycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Load {
    /// Resistor straight across C2.
    Direct { ro: f64 },
    /// Resistor behind a series inductor.
    Series { ro: f64, lg: f64 },
    /// Sinusoidal (or dc, when omega = 0) source behind a series inductor.
    Grid {
        amp: f64,
        omega: f64,
        phase: f64,
        lg: f64,
    },
}

/// Terminal and device quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aux {
    /// Diode current (zero unless in ModeII).
    pub i_d: f64,
    pub i_s1: f64,
    pub i_c1: f64,
    pub i_c2: f64,
    /// Grid-frame output terminal voltage.
    pub vo: f64,
    /// Grid-frame load current.
    pub io: f64,
    /// Grid-frame current delivered by the unfolder into the output node.
    pub i_unf: f64,
    /// Voltage across S1 (drain to source).
    pub v_s1: f64,
    /// Diode anode-cathode voltage minus its forward drop; > 0 means the
    /// diode wants to conduct.
    pub diode_bias: f64,
    pub p_load: f64,
}

/// Circuit bound to a source voltage and load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circuit {
    pub params: CircuitParams,
    pub vdc: f64,
    load: Load,
}

impl Circuit {
    pub fn new(params: CircuitParams, vdc: f64, load: LoadModel, fg: f64) -> Self {
        let load = match load {
            LoadModel::Resistive { ro } if params.lg > 0.0 => Load::Series { ro, lg: params.lg },
            LoadModel::Resistive { ro } => Load::Direct { ro },
            LoadModel::GridSource { vo_rms, phase, lg } => Load::Grid {
                amp: std::f64::consts::SQRT_2 * vo_rms,
                omega: 2.0 * PI * fg,
                phase,
                lg,
            },
        };
        Self { params, vdc, load }
    }

    /// Inductance of the grid-side branch (zero for a direct resistor).
    pub fn lg(&self) -> f64 {
        match self.load {
            Load::Direct { .. } => 0.0,
            Load::Series { lg, .. } | Load::Grid { lg, .. } => lg,
        }
    }

    pub fn grid_voltage(&self, t: f64) -> f64 {
        match self.load {
            Load::Grid {
                amp, omega, phase, ..
            } => amp * (omega * t + phase).sin(),
            _ => 0.0,
        }
    }

    pub fn stored_energy(&self, s: &ConverterState) -> f64 {
        s.stored_energy(&self.params, self.lg())
    }

    /// Converter-frame C2 terminal voltage and converter-frame load current
    /// for a given converter output current `i_out`.
    fn output_node(&self, v_c2: f64, i_lg: f64, i_out: f64, sign: f64) -> (f64, f64) {
        let r_c2 = self.params.r_c2;
        match self.load {
            Load::Direct { ro } => {
                let u = (v_c2 + r_c2 * i_out) * ro / (ro + r_c2);
                (u, u / ro)
            }
            Load::Series { .. } | Load::Grid { .. } => {
                let i_load = sign * i_lg;
                (v_c2 + r_c2 * (i_out - i_load), i_load)
            }
        }
    }

    /// State derivative and auxiliary quantities for the topology selected by
    /// `mode` and `half`. `x` is `[iL1, iL2, vC1, vC2, iLg]`.
    pub fn eval(&self, t: f64, x: &[f64; 5], mode: ModeId, half: HalfCycle) -> ([f64; 5], Aux) {
        let p = &self.params;
        let [i_l1, i_l2, v_c1, v_c2, i_lg] = *x;
        let sign = half.sign();
        let ron1 = p.switches.s1_ron;
        let ronu = p.switches.unfolder_ron;

        let (i_d, i_s1, i_c1) = match mode {
            ModeId::I => (0.0, i_l1 + i_l2, -i_l2),
            ModeId::II => (i_l1 + i_l2, 0.0, i_l1),
            ModeId::III => (0.0, 0.0, i_l1),
        };
        let i_out = match half {
            HalfCycle::Sepic => i_d,
            HalfCycle::Cuk => i_l2,
        };
        let (u, i_load_c) = self.output_node(v_c2, i_lg, i_out, sign);
        let v_m = match half {
            HalfCycle::Sepic => -ronu * i_l2,
            HalfCycle::Cuk => -u - ronu * i_l2,
        };
        let v_k = match half {
            HalfCycle::Sepic => u,
            HalfCycle::Cuk => 0.0,
        };

        let (di_l1, di_l2, v_a, v_b) = match mode {
            ModeId::I => {
                let v_a = ron1 * i_s1;
                let v_b = v_a - v_c1 - p.r_c1 * i_c1;
                (
                    (self.vdc - p.r_l1 * i_l1 - v_a) / p.l1,
                    (v_m - v_b - p.r_l2 * i_l2) / p.l2,
                    v_a,
                    v_b,
                )
            }
            ModeId::II => {
                let v_b = v_k + p.diode_vf + ronu * i_d;
                let v_a = v_b + v_c1 + p.r_c1 * i_c1;
                (
                    (self.vdc - p.r_l1 * i_l1 - v_a) / p.l1,
                    (v_m - v_b - p.r_l2 * i_l2) / p.l2,
                    v_a,
                    v_b,
                )
            }
            ModeId::III => {
                let r_loop = p.r_l1 + p.r_c1 + p.r_l2;
                let di = (self.vdc - v_c1 - v_m - r_loop * i_l1) / (p.l1 + p.l2);
                let v_b = p.l2 * di + v_m + p.r_l2 * i_l1;
                let v_a = v_b + v_c1 + p.r_c1 * i_c1;
                (di, -di, v_a, v_b)
            }
        };

        let i_c2 = i_out - i_load_c;
        let (di_lg, p_load) = match self.load {
            Load::Direct { ro } => (0.0, u * u / ro),
            Load::Series { ro, lg } => ((sign * u - ro * i_lg) / lg, ro * i_lg * i_lg),
            Load::Grid { lg, .. } => {
                let vg = self.grid_voltage(t);
                ((sign * u - vg) / lg, vg * i_lg)
            }
        };

        let dx = [di_l1, di_l2, i_c1 / p.c1, i_c2 / p.c2, di_lg];
        let diode_bias = match mode {
            ModeId::II => 0.0,
            _ => v_b - v_k - p.diode_vf,
        };
        let aux = Aux {
            i_d,
            i_s1,
            i_c1,
            i_c2,
            vo: sign * u,
            io: sign * i_load_c,
            i_unf: sign * i_out,
            v_s1: v_a,
            diode_bias,
            p_load,
        };
        (dx, aux)
    }

    /// Rates of the running integrals at one instant.
    pub fn rates(&self, x: &[f64; 5], aux: &Aux) -> [f64; N_ACC] {
        let mut r = [0.0; N_ACC];
        r[acc::E_IN] = self.vdc * x[0];
        r[acc::E_LOAD] = aux.p_load;
        r[acc::SQ_L1] = x[0] * x[0];
        r[acc::SQ_L2] = x[1] * x[1];
        r[acc::SQ_C1] = aux.i_c1 * aux.i_c1;
        r[acc::SQ_C2] = aux.i_c2 * aux.i_c2;
        r[acc::SQ_S1] = aux.i_s1 * aux.i_s1;
        r[acc::SQ_D] = aux.i_d * aux.i_d;
        r[acc::Q_D] = aux.i_d;
        r[acc::SQ_VO] = aux.vo * aux.vo;
        r[acc::SQ_IO] = aux.io * aux.io;
        r[acc::I_L1] = x[0];
        r[acc::I_L2] = x[1];
        r[acc::V_C1] = x[2];
        r[acc::V_O] = aux.vo;
        r[acc::I_O] = aux.io;
        r[acc::I_UNF] = aux.i_unf;
        r
    }

    /// Dissipation implied by a set of integrals (J): series resistances,
    /// on-resistances and the diode drop. The unfolding switch in series with
    /// L2 carries iL2 throughout; the one in series with the diode carries iD.
    pub fn dissipated(&self, a: &[f64; N_ACC]) -> f64 {
        let p = &self.params;
        p.r_l1 * a[acc::SQ_L1]
            + p.r_l2 * a[acc::SQ_L2]
            + p.r_c1 * a[acc::SQ_C1]
            + p.r_c2 * a[acc::SQ_C2]
            + p.switches.s1_ron * a[acc::SQ_S1]
            + p.switches.unfolder_ron * (a[acc::SQ_L2] + a[acc::SQ_D])
            + p.diode_vf * a[acc::Q_D]
    }
}

/// Derivative of `[iL1, iL2, vC1, vC2, iLg]` for the topology implied by the
/// gates and the state's mode.
pub fn mode_dynamics(
    params: &CircuitParams,
    vdc: f64,
    state: &ConverterState,
    gates: Gates,
    load: LoadModel,
    fg: f64,
    t: f64,
) -> Result<[f64; 5]> {
    if gates.s1 != (state.mode == ModeId::I) {
        return Err(Error::InconsistentMode {
            mode: state.mode.name(),
        });
    }
    let circuit = Circuit::new(*params, vdc, load, fg);
    Ok(circuit.eval(t, &state.as_array(), state.mode, gates.half).0)
}
