//! Closed-form steady-state DCM relations.
//!
//! All expressions use loss-less element values; the series resistances and
//! the diode drop in [`CircuitParams`] only enter the switched simulator.
//! `ts` is the switching period and `vdc` the source voltage throughout.

use crate::error::{Error, Result};
use crate::model::{CircuitParams, HalfCycle, OperatingPoint, SteadyStateSolution};

/// Below this |sin(ωt)| the line voltage is treated as an exact zero crossing.
const ZERO_CROSSING_EPS: f64 = 1e-12;

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

/// Vo/Vdc = sgn(Vo)·D/(1−D−D0).
pub fn voltage_gain(d: f64, d0: f64, half: HalfCycle) -> Result<f64> {
    if !(d > 0.0) || !(d0 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gain needs D > 0 and D0 >= 0, got D = {d}, D0 = {d0}"
        )));
    }
    let denom = 1.0 - d - d0;
    if denom <= 0.0 {
        return Err(Error::DegenerateDuty { sum: d + d0 });
    }
    Ok(half.sign() * d / denom)
}

/// Inverts the gain law for the idle fraction: D0 = 1 − D·(1 + Vdc/|vo|).
///
/// A negative result means the diode would still conduct at the next turn-on
/// and is reported as [`Error::CcmViolation`].
pub fn solve_d0(d: f64, vdc: f64, vo_abs: f64) -> Result<f64> {
    check_unit_open("D", d)?;
    if !(vdc > 0.0) || !(vo_abs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solve_d0 needs Vdc > 0 and |vo| > 0, got {vdc}, {vo_abs}"
        )));
    }
    let d0 = 1.0 - d * (1.0 + vdc / vo_abs);
    if d0 < 0.0 {
        Err(Error::CcmViolation { d, d0 })
    } else {
        Ok(d0)
    }
}

/// Peak-to-peak inductor ripples over the on-interval, (ΔI_L1, ΔI_L2).
pub fn ripple_currents(params: &CircuitParams, ts: f64, vdc: f64, d: f64) -> (f64, f64) {
    let volt_sec = d * ts * vdc;
    (volt_sec / params.l1, volt_sec / params.l2)
}

/// Valley current of L1 (equal to −I_L2v) at the start of the on-interval.
///
/// The design keeps this negative: a positive valley needs L2/L1 below the
/// instantaneous gain, which cannot hold at the zero crossings.
pub fn valley_current(params: &CircuitParams, ts: f64, vdc: f64, d: f64, d0: f64) -> f64 {
    0.5 * d * ts * vdc * (d / params.l2 - (1.0 - d - d0) / params.l1)
}

/// Switching-period average of the source current, D²·Ts·Vdc/(2·Leq).
pub fn avg_dc_current(params: &CircuitParams, ts: f64, vdc: f64, d: f64) -> f64 {
    d * d * ts * vdc / (2.0 * params.leq())
}

/// Switching-period average magnitude of the unfolder input current.
///
/// Same value in both half cycles; the half cycle is accepted so call sites
/// read naturally next to [`voltage_gain`].
pub fn avg_output_current(
    params: &CircuitParams,
    ts: f64,
    vdc: f64,
    d: f64,
    d0: f64,
    _half: HalfCycle,
) -> f64 {
    (1.0 - d - d0) * d * ts * vdc / (2.0 * params.leq())
}

/// Peak duty that draws an average `ipv` from a source at `vpv` when the
/// duty follows a rectified sine.
pub fn d_peak(ipv: f64, params: &CircuitParams, ts: f64, vpv: f64) -> Result<f64> {
    if !(ipv >= 0.0) || !(vpv > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duty law needs Ipv >= 0 and Vpv > 0, got {ipv}, {vpv}"
        )));
    }
    let dp = 2.0 * (ipv * params.leq() / (ts * vpv)).sqrt();
    if dp >= 1.0 {
        return Err(Error::DutyOverflow { d_peak: dp });
    }
    Ok(dp)
}

/// D(ωt) = D_peak·|sin ωt|.
pub fn duty_law(ipv: f64, params: &CircuitParams, ts: f64, vpv: f64, omega_t: f64) -> Result<f64> {
    Ok(d_peak(ipv, params, ts, vpv)? * omega_t.sin().abs())
}

/// D/(1−D−D0) − L2/L1. Positive means the L1 valley current would turn
/// positive; the value is reported, not enforced.
pub fn dcm_inequality_margin(params: &CircuitParams, d: f64, d0: f64) -> Result<f64> {
    let denom = 1.0 - d - d0;
    if denom <= 0.0 {
        return Err(Error::DegenerateDuty { sum: d + d0 });
    }
    Ok(d / denom - params.l2 / params.l1)
}

fn half_at(omega_t: f64) -> HalfCycle {
    if omega_t.sin() >= 0.0 {
        HalfCycle::Sepic
    } else {
        HalfCycle::Cuk
    }
}

fn zero_crossing_solution(vdc: f64) -> SteadyStateSolution {
    SteadyStateSolution {
        vc1_avg: vdc,
        ..Default::default()
    }
}

fn assemble(
    params: &CircuitParams,
    op: &OperatingPoint,
    d: f64,
    d0: f64,
    vo_abs: f64,
    half: HalfCycle,
) -> SteadyStateSolution {
    let ts = op.ts();
    let (d_il1, d_il2) = ripple_currents(params, ts, op.vdc, d);
    let il1_valley = valley_current(params, ts, op.vdc, d, d0);
    let il2_valley = -il1_valley;
    SteadyStateSolution {
        d,
        d0,
        d_il1,
        d_il2,
        il1_valley,
        il1_peak: il1_valley + d_il1,
        il2_valley,
        il2_peak: il2_valley + d_il2,
        idc_avg: avg_dc_current(params, ts, op.vdc, d),
        i2_avg: avg_output_current(params, ts, op.vdc, d, d0, half),
        vc1_avg: match half {
            HalfCycle::Sepic => op.vdc,
            HalfCycle::Cuk => op.vdc + vo_abs,
        },
        ccm_violation: false,
    }
}

/// Full closed-form solution at line angle `omega_t` for the duty law that
/// draws `op.ipv`. Returns the all-zero solution at exact zero crossings.
pub fn steady_state_at_angle(
    params: &CircuitParams,
    op: &OperatingPoint,
    omega_t: f64,
) -> Result<SteadyStateSolution> {
    let sol = steady_state_clamped(params, op, omega_t)?;
    if sol.ccm_violation {
        let d0 = 1.0 - sol.d * (1.0 + op.vdc / (op.v_om() * omega_t.sin().abs()));
        return Err(Error::CcmViolation { d: sol.d, d0 });
    }
    Ok(sol)
}

/// Like [`steady_state_at_angle`] but clamps a negative D0 to zero and sets
/// `ccm_violation` instead of failing. Used for tabulating whole line cycles.
pub fn steady_state_clamped(
    params: &CircuitParams,
    op: &OperatingPoint,
    omega_t: f64,
) -> Result<SteadyStateSolution> {
    let ts = op.ts();
    let d = duty_law(op.ipv, params, ts, op.vdc, omega_t)?;
    let s = omega_t.sin().abs();
    if s < ZERO_CROSSING_EPS || d == 0.0 {
        return Ok(zero_crossing_solution(op.vdc));
    }
    let vo_abs = op.v_om() * s;
    let half = half_at(omega_t);
    match solve_d0(d, op.vdc, vo_abs) {
        Ok(d0) => Ok(assemble(params, op, d, d0, vo_abs, half)),
        Err(Error::CcmViolation { .. }) => {
            let mut sol = assemble(params, op, d, 0.0, vo_abs, half);
            sol.ccm_violation = true;
            Ok(sol)
        }
        Err(e) => Err(e),
    }
}
