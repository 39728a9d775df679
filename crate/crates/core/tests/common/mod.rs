#![allow(dead_code)]

use std::f64::consts::PI;

use microinv_core::averaged;
use microinv_core::config::{Scenario, TABLE1_CFG};
use microinv_core::control::ControllerHandle;
use microinv_core::sim::{run_simulation, SimConfig, SimOutput};
use microinv_core::{CircuitParams, ConverterState, HalfCycle, LoadModel, ModeId, OperatingPoint};

pub fn table1() -> Scenario {
    Scenario::from_str(TABLE1_CFG).expect("bundled scenario parses")
}

pub fn run(s: &Scenario) -> SimOutput {
    run_simulation(&s.params, &s.op, s.controller().unwrap(), &s.sim).expect("simulation runs")
}

/// Ideal circuit feeding a stiff dc source at the line peak voltage, with
/// a constant duty `d` and the closed-form steady state as initial state.
/// C2 is enlarged a thousandfold so its ripple over one switching period is
/// negligible and the output is effectively clamped.
pub fn clamped_dc_run(d: f64, periods: usize) -> (CircuitParams, OperatingPoint, SimOutput) {
    let mut params = CircuitParams::table1().ideal();
    params.c2 *= 1000.0;
    let mut op = OperatingPoint::table1();
    op.fg = 0.0;
    op.load = LoadModel::GridSource {
        vo_rms: op.vo_rms,
        phase: PI / 2.0,
        lg: params.lg,
    };
    let ts = op.ts();
    let vo = op.v_om();
    let d0 = averaged::solve_d0(d, op.vdc, vo).unwrap();
    let valley = averaged::valley_current(&params, ts, op.vdc, d, d0);
    let i2 = averaged::avg_output_current(&params, ts, op.vdc, d, d0, HalfCycle::Sepic);
    let init = ConverterState {
        i_l1: valley,
        i_l2: -valley,
        v_c1: op.vdc,
        v_c2: vo,
        i_lg: i2,
        mode: ModeId::III,
        half: HalfCycle::Sepic,
    };
    let mut sim = SimConfig::for_operating_point(&op);
    sim.t_end = periods as f64 * ts;
    sim.initial_state = Some(init);
    sim.record_decimation = 1;
    let out = run_simulation(&params, &op, ControllerHandle::fixed_duty(d).unwrap(), &sim).unwrap();
    (params, op, out)
}
