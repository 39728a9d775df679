//! Event-driven time-domain simulation of the switched circuit.
//!
//! Time advances on a uniform grid of `Ts/N` steps (N = ceil(Ts/dt_max)).
//! Steps are split at the S1 turn-off instant and at diode events; diode
//! zero-current instants are located by bisection on the integrated
//! trajectory. The duty is latched once per period at its start, and the
//! unfolder changes polarity only on period boundaries, with S1 held off for
//! that period.

pub mod dynamics;
pub mod integrator;
pub mod record;

pub use dynamics::{mode_dynamics, Aux, Circuit, Gates};
pub use integrator::Integrator;
pub use record::{PeriodSummary, RunDiagnostics, Sample, WaveformRecord, CSV_HEADER};

use crate::control::ControllerHandle;
use crate::error::{Error, Result};
use crate::model::{CircuitParams, ConverterState, HalfCycle, ModeId, OperatingPoint};
use dynamics::{acc, N_ACC};

/// States beyond this magnitude (base units) abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Highest duty the PWM stage will latch.
const MAX_DUTY: f64 = 0.999;

/// Guard on diode re-entries within one period.
const MAX_EVENTS_PER_PERIOD: u32 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Largest integration step (s); at most Ts/100.
    pub dt_max: f64,
    /// Diode-current tolerance at a located zero crossing (A).
    pub event_tol: f64,
    pub t_end: f64,
    /// Keep every n-th grid point as a sample.
    pub record_decimation: usize,
    pub integrator: Integrator,
    /// Samples before this time are not stored (period summaries always are).
    pub record_start: f64,
    /// Starting state; all zeros when `None`.
    pub initial_state: Option<ConverterState>,
}

impl SimConfig {
    /// Ts/200 RK4 steps, 1 mA event tolerance, 0.1 s.
    pub fn for_operating_point(op: &OperatingPoint) -> Self {
        Self {
            dt_max: op.ts() / 200.0,
            event_tol: 1e-3,
            t_end: 0.1,
            record_decimation: 10,
            integrator: Integrator::Rk4,
            record_start: 0.0,
            initial_state: None,
        }
    }

    pub fn validate(&self, op: &OperatingPoint) -> Result<()> {
        let ts = op.ts();
        if !(self.dt_max > 0.0) || self.dt_max > ts / 100.0 * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "dt_max = {:.3e} s must be in (0, Ts/100 = {:.3e}]",
                self.dt_max,
                ts / 100.0
            )));
        }
        if !(self.event_tol > 0.0) {
            return Err(Error::Config("event_tol must be > 0".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if self.record_decimation == 0 {
            return Err(Error::Config("record_decimation must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gate pattern for S1 and the unfolding bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSchedule {
    pub t_period_start: f64,
    pub ts: f64,
    pub duty: f64,
    pub half: HalfCycle,
}

impl GateSchedule {
    /// S1 is on over `[kTs, kTs + d·Ts)`.
    pub fn s1(&self, t: f64) -> bool {
        let local = t - self.t_period_start;
        local >= 0.0 && local < self.duty * self.ts
    }

    pub fn gates(&self, t: f64) -> Gates {
        Gates {
            s1: self.s1(t),
            half: self.half,
        }
    }
}

/// Folds converter-frame output voltage and current into grid-frame values.
pub fn unfold(v_c2: f64, i_conv: f64, half: HalfCycle) -> (f64, f64) {
    let s = half.sign();
    (s * v_c2, s * i_conv)
}

/// A located topology change inside one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Position of the event within the step, in [0, 1].
    pub fraction: f64,
    pub new_mode: ModeId,
}

/// Diode turn-off between two step endpoints while in ModeII, with the
/// crossing fraction estimated by linear interpolation of iL1 + iL2.
/// Switch events come from the gate schedule, not from here.
pub fn detect_mode_transition(
    before: &ConverterState,
    after: &ConverterState,
    gates: Gates,
) -> Option<Transition> {
    if gates.s1 || before.mode != ModeId::II {
        return None;
    }
    let g0 = before.diode_current();
    let g1 = after.diode_current();
    if g0 <= 0.0 {
        return Some(Transition {
            fraction: 0.0,
            new_mode: ModeId::III,
        });
    }
    if g1 <= 0.0 {
        return Some(Transition {
            fraction: g0 / (g0 - g1),
            new_mode: ModeId::III,
        });
    }
    None
}

/// Output of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub record: WaveformRecord,
    pub diagnostics: RunDiagnostics,
    pub final_state: ConverterState,
}

struct Runner<'a> {
    circuit: Circuit,
    cfg: &'a SimConfig,
    x: [f64; 5],
    mode: ModeId,
    half: HalfCycle,
    acc: [f64; N_ACC],
    mode_time: [f64; 3],
    reentries: u32,
    events: u32,
}

impl Runner<'_> {
    fn state(&self) -> ConverterState {
        ConverterState {
            i_l1: self.x[0],
            i_l2: self.x[1],
            v_c1: self.x[2],
            v_c2: self.x[3],
            i_lg: self.x[4],
            mode: self.mode,
            half: self.half,
        }
    }

    fn step(&self, t: f64, x: &[f64; 5], h: f64) -> ([f64; 5], [f64; N_ACC]) {
        integrator::step(
            self.cfg.integrator,
            &self.circuit,
            t,
            x,
            self.mode,
            self.half,
            h,
        )
    }

    fn accept(&mut self, x: [f64; 5], inc: &[f64; N_ACC], h: f64) {
        self.x = x;
        for (a, d) in self.acc.iter_mut().zip(inc) {
            *a += d;
        }
        self.mode_time[self.mode.index()] += h;
    }

    fn enter_mode3(&mut self) {
        let i = 0.5 * (self.x[0] - self.x[1]);
        self.x[0] = i;
        self.x[1] = -i;
        self.mode = ModeId::III;
    }

    /// Rate of change of the diode current if ModeII were active now.
    fn diode_current_slope(&self, t: f64) -> f64 {
        let (dx, _) = self.circuit.eval(t, &self.x, ModeId::II, self.half);
        dx[0] + dx[1]
    }

    fn diode_bias(&self, t: f64, x: &[f64; 5]) -> f64 {
        self.circuit.eval(t, x, self.mode, self.half).1.diode_bias
    }

    /// Finds θ in (0, 1] where `g` crosses zero along the step from `t` of
    /// length `h`, starting from a seed. `g(θ=0)` and `g(θ=1)` have opposite
    /// signs (or g(1) is zero). Returns θ with the state and increments there.
    fn locate<G>(&self, t: f64, h: f64, seed: f64, tol: f64, g: G) -> (f64, [f64; 5], [f64; N_ACC])
    where
        G: Fn(&[f64; 5], f64) -> f64,
    {
        let x0 = self.x;
        let g0 = g(&x0, t);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut theta = seed.clamp(1e-9, 1.0);
        let mut best = self.step(t, &x0, theta * h);
        for _ in 0..80 {
            let gv = g(&best.0, t + theta * h);
            if gv.abs() <= tol || (hi - lo) < 1e-12 {
                break;
            }
            if (gv > 0.0) == (g0 > 0.0) {
                lo = theta;
            } else {
                hi = theta;
            }
            theta = 0.5 * (lo + hi);
            best = self.step(t, &x0, theta * h);
        }
        (theta, best.0, best.1)
    }

    /// Integrates from `t` to `t_stop` in the current S1 state, splitting at
    /// diode events. Returns an error on divergence.
    fn advance(&mut self, mut t: f64, t_stop: f64) -> Result<()> {
        let eps = 1e-6 * (t_stop - t).abs().max(1e-18);
        while t_stop - t > eps {
            let h = t_stop - t;
            match self.mode {
                ModeId::II if self.x[0] + self.x[1] <= 0.0 => {
                    self.enter_mode3();
                    continue;
                }
                ModeId::III
                    if self.events < MAX_EVENTS_PER_PERIOD
                        && self.diode_bias(t, &self.x) > 0.0
                        && self.diode_current_slope(t) > 0.0 =>
                {
                    self.mode = ModeId::II;
                    self.reentries += 1;
                    self.events += 1;
                    continue;
                }
                _ => {}
            }
            let (x1, inc) = self.step(t, &self.x, h);
            match self.mode {
                ModeId::II => {
                    let before = self.state();
                    let after = before.with_array(&x1);
                    let gates = Gates {
                        s1: false,
                        half: self.half,
                    };
                    if let Some(tr) = detect_mode_transition(&before, &after, gates) {
                        let tol = self.cfg.event_tol;
                        let (theta, xe, ince) =
                            self.locate(t, h, tr.fraction, tol, |x, _| x[0] + x[1]);
                        self.accept(xe, &ince, theta * h);
                        t += theta * h;
                        self.enter_mode3();
                        self.events += 1;
                        continue;
                    }
                }
                ModeId::III if self.events < MAX_EVENTS_PER_PERIOD => {
                    let b1 = self.diode_bias(t + h, &x1);
                    if b1 > 0.0 {
                        let b0 = self.diode_bias(t, &self.x);
                        let seed = if b1 > b0 { -b0 / (b1 - b0) } else { 0.5 };
                        let vtol = 1e-9 * self.circuit.vdc.abs().max(1.0);
                        let (theta, xe, ince) = self.locate(t, h, seed, vtol, |x, tt| {
                            self.circuit
                                .eval(tt, x, ModeId::III, self.half)
                                .1
                                .diode_bias
                        });
                        self.accept(xe, &ince, theta * h);
                        t += theta * h;
                        self.events += 1;
                        // Re-evaluated at the top of the loop.
                        continue;
                    }
                }
                _ => {}
            }
            self.accept(x1, &inc, h);
            t = t_stop;
        }
        for (v, name) in self.x.iter().zip(["iL1", "iL2", "vC1", "vC2", "iLg"]) {
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Err(Error::NumericalDivergence {
                    t,
                    signal: name,
                    value: *v,
                });
            }
        }
        Ok(())
    }
}

/// Simulates `sim.t_end` seconds (rounded up to whole switching periods).
pub fn run_simulation(
    params: &CircuitParams,
    op: &OperatingPoint,
    mut controller: ControllerHandle,
    sim: &SimConfig,
) -> Result<SimOutput> {
    params.validate()?;
    op.validate().map_err(|e| Error::Config(e.to_string()))?;
    sim.validate(op)?;

    let ts = op.ts();
    let steps = ((ts / sim.dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = ts / steps as f64;
    let n_periods = ((sim.t_end / ts) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    controller.attach(ts);

    let circuit = Circuit::new(*params, op.vdc, op.load, op.fg);
    let init = sim.initial_state.unwrap_or_else(|| ConverterState {
        half: controller.half_cycle(0.5 * ts),
        ..ConverterState::zero()
    });
    let mut run = Runner {
        circuit,
        cfg: sim,
        x: init.as_array(),
        mode: init.mode,
        half: init.half,
        acc: [0.0; N_ACC],
        mode_time: [0.0; 3],
        reentries: 0,
        events: 0,
    };

    let mut record = WaveformRecord {
        dt: h * sim.record_decimation as f64,
        fs: op.fs,
        fg: op.fg,
        samples: Vec::new(),
        periods: Vec::with_capacity(n_periods),
    };
    let mut diag = RunDiagnostics {
        stored_start: circuit.stored_energy(&init),
        ..Default::default()
    };

    for k in 0..n_periods {
        let base = k * steps;
        let t0 = base as f64 * h;
        let half_k = controller.half_cycle(t0 + 0.5 * ts);
        let blanked = half_k != run.half;
        if blanked {
            run.x[3] = -run.x[3];
            run.half = half_k;
        }
        let duty = if blanked {
            0.0
        } else {
            controller.duty_command(t0).clamp(0.0, MAX_DUTY)
        };
        let stored_start = circuit.stored_energy(&run.state());

        let (mut v_on, mut i_on) = (0.0, 0.0);
        if duty > 0.0 {
            if run.mode == ModeId::II {
                if let Some(prev) = record.periods.last_mut() {
                    prev.ccm = true;
                }
                diag.ccm_periods += 1;
            }
            v_on = circuit.eval(t0, &run.x, run.mode, run.half).1.v_s1;
            i_on = match run.mode {
                ModeId::II => run.x[0] + run.x[1],
                _ => 0.0,
            };
            run.mode = ModeId::I;
        }
        // S1 turns off `frac` of the way into step `n_off`.
        let on_steps = duty * steps as f64;
        let n_off = (on_steps + 1e-9).floor() as usize;
        let frac = (on_steps - n_off as f64).max(0.0);
        run.acc = [0.0; N_ACC];
        run.mode_time = [0.0; 3];
        run.reentries = 0;
        run.events = 0;
        let (mut v_off, mut i_off) = (0.0, 0.0);

        for n in 0..steps {
            let ta = (base + n) as f64 * h;
            let tb = (base + n + 1) as f64 * h;
            if (base + n) % sim.record_decimation == 0 && ta >= sim.record_start - 0.5 * h {
                let st = run.state();
                let (_, aux) = circuit.eval(ta, &run.x, run.mode, run.half);
                record.samples.push(Sample {
                    t: ta,
                    state: st,
                    duty,
                    vo: aux.vo,
                    io: aux.io,
                    idc: st.i_l1,
                    i_unf: aux.i_unf,
                });
            }
            if run.mode == ModeId::I && n == n_off {
                let t_off = if frac > 1e-9 { ta + frac * h } else { ta };
                run.advance(ta, t_off)?;
                i_off = run.x[0] + run.x[1];
                if i_off > 0.0 {
                    run.mode = ModeId::II;
                } else {
                    run.enter_mode3();
                }
                v_off = circuit.eval(t_off, &run.x, run.mode, run.half).1.v_s1;
                run.advance(t_off, tb)?;
            } else {
                run.advance(ta, tb)?;
            }
            diag.i_l1.update(run.x[0]);
            diag.i_l2.update(run.x[1]);
            diag.v_c1.update(run.x[2]);
            diag.v_c2.update(run.x[3]);
            diag.i_lg.update(run.x[4]);
        }

        let stored_end = circuit.stored_energy(&run.state());
        diag.energy_in += run.acc[acc::E_IN];
        diag.energy_load += run.acc[acc::E_LOAD];
        diag.energy_dissipated += circuit.dissipated(&run.acc);
        diag.reentries += run.reentries as usize;
        if blanked {
            diag.blanked_periods += 1;
        }
        controller.observe_period(run.acc[acc::SQ_VO] / ts, run.acc[acc::SQ_IO] / ts);
        record.periods.push(PeriodSummary {
            index: k,
            t_start: t0,
            ts,
            half: run.half,
            duty,
            blanked,
            mode_time: run.mode_time,
            ccm: false,
            reentries: run.reentries,
            integrals: run.acc,
            stored_start,
            stored_end,
            v_off,
            i_off,
            v_on,
            i_on,
            diode_fraction: run.mode_time[1] / ts,
        });
    }

    let final_state = run.state();
    diag.periods = n_periods;
    diag.stored_end = circuit.stored_energy(&final_state);
    diag.final_d_peak = controller.d_peak();
    Ok(SimOutput {
        record,
        diagnostics: diag,
        final_state,
    })
}
