//! Outer control loop: rms measurement, PI regulation of the peak duty,
//! rectified-sine modulation and half-cycle selection.
//!
//! The phase reference is ideal, θ(t) = 2π·fg·t.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::HalfCycle;

/// Peak duty never exceeds this value under closed-loop control.
pub const D_PEAK_MAX: f64 = 0.95;

/// PI regulator with output clamping and conditional integration.
#[derive(Debug, Clone, PartialEq)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    /// Accumulated error·seconds.
    pub integral: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PiState {
    pub fn new(kp: f64, ki: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "PI limits need lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            kp,
            ki,
            integral: 0.0,
            lo,
            hi,
        })
    }

    /// Gains used for the simulated resistive-load regulation, clamped to
    /// `[0, D_PEAK_MAX]`.
    pub fn table1() -> Self {
        Self::new(0.5, 60.0, 0.0, D_PEAK_MAX).expect("static limits")
    }

    /// Output for `error` with the current integral, clamped.
    pub fn output(&self, error: f64) -> f64 {
        (self.kp * error + self.ki * self.integral).clamp(self.lo, self.hi)
    }

    /// Advances the integral by `error·dt` unless that would push an already
    /// saturated output further into saturation, then returns the output.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let candidate = self.integral + error * dt;
        let raw = self.kp * error + self.ki * candidate;
        let winding_up = (raw > self.hi && error > 0.0) || (raw < self.lo && error < 0.0);
        if !winding_up {
            self.integral = candidate;
        } else if self.ki > 0.0 {
            // Stop the integrator exactly at the limit it was heading for.
            let edge = if error > 0.0 { self.hi } else { self.lo };
            let at_edge = (edge - self.kp * error) / self.ki;
            self.integral = if error > 0.0 {
                at_edge.clamp(self.integral, candidate)
            } else {
                at_edge.clamp(candidate, self.integral)
            };
        }
        self.output(error)
    }
}

/// Free function form of [`PiState::step`].
pub fn pi_step(pi: &mut PiState, error: f64, dt: f64) -> f64 {
    pi.step(error, dt)
}

/// What the outer loop regulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlMode {
    /// Track an rms output-current reference (from an MPPT stage). Error in A.
    CurrentReference { iorms_ref: f64 },
    /// Hold the output rms voltage on a resistive load. Error in per unit of
    /// the reference.
    VoltageRegulation { vorms_ref: f64 },
    /// Fixed peak duty with rectified-sine modulation, no feedback.
    OpenLoop { d_peak: f64 },
    /// Constant duty in every period, no modulation and no feedback.
    FixedDuty { duty: f64 },
}

/// How often the PI is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiCadence {
    /// Every switching period, on the rms of the latest line half cycle
    /// (sliding window).
    SwitchingPeriod,
    /// Once per line half cycle, on the rms of that half cycle.
    HalfCycle,
}

/// Sliding window over per-period mean squares of the measured signal.
#[derive(Debug, Clone)]
struct RmsWindow {
    len: usize,
    buf: VecDeque<f64>,
}

impl RmsWindow {
    fn new(len: usize) -> Self {
        Self {
            len: len.max(1),
            buf: VecDeque::with_capacity(len.max(1)),
        }
    }

    fn push(&mut self, mean_sq: f64) {
        if self.buf.len() == self.len {
            self.buf.pop_front();
        }
        self.buf.push_back(mean_sq);
    }

    fn rms(&self) -> f64 {
        if self.buf.is_empty() {
            return 0.0;
        }
        let s: f64 = self.buf.iter().sum();
        (s / self.buf.len() as f64).max(0.0).sqrt()
    }
}

/// Controller owned by the simulation loop.
#[derive(Debug, Clone)]
pub struct ControllerHandle {
    pub mode: ControlMode,
    pub pi: PiState,
    pub cadence: PiCadence,
    /// Line frequency of the ideal phase reference.
    pub fg: f64,
    d_peak: f64,
    window: RmsWindow,
    period: f64,
    periods_seen: usize,
    last_rms: f64,
}

impl ControllerHandle {
    pub fn new(mode: ControlMode, pi: PiState, cadence: PiCadence, fg: f64) -> Result<Self> {
        let d_peak = match mode {
            ControlMode::OpenLoop { d_peak } => d_peak,
            ControlMode::FixedDuty { duty } => duty,
            ControlMode::CurrentReference { iorms_ref } if !(iorms_ref > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "current reference must be > 0, got {iorms_ref}"
                )))
            }
            ControlMode::VoltageRegulation { vorms_ref } if !(vorms_ref > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "voltage reference must be > 0, got {vorms_ref}"
                )))
            }
            _ => pi.output(0.0),
        };
        if !(0.0..1.0).contains(&d_peak) {
            return Err(Error::InvalidParameter(format!(
                "duty must lie in [0, 1), got {d_peak}"
            )));
        }
        Ok(Self {
            mode,
            pi,
            cadence,
            fg,
            d_peak,
            window: RmsWindow::new(1),
            period: 0.0,
            periods_seen: 0,
            last_rms: 0.0,
        })
    }

    pub fn voltage_regulation(vorms_ref: f64, fg: f64) -> Result<Self> {
        Self::new(
            ControlMode::VoltageRegulation { vorms_ref },
            PiState::table1(),
            PiCadence::SwitchingPeriod,
            fg,
        )
    }

    pub fn current_reference(iorms_ref: f64, fg: f64) -> Result<Self> {
        Self::new(
            ControlMode::CurrentReference { iorms_ref },
            PiState::table1(),
            PiCadence::SwitchingPeriod,
            fg,
        )
    }

    pub fn open_loop(d_peak: f64, fg: f64) -> Result<Self> {
        Self::new(
            ControlMode::OpenLoop { d_peak },
            PiState::table1(),
            PiCadence::SwitchingPeriod,
            fg,
        )
    }

    pub fn fixed_duty(duty: f64) -> Result<Self> {
        Self::new(
            ControlMode::FixedDuty { duty },
            PiState::table1(),
            PiCadence::SwitchingPeriod,
            0.0,
        )
    }

    /// Sizes the rms window for switching period `ts`. Must be called before
    /// the first [`observe_period`](Self::observe_period).
    pub fn attach(&mut self, ts: f64) {
        self.period = ts;
        let per_half = if self.fg > 0.0 {
            (1.0 / (2.0 * self.fg * ts)).round() as usize
        } else {
            1
        };
        self.window = RmsWindow::new(per_half);
        self.periods_seen = 0;
    }

    pub fn d_peak(&self) -> f64 {
        self.d_peak
    }

    /// Most recent rms measurement fed to the PI.
    pub fn measured_rms(&self) -> f64 {
        self.last_rms
    }

    pub fn is_closed_loop(&self) -> bool {
        matches!(
            self.mode,
            ControlMode::CurrentReference { .. } | ControlMode::VoltageRegulation { .. }
        )
    }

    /// Duty latched at time `t` (start of a switching period).
    pub fn duty_command(&self, t: f64) -> f64 {
        match self.mode {
            ControlMode::FixedDuty { duty } => duty,
            _ => duty_command(self.d_peak, self.fg, t),
        }
    }

    pub fn half_cycle(&self, t: f64) -> HalfCycle {
        half_cycle_select(self.fg, t)
    }

    /// Feeds the mean squares of output voltage and current over the switching
    /// period that just ended and advances the PI when due.
    pub fn observe_period(&mut self, vo_mean_sq: f64, io_mean_sq: f64) {
        let (mean_sq, reference, per_unit) = match self.mode {
            ControlMode::CurrentReference { iorms_ref } => (io_mean_sq, iorms_ref, false),
            ControlMode::VoltageRegulation { vorms_ref } => (vo_mean_sq, vorms_ref, true),
            _ => return,
        };
        self.window.push(mean_sq);
        self.periods_seen += 1;
        let (due, dt) = match self.cadence {
            PiCadence::SwitchingPeriod => (true, self.period),
            PiCadence::HalfCycle => (
                self.periods_seen % self.window.len == 0,
                self.period * self.window.len as f64,
            ),
        };
        if !due {
            return;
        }
        self.last_rms = self.window.rms();
        let mut error = reference - self.last_rms;
        if per_unit {
            error /= reference;
        }
        self.d_peak = self.pi.step(error, dt);
    }
}

/// d(t) = D_peak·|sin(2π·fg·t)|.
pub fn duty_command(d_peak: f64, fg: f64, t: f64) -> f64 {
    d_peak * (2.0 * PI * fg * t).sin().abs()
}

/// Sepic on the non-negative half of the reference sine, Cuk otherwise.
/// Exact zero crossings belong to Sepic.
pub fn half_cycle_select(fg: f64, t: f64) -> HalfCycle {
    let phase = (fg * t).rem_euclid(1.0);
    if phase <= 0.5 {
        HalfCycle::Sepic
    } else {
        HalfCycle::Cuk
    }
}

/// Discrete rms of uniformly spaced samples (`dt` apart) spanning a whole
/// number of half cycles of `fg`, to within one sample.
pub fn measure_rms(samples: &[f64], dt: f64, fg: f64) -> Result<f64> {
    if samples.is_empty() || !(dt > 0.0) || !(fg > 0.0) {
        return Err(Error::Window("empty window or non-positive dt/fg".into()));
    }
    let half = 0.5 / fg;
    let span = samples.len() as f64 * dt;
    let halves = (span / half).round();
    if halves < 1.0 || (span - halves * half).abs() > dt * (1.0 + 1e-9) {
        return Err(Error::Window(format!(
            "window of {span:.6e} s is not a whole number of {half:.6e} s half cycles"
        )));
    }
    let ms = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    Ok(ms.sqrt())
}
