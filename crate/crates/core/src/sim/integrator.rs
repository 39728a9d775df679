//! Single-step integrators for one fixed topology.

use nalgebra::{Matrix5, Vector5};

use super::dynamics::{Circuit, N_ACC};
use crate::model::{HalfCycle, ModeId};

/// Fixed-step scheme used inside each topology interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Trapezoidal,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::Trapezoidal => "trapezoidal",
        }
    }
}

fn axpy(x: &[f64; 5], a: f64, k: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| x[i] + a * k[i])
}

/// Advances `x` by `h` in the given topology. Returns the new state and the
/// increments of the running integrals.
pub fn step(
    method: Integrator,
    circuit: &Circuit,
    t: f64,
    x: &[f64; 5],
    mode: ModeId,
    half: HalfCycle,
    h: f64,
) -> ([f64; 5], [f64; N_ACC]) {
    match method {
        Integrator::Rk4 => rk4(circuit, t, x, mode, half, h),
        Integrator::Trapezoidal => trapezoidal(circuit, t, x, mode, half, h),
    }
}

fn rk4(
    c: &Circuit,
    t: f64,
    x: &[f64; 5],
    mode: ModeId,
    half: HalfCycle,
    h: f64,
) -> ([f64; 5], [f64; N_ACC]) {
    let (k1, a1) = c.eval(t, x, mode, half);
    let r1 = c.rates(x, &a1);
    let x2 = axpy(x, 0.5 * h, &k1);
    let (k2, a2) = c.eval(t + 0.5 * h, &x2, mode, half);
    let r2 = c.rates(&x2, &a2);
    let x3 = axpy(x, 0.5 * h, &k2);
    let (k3, a3) = c.eval(t + 0.5 * h, &x3, mode, half);
    let r3 = c.rates(&x3, &a3);
    let x4 = axpy(x, h, &k3);
    let (k4, a4) = c.eval(t + h, &x4, mode, half);
    let r4 = c.rates(&x4, &a4);

    let next =
        std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let inc = std::array::from_fn(|i| h / 6.0 * (r1[i] + 2.0 * r2[i] + 2.0 * r3[i] + r4[i]));
    (next, inc)
}

/// Trapezoidal rule on the affine system x' = A·x + b(t). A is recovered
/// column by column from the (exactly affine) right-hand side.
fn trapezoidal(
    c: &Circuit,
    t: f64,
    x: &[f64; 5],
    mode: ModeId,
    half: HalfCycle,
    h: f64,
) -> ([f64; 5], [f64; N_ACC]) {
    let zero = [0.0; 5];
    let b0 = Vector5::from(c.eval(t, &zero, mode, half).0);
    let b1 = Vector5::from(c.eval(t + h, &zero, mode, half).0);
    let mut a = Matrix5::zeros();
    for j in 0..5 {
        let mut e = [0.0; 5];
        e[j] = 1.0;
        let col = Vector5::from(c.eval(t, &e, mode, half).0) - b0;
        a.set_column(j, &col);
    }
    let x0 = Vector5::from(*x);
    let lhs = Matrix5::identity() - a * (0.5 * h);
    let rhs = x0 + (a * x0 + b0 + b1) * (0.5 * h);
    let x1 = lhs
        .lu()
        .solve(&rhs)
        .expect("I - h/2·A is invertible for physical element values");
    let next: [f64; 5] = x1.into();

    let (_, aux0) = c.eval(t, x, mode, half);
    let (_, aux1) = c.eval(t + h, &next, mode, half);
    let r0 = c.rates(x, &aux0);
    let r1 = c.rates(&next, &aux1);
    let inc = std::array::from_fn(|i| 0.5 * h * (r0[i] + r1[i]));
    (next, inc)
}
