use thiserror::Error;

/// Errors raised by the model, simulator, design and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate duty: D + D0 = {sum:.6} leaves no diode interval")]
    DegenerateDuty { sum: f64 },

    #[error("converter would leave DCM: D0 = {d0:.6} < 0 at D = {d:.6}")]
    CcmViolation { d: f64, d0: f64 },

    #[error("peak duty {d_peak:.4} >= 1, requested power cannot be delivered")]
    DutyOverflow { d_peak: f64 },

    #[error("gates request S1 on while mode is {mode}")]
    InconsistentMode { mode: &'static str },

    #[error("numerical divergence at t = {t:.6e} s: |{signal}| = {value:.3e}")]
    NumericalDivergence {
        t: f64,
        signal: &'static str,
        value: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("{name} = {value:.4e} outside the allowed band [{lo:.4e}, {hi:.4e}]")]
    Range {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("energy mismatch: {unaccounted:.4e} unaccounted, {percent:.3}% of input")]
    EnergyMismatch { unaccounted: f64, percent: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
