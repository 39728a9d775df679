//! Averaged model, switched-circuit simulator, controller, component sizing
//! and waveform analysis for a single-stage SEPIC/Ćuk grid-tied
//! microinverter operating in discontinuous conduction.

pub mod analysis;
pub mod averaged;
pub mod config;
pub mod control;
pub mod design;
pub mod error;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    CircuitParams, ConverterState, HalfCycle, LoadModel, ModeId, OperatingPoint,
    SteadyStateSolution, SwitchParams,
};
