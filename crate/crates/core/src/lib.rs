//! Data-driven local Volt/Var control on radial distribution feeders.
//!
//! The crate covers the whole offline/online pipeline:
//!
//! * [`grid`] builds the bus admittance matrix and the linear voltage
//!   sensitivity model of a feeder.
//! * [`power_flow`] solves the nonlinear AC power flow (Z-bus fixed point) and
//!   evaluates the linearized model.
//! * [`orpf`] solves the optimal reactive power flow problem with an
//!   operator-splitting method, plus a brute-force grid oracle.
//! * [`dataset`] turns scenario batches into per-DER `(v, q)` training sets.
//! * [`monotone`] holds the clamped, nonincreasing single-hidden-layer ReLU
//!   equilibrium functions and their trainer.
//! * [`pipeline`] strings the learning stage and day-long evaluation together.
//! * [`control`] runs the incremental control law and droop baselines in
//!   closed loop and computes the evaluation metrics.

pub mod control;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod linalg;
pub mod monotone;
pub mod orpf;
pub mod pipeline;
pub mod power_flow;
pub mod profiles;

pub use control::{
    ControllerConfig, ControllerKind, FlowModel, SimulationTrace, TraceVerdict,
};
pub use dataset::{LocalDataset, PointKind};
pub use error::{Error, Result};
pub use grid::{FeederSpec, SensitivityModel};
pub use monotone::{EquilibriumFunction, TrainConfig};
pub use orpf::{OrpfInstance, OrpfSolution, OrpfStatus};
pub use power_flow::{Scenario, VoltageSolution};
