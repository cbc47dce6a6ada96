//! Local Volt/Var control: the incremental update law, droop baselines,
//! closed-loop simulation and evaluation metrics.

mod droop;
mod metrics;
mod sim;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

pub use droop::{droop_optimized, droop_standard, optimize_droop_params, DroopParams, OptimizedDroop};
pub use metrics::{
    avg_loss, distance_metric, read_summary_csv, write_summary_csv, write_trace_csv, DistanceReport, SummaryRow,
};
pub use sim::{
    find_equilibrium, find_equilibrium_from, simulate, closed_loop_voltage_map, Equilibrium,
    SimulationTrace, TraceVerdict, CONVERGENCE_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::monotone::EquilibriumFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    /// `q⁺ = q + ε(φ(v) − q)` with learned `φ`.
    Incremental,
    /// `q⁺ = φ(v)`.
    NonIncremental,
    DroopStandard,
    DroopOptimized,
    /// `q ≡ 0`.
    None,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Incremental,
        ControllerKind::NonIncremental,
        ControllerKind::DroopStandard,
        ControllerKind::DroopOptimized,
        ControllerKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Incremental => "incremental",
            ControllerKind::NonIncremental => "non_incremental",
            ControllerKind::DroopStandard => "droop_standard",
            ControllerKind::DroopOptimized => "droop_optimized",
            ControllerKind::None => "none",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown controller {s:?} (expected one of incremental, non_incremental, droop_standard, droop_optimized, none)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowModel {
    Linearized,
    Ac,
}

impl fmt::Display for FlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowModel::Linearized => "linearized",
            FlowModel::Ac => "ac",
        })
    }
}

impl FromStr for FlowModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linearized" => Ok(FlowModel::Linearized),
            "ac" => Ok(FlowModel::Ac),
            other => Err(Error::Parameter(format!(
                "unknown flow model {other:?} (expected linearized or ac)"
            ))),
        }
    }
}

/// Which voltage rows a trace keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoltageRecord {
    EveryStep,
    LastStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub epsilon: f64,
    /// Control steps per scenario.
    pub iterations: usize,
    pub flow: FlowModel,
    /// Half-width of the multiplicative measurement noise.
    pub noise: f64,
    pub kind: ControllerKind,
    pub seed: u64,
    pub record: VoltageRecord,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            epsilon: 1.0,
            iterations: 120,
            flow: FlowModel::Linearized,
            noise: 0.0,
            kind: ControllerKind::Incremental,
            seed: 0,
            record: VoltageRecord::LastStep,
        }
    }
}

impl ControllerConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Parameter(format!(
                "stepsize {} outside (0, 1]",
                self.epsilon
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Parameter("at least one control step per scenario".into()));
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(Error::Parameter(format!("noise level {} outside [0, 1)", self.noise)));
        }
        Ok(())
    }

    /// The stepsize actually applied: the non-incremental rule always uses 1.
    pub fn effective_epsilon(&self) -> f64 {
        match self.kind {
            ControllerKind::NonIncremental => 1.0,
            _ => self.epsilon,
        }
    }
}

/// `min{1, 2/(‖X‖L + 1)²}`: stepsizes strictly below it give a globally
/// asymptotically stable closed loop.
pub fn stepsize_bound(x_norm: f64, lipschitz: f64) -> f64 {
    (2.0 / (x_norm * lipschitz + 1.0).powi(2)).min(1.0)
}

/// A per-DER voltage-to-reactive-power rule.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalRule {
    Learned(EquilibriumFunction),
    Standard(DroopParams),
    Optimized(OptimizedDroop),
    Zero,
}

impl LocalRule {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            LocalRule::Learned(phi) => phi.evaluate(v),
            LocalRule::Standard(p) => droop_standard(v, p),
            LocalRule::Optimized(d) => d.eval(v),
            LocalRule::Zero => 0.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            LocalRule::Learned(phi) => phi.lipschitz(),
            LocalRule::Standard(p) => p.slope(),
            LocalRule::Optimized(d) => d.lipschitz(),
            LocalRule::Zero => 0.0,
        }
    }
}

/// `max_n L_n` over a rule set.
pub fn max_lipschitz(rules: &[LocalRule]) -> f64 {
    rules.iter().map(LocalRule::lipschitz).fold(0.0, f64::max)
}

/// `q⁺_n = q_n + ε(φ_n(v_n) − q_n)`, kept between `q_n` and `φ_n(v_n)` so
/// rounding cannot leave the box.
pub fn control_step(q: &DVector<f64>, v_measured: &DVector<f64>, rules: &[LocalRule], epsilon: f64) -> DVector<f64> {
    DVector::from_fn(q.len(), |n, _| {
        let target = rules[n].eval(v_measured[n]);
        (q[n] + epsilon * (target - q[n])).clamp(q[n].min(target), q[n].max(target))
    })
}
