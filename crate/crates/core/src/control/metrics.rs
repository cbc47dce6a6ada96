//! Evaluation metrics and summary output.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{LocalRule, SimulationTrace};
use crate::dataset::LocalDataset;
use crate::error::{Error, Result};
use crate::grid::SensitivityModel;

/// Mean squared error of `rules` over the real points of all datasets:
/// `Σ_k ‖q★_k − rule(v★_k)‖² / (K·C)`.
pub fn avg_loss(datasets: &[LocalDataset], rules: &[LocalRule]) -> Result<f64> {
    if datasets.len() != rules.len() {
        return Err(Error::Dimension {
            context: "rules per dataset",
            expected: datasets.len(),
            got: rules.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (dataset, rule) in datasets.iter().zip(rules) {
        for p in dataset.real_points() {
            total += (p.q - rule.eval(p.v)).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyDataset("no real points to evaluate".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    /// `‖q_C(t) − q★‖₂` for every recorded step of every trace, in order.
    pub per_step: Vec<f64>,
    pub average: f64,
}

/// Distances between trace setpoints and the reference optimum of the
/// scenario each step belongs to. `references[i]` must belong to `traces[i]`.
pub fn distance_metric(traces: &[SimulationTrace], references: &[(usize, DVector<f64>)]) -> Result<DistanceReport> {
    if traces.len() != references.len() {
        return Err(Error::Dimension {
            context: "reference solutions per trace",
            expected: traces.len(),
            got: references.len(),
        });
    }
    let mut per_step = Vec::new();
    for (trace, (scenario, q_star)) in traces.iter().zip(references) {
        if trace.scenario != *scenario {
            return Err(Error::Parameter(format!(
                "trace for scenario {} paired with reference for scenario {scenario}",
                trace.scenario
            )));
        }
        for q in &trace.q_history {
            if q.len() != q_star.len() {
                return Err(Error::Dimension {
                    context: "reference solution",
                    expected: q.len(),
                    got: q_star.len(),
                });
            }
            per_step.push((q - q_star).norm());
        }
    }
    let average = if per_step.is_empty() {
        0.0
    } else {
        per_step.iter().sum::<f64>() / per_step.len() as f64
    };
    Ok(DistanceReport { per_step, average })
}

/// One line of a day-run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: String,
    pub alpha: f64,
    pub noise: f64,
    pub epsilon: f64,
    pub flow: String,
    pub scenarios: usize,
    pub converged: usize,
    pub oscillating: usize,
    pub flow_failures: usize,
    pub avg_distance: f64,
    /// Largest voltage-limit violation seen at the end of any scenario.
    pub max_violation: f64,
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes one row per kept step: `step, scenario_id, q_<bus>` per DER,
/// `v_<bus>` for buses `1..=N`, `residual`. Steps are numbered from 1 within
/// each scenario. `stride = Some(k)` keeps every `k`-th step plus the last
/// (voltages must have been recorded at every step); `None` keeps only the
/// last step of each scenario.
pub fn write_trace_csv(
    path: impl AsRef<Path>,
    model: &SensitivityModel,
    traces: &[SimulationTrace],
    stride: Option<usize>,
) -> Result<()> {
    if stride == Some(0) {
        return Err(Error::Parameter("trace stride must be positive".into()));
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string(), "scenario_id".to_string()];
    header.extend(model.der_pos.iter().map(|pos| format!("q_{}", pos + 1)));
    header.extend((1..=model.n).map(|b| format!("v_{b}")));
    header.push("residual".into());
    writer.write_record(&header)?;
    for trace in traces {
        let steps = trace.q_history.len();
        if steps == 0 {
            continue;
        }
        let keep: Vec<usize> = match stride {
            None => vec![steps - 1],
            Some(k) => (0..steps).filter(|t| (t + 1) % k == 0 || t + 1 == steps).collect(),
        };
        for t in keep {
            let v = if t + 1 == steps {
                trace.v_history.last()
            } else {
                trace.v_history.get(t).filter(|_| trace.v_history.len() == steps)
            };
            let v = v.ok_or_else(|| {
                Error::Parameter(format!(
                    "scenario {}: voltages of step {} were not recorded",
                    trace.scenario,
                    t + 1
                ))
            })?;
            let mut row = vec![(t + 1).to_string(), trace.scenario.to_string()];
            row.extend(trace.q_history[t].iter().map(|x| x.to_string()));
            row.extend(v.iter().map(|x| x.to_string()));
            row.push(trace.residuals[t].to_string());
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}
