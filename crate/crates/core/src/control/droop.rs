//! Piecewise-linear droop baselines.

use crate::dataset::LocalDataset;
use crate::error::{Error, Result};

/// Box and voltage band of a droop curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopParams {
    pub q_min: f64,
    pub q_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl DroopParams {
    pub fn new(q_min: f64, q_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(v_min < v_max) || !(q_min <= q_max) {
            return Err(Error::Parameter(format!(
                "droop needs v_min < v_max and q_min ≤ q_max (got v [{v_min}, {v_max}], q [{q_min}, {q_max}])"
            )));
        }
        Ok(DroopParams {
            q_min,
            q_max,
            v_min,
            v_max,
        })
    }

    pub fn of(dataset: &LocalDataset) -> Result<Self> {
        let d = dataset.der;
        Self::new(d.q_min, d.q_max, d.v_min, d.v_max)
    }

    pub fn slope(&self) -> f64 {
        (self.q_max - self.q_min) / (self.v_max - self.v_min)
    }
}

/// `q_max` below `v_min`, `q_min` above `v_max`, linear in between.
pub fn droop_standard(v: f64, p: &DroopParams) -> f64 {
    if v <= p.v_min {
        p.q_max
    } else if v >= p.v_max {
        p.q_min
    } else {
        p.q_max - p.slope() * (v - p.v_min)
    }
}

/// Droop with a deadband `[dead_lo, dead_hi]`: saturation at `q_max`, ramp to
/// zero, deadband, ramp to `q_min`, saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedDroop {
    pub params: DroopParams,
    pub dead_lo: f64,
    pub dead_hi: f64,
}

impl OptimizedDroop {
    pub fn new(params: DroopParams, dead_lo: f64, dead_hi: f64) -> Result<Self> {
        if !(params.v_min < dead_lo && dead_lo <= dead_hi && dead_hi < params.v_max) {
            return Err(Error::Parameter(format!(
                "deadband [{dead_lo}, {dead_hi}] must satisfy {} < lo ≤ hi < {}",
                params.v_min, params.v_max
            )));
        }
        Ok(OptimizedDroop {
            params,
            dead_lo,
            dead_hi,
        })
    }

    pub fn eval(&self, v: f64) -> f64 {
        droop_optimized(v, self)
    }

    pub fn lipschitz(&self) -> f64 {
        let p = &self.params;
        (p.q_max.abs() / (self.dead_lo - p.v_min)).max(p.q_min.abs() / (p.v_max - self.dead_hi))
    }
}

pub fn droop_optimized(v: f64, d: &OptimizedDroop) -> f64 {
    let p = &d.params;
    if v <= p.v_min {
        p.q_max
    } else if v < d.dead_lo {
        p.q_max * (d.dead_lo - v) / (d.dead_lo - p.v_min)
    } else if v <= d.dead_hi {
        0.0
    } else if v < p.v_max {
        p.q_min * (v - d.dead_hi) / (p.v_max - d.dead_hi)
    } else {
        p.q_min
    }
}

/// Grid search (spacing `resolution`) over deadbands minimizing the squared
/// error of the curve on the real points of each dataset. Ties go to the
/// smallest lower edge, then the smallest upper edge.
pub fn optimize_droop_params(datasets: &[LocalDataset], resolution: f64) -> Result<Vec<OptimizedDroop>> {
    if !(resolution > 0.0) {
        return Err(Error::Parameter("deadband grid spacing must be positive".into()));
    }
    datasets
        .iter()
        .map(|dataset| {
            let params = DroopParams::of(dataset)?;
            let points: Vec<(f64, f64)> = dataset.real_points().map(|p| (p.v, p.q)).collect();
            if points.is_empty() {
                return Err(Error::EmptyDataset(format!("bus {} has no real points", dataset.der.bus)));
            }
            let steps = ((params.v_max - params.v_min) / resolution).round() as usize;
            let edge = |k: usize| params.v_min + (params.v_max - params.v_min) * k as f64 / steps as f64;
            let mut best: Option<(f64, OptimizedDroop)> = None;
            for i in 1..steps {
                for j in i..steps {
                    let curve = OptimizedDroop::new(params, edge(i), edge(j))?;
                    let loss: f64 = points
                        .iter()
                        .map(|(v, q)| (q - curve.eval(*v)).powi(2))
                        .sum();
                    if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                        best = Some((loss, curve));
                    }
                }
            }
            best.map(|(_, c)| c)
                .ok_or_else(|| Error::Parameter("deadband grid too coarse".into()))
        })
        .collect()
}
