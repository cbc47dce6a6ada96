//! Optimal reactive power flow under the linearized voltage model.
//!
//! The cost trades voltage deviation against losses,
//! `f(q_C) = α‖v(q_C) − 1‖ + (1 − α)(qᵀR̃q + pᵀR̃p)` with `q = [q_C; q_L]`,
//! subject to the DER box and per-bus voltage bounds.

mod admm;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::SensitivityModel;
use crate::power_flow::Scenario;

use admm::{Problem, Settings, Term};

#[derive(Debug, Clone)]
pub struct OrpfInstance<'a> {
    pub model: &'a SensitivityModel,
    pub scenario: &'a Scenario,
    pub alpha: f64,
    pub q_min: DVector<f64>,
    pub q_max: DVector<f64>,
    pub v_min: DVector<f64>,
    pub v_max: DVector<f64>,
}

impl<'a> OrpfInstance<'a> {
    /// Instance using the feeder's own DER box and voltage bounds.
    pub fn new(model: &'a SensitivityModel, scenario: &'a Scenario, alpha: f64) -> Result<Self> {
        let instance = OrpfInstance {
            model,
            scenario,
            alpha,
            q_min: model.q_min.clone(),
            q_max: model.q_max.clone(),
            v_min: model.v_min.clone(),
            v_max: model.v_max.clone(),
        };
        instance.check()?;
        Ok(instance)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        self.scenario.check(self.model)?;
        let c = self.model.der_count();
        if self.q_min.len() != c || self.q_max.len() != c {
            return Err(Error::Dimension {
                context: "ORPF box",
                expected: c,
                got: self.q_min.len(),
            });
        }
        if self.q_min.iter().zip(self.q_max.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::Parameter("empty reactive box".into()));
        }
        if self.v_min.len() != self.model.n || self.v_max.len() != self.model.n {
            return Err(Error::Dimension {
                context: "ORPF voltage bounds",
                expected: self.model.n,
                got: self.v_min.len(),
            });
        }
        Ok(())
    }

    fn data(&self) -> InstanceData {
        let model = self.model;
        let a = model.voltage_map();
        let c = model.v_hat(self.scenario);
        let loss_weight = 1.0 - self.alpha;
        let p = &model.r * (2.0 * loss_weight);
        let l = (&model.r_l * &self.scenario.q_l) * (2.0 * loss_weight);
        let constant = loss_weight
            * (self.scenario.q_l.dot(&(&model.r_ll * &self.scenario.q_l))
                + self.scenario.p.dot(&(&model.rtilde * &self.scenario.p)));
        InstanceData { a, c, p, l, constant }
    }

    /// Linearized voltages at `q_c`.
    pub fn voltages(&self, q_c: &DVector<f64>) -> DVector<f64> {
        self.model.voltage_map() * q_c + self.model.v_hat(self.scenario)
    }

    /// Total voltage-bound violation `Σ dist(v_n, [v_min_n, v_max_n])`.
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        violation(v, &self.v_min, &self.v_max)
    }
}

struct InstanceData {
    a: DMatrix<f64>,
    c: DVector<f64>,
    p: DMatrix<f64>,
    l: DVector<f64>,
    constant: f64,
}

fn violation(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    v.iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(v, (lo, hi))| (lo - v).max(0.0) + (v - hi).max(0.0))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrpfStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl fmt::Display for OrpfStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrpfStatus::Optimal => "optimal",
            OrpfStatus::Infeasible => "infeasible",
            OrpfStatus::MaxIter => "max-iter",
        })
    }
}

impl FromStr for OrpfStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(OrpfStatus::Optimal),
            "infeasible" => Ok(OrpfStatus::Infeasible),
            "max-iter" => Ok(OrpfStatus::MaxIter),
            other => Err(Error::Parameter(format!("unknown ORPF status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrpfSolution {
    pub q_star: DVector<f64>,
    /// Linearized voltages at `q_star`, bus order.
    pub v_star: DVector<f64>,
    pub objective: f64,
    pub status: OrpfStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Smallest total voltage violation found over the box (the infeasibility
    /// certificate; `0` when the phase-1 search found a feasible point).
    pub min_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrpfOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Infeasible iff the minimum total voltage violation exceeds this.
    pub infeasibility_threshold: f64,
}

impl Default for OrpfOptions {
    fn default() -> Self {
        OrpfOptions {
            tolerance: 1e-8,
            max_iterations: 50_000,
            infeasibility_threshold: 1e-8,
        }
    }
}

/// Cost of `q_c` under the linearized model.
pub fn evaluate_cost(instance: &OrpfInstance<'_>, q_c: &DVector<f64>) -> f64 {
    let model = instance.model;
    let v = instance.voltages(q_c);
    let deviation = v.add_scalar(-1.0).norm();
    let q = model.assemble_q(q_c, &instance.scenario.q_l);
    let p = &instance.scenario.p;
    let losses = q.dot(&(&model.rtilde * &q)) + p.dot(&(&model.rtilde * p));
    instance.alpha * deviation + (1.0 - instance.alpha) * losses
}

pub fn solve_orpf(instance: &OrpfInstance<'_>) -> Result<OrpfSolution> {
    solve_orpf_with(instance, OrpfOptions::default())
}

/// Phase 1 (minimum voltage violation over the box) followed, when feasible,
/// by the ORPF proper. Deterministic: fixed start at `q = 0` projected onto the
/// box and a fixed update order.
pub fn solve_orpf_with(instance: &OrpfInstance<'_>, options: OrpfOptions) -> Result<OrpfSolution> {
    instance.check()?;
    let data = instance.data();
    let dim = instance.model.der_count();
    let start = DVector::from_fn(dim, |i, _| 0.0f64.clamp(instance.q_min[i], instance.q_max[i]));

    let feasibility = phase_one(instance, &data, &start, options);
    let phase_one_iterations = feasibility.iterations;
    if feasibility.min_violation > options.infeasibility_threshold {
        let v_star = &data.a * &feasibility.q + &data.c;
        return Ok(OrpfSolution {
            objective: evaluate_cost(instance, &feasibility.q),
            q_star: feasibility.q,
            v_star,
            status: OrpfStatus::Infeasible,
            kkt_residual: feasibility.residual,
            iterations: phase_one_iterations,
            min_violation: feasibility.min_violation,
        });
    }

    let mut terms = vec![Term::Bounds {
        lo: instance.v_min.clone(),
        hi: instance.v_max.clone(),
    }];
    if instance.alpha > 0.0 {
        terms.push(Term::Deviation {
            weight: instance.alpha,
        });
    }
    let problem = Problem {
        p: data.p.clone(),
        l: data.l.clone(),
        lo: &instance.q_min,
        hi: &instance.q_max,
        a: &data.a,
        c: &data.c,
        terms,
    };
    let outcome = admm::solve(
        &problem,
        Settings {
            tolerance: options.tolerance,
            max_iterations: options.max_iterations,
            rho: 1.0,
        },
        &feasibility.q,
        None,
    );
    let v_star = &data.a * &outcome.q + &data.c;
    let objective = evaluate_cost(instance, &outcome.q);
    debug_assert!(
        (objective
            - (0.5 * outcome.q.dot(&(&data.p * &outcome.q))
                + data.l.dot(&outcome.q)
                + data.constant
                + instance.alpha * v_star.add_scalar(-1.0).norm()))
        .abs()
            < 1e-9 * (1.0 + objective.abs())
    );
    Ok(OrpfSolution {
        q_star: outcome.q,
        v_star,
        objective,
        status: if outcome.converged {
            OrpfStatus::Optimal
        } else {
            OrpfStatus::MaxIter
        },
        kkt_residual: outcome.primal_residual.max(outcome.dual_residual),
        iterations: phase_one_iterations + outcome.iterations,
        min_violation: feasibility.min_violation,
    })
}

struct PhaseOne {
    q: DVector<f64>,
    min_violation: f64,
    residual: f64,
    iterations: usize,
}

fn phase_one(
    instance: &OrpfInstance<'_>,
    data: &InstanceData,
    start: &DVector<f64>,
    options: OrpfOptions,
) -> PhaseOne {
    let violation_at = |q: &DVector<f64>| instance.violation(&(&data.a * q + &data.c));
    let feasible_enough = options.infeasibility_threshold * 0.1;
    let initial = violation_at(start);
    if initial <= feasible_enough {
        return PhaseOne {
            q: start.clone(),
            min_violation: initial,
            residual: 0.0,
            iterations: 0,
        };
    }
    let problem = Problem {
        p: DMatrix::zeros(start.len(), start.len()),
        l: DVector::zeros(start.len()),
        lo: &instance.q_min,
        hi: &instance.q_max,
        a: &data.a,
        c: &data.c,
        terms: vec![Term::Violation {
            weight: 1.0,
            lo: instance.v_min.clone(),
            hi: instance.v_max.clone(),
        }],
    };
    let stop = |q: &DVector<f64>| violation_at(q) <= feasible_enough;
    let outcome = admm::solve(
        &problem,
        Settings {
            tolerance: options.tolerance * 0.01,
            max_iterations: options.max_iterations,
            rho: 1.0,
        },
        start,
        Some(&stop),
    );
    PhaseOne {
        min_violation: violation_at(&outcome.q),
        residual: outcome.primal_residual.max(outcome.dual_residual),
        q: outcome.q,
        iterations: outcome.iterations,
    }
}

/// Euclidean projection of `q` onto `{q ∈ box : v_min ≤ v(q) ≤ v_max}`.
pub fn project_feasible(instance: &OrpfInstance<'_>, q: &DVector<f64>) -> Result<DVector<f64>> {
    instance.check()?;
    let data = instance.data();
    let dim = q.len();
    let problem = Problem {
        p: DMatrix::identity(dim, dim),
        l: -q,
        lo: &instance.q_min,
        hi: &instance.q_max,
        a: &data.a,
        c: &data.c,
        terms: vec![Term::Bounds {
            lo: instance.v_min.clone(),
            hi: instance.v_max.clone(),
        }],
    };
    let outcome = admm::solve(
        &problem,
        Settings {
            tolerance: 1e-11,
            max_iterations: 200_000,
            rho: 1.0,
        },
        q,
        None,
    );
    if !outcome.converged {
        return Err(Error::NotConverged {
            context: "feasible-set projection",
            cap: 200_000,
            residual: outcome.primal_residual.max(outcome.dual_residual),
        });
    }
    Ok(outcome.q)
}

/// Exhaustive evaluation of the cost over a regular grid of the DER box,
/// keeping voltage-feasible points only. Meant as a test oracle; refuses
/// more than three DERs.
pub fn grid_search_oracle(instance: &OrpfInstance<'_>, resolution: usize) -> Result<OrpfSolution> {
    grid_search_refined(instance, resolution, 0)
}

/// [`grid_search_oracle`] followed by `levels` rounds of re-gridding the box
/// `best ± 2·spacing` (intersected with the DER box) at the same resolution.
pub fn grid_search_refined(
    instance: &OrpfInstance<'_>,
    resolution: usize,
    levels: usize,
) -> Result<OrpfSolution> {
    instance.check()?;
    let dim = instance.model.der_count();
    if dim > 3 {
        return Err(Error::Parameter(format!(
            "grid search supports at most 3 DERs, got {dim}"
        )));
    }
    if resolution < 2 {
        return Err(Error::Parameter("grid resolution must be at least 2".into()));
    }
    let a = instance.model.voltage_map();
    let c = instance.model.v_hat(instance.scenario);
    let mut lo = instance.q_min.clone();
    let mut hi = instance.q_max.clone();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut evaluated = 0usize;
    for _ in 0..=levels {
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                (0..resolution)
                    .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / (resolution - 1) as f64)
                    .collect()
            })
            .collect();
        let total = resolution.pow(dim as u32);
        let mut q = DVector::zeros(dim);
        for flat in 0..total {
            let mut rest = flat;
            for (i, axis) in axes.iter().enumerate() {
                q[i] = axis[rest % resolution];
                rest /= resolution;
            }
            evaluated += 1;
            let v = &a * &q + &c;
            if violation(&v, &instance.v_min, &instance.v_max) > 0.0 {
                continue;
            }
            let f = evaluate_cost(instance, &q);
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, q.clone()));
            }
        }
        let Some((_, centre)) = &best else { break };
        for i in 0..dim {
            let spacing = (hi[i] - lo[i]) / (resolution - 1) as f64;
            let (new_lo, new_hi) = (
                (centre[i] - 2.0 * spacing).max(instance.q_min[i]),
                (centre[i] + 2.0 * spacing).min(instance.q_max[i]),
            );
            lo[i] = new_lo;
            hi[i] = new_hi;
        }
    }
    Ok(match best {
        Some((objective, q_star)) => OrpfSolution {
            v_star: &a * &q_star + &c,
            q_star,
            objective,
            status: OrpfStatus::Optimal,
            kkt_residual: f64::NAN,
            iterations: evaluated,
            min_violation: 0.0,
        },
        None => OrpfSolution {
            q_star: DVector::zeros(dim),
            v_star: c,
            objective: f64::INFINITY,
            status: OrpfStatus::Infeasible,
            kkt_residual: f64::NAN,
            iterations: evaluated,
            min_violation: f64::NAN,
        },
    })
}
