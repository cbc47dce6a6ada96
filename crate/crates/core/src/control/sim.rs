//! Closed-loop simulation and equilibrium search.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{control_step, max_lipschitz, stepsize_bound, ControllerConfig, FlowModel, LocalRule, VoltageRecord};
use crate::error::{Error, Result};
use crate::grid::{Complex64, SensitivityModel};
use crate::linalg::norm_inf;
use crate::power_flow::{solve_ac_from, AcOptions, Scenario};

/// A trace counts as converged once a step moves `q` by at most this (∞-norm).
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
/// Residual at the last step above which a non-converged trace is examined
/// for oscillation.
const OSCILLATION_FLOOR: f64 = 1e-3;
const OSCILLATION_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceVerdict {
    Converged,
    /// Residual stayed large with sign-alternating increments.
    Oscillating,
    NotConverged,
    /// The AC power flow failed; the scenario was abandoned.
    FlowFailure,
}

impl std::fmt::Display for TraceVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TraceVerdict::Converged => "converged",
            TraceVerdict::Oscillating => "oscillating",
            TraceVerdict::NotConverged => "not_converged",
            TraceVerdict::FlowFailure => "flow_failure",
        })
    }
}

/// One scenario of closed-loop operation. Row `t` of the histories is the
/// state after the `(t+1)`-th update.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub scenario: usize,
    pub q_history: Vec<DVector<f64>>,
    /// Bus voltages (all `N` buses) for every row, or only the last row.
    pub v_history: Vec<DVector<f64>>,
    /// `‖q(t+1) − q(t)‖∞` per step.
    pub residuals: Vec<f64>,
    pub verdict: TraceVerdict,
    /// First step whose residual reached [`CONVERGENCE_TOLERANCE`].
    pub converged_at: Option<usize>,
}

impl SimulationTrace {
    pub fn converged(&self) -> bool {
        self.verdict == TraceVerdict::Converged
    }

    pub fn final_q(&self) -> Option<&DVector<f64>> {
        self.q_history.last()
    }

    pub fn final_v(&self) -> Option<&DVector<f64>> {
        self.v_history.last()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn verdict(residuals: &[f64], increments: &[DVector<f64>]) -> (TraceVerdict, Option<usize>) {
    if let Some(t) = residuals.iter().position(|r| *r <= CONVERGENCE_TOLERANCE) {
        return (TraceVerdict::Converged, Some(t));
    }
    let last = residuals.last().copied().unwrap_or(0.0);
    if last >= OSCILLATION_FLOOR && increments.len() >= OSCILLATION_WINDOW {
        let tail = &increments[increments.len() - OSCILLATION_WINDOW..];
        let final_step = tail.last().expect("window is nonempty");
        let k = final_step.iamax();
        let alternating = tail
            .windows(2)
            .all(|w| w[0][k] * w[1][k] < 0.0)
            && tail.iter().all(|d| d[k].abs() >= OSCILLATION_FLOOR);
        if alternating {
            return (TraceVerdict::Oscillating, None);
        }
    }
    (TraceVerdict::NotConverged, None)
}

struct Flow<'a> {
    model: &'a SensitivityModel,
    kind: FlowModel,
    map: DMatrix<f64>,
    u: Option<DVector<Complex64>>,
}

impl Flow<'_> {
    /// Bus voltages at `q`, or `None` when the AC iteration fails.
    fn solve(&mut self, scenario: &Scenario, v_hat: &DVector<f64>, q: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        match self.kind {
            FlowModel::Linearized => Ok(Some(&self.map * q + v_hat)),
            FlowModel::Ac => {
                let sol = solve_ac_from(self.model, scenario, q, self.u.as_ref(), AcOptions::default())?;
                if !sol.converged {
                    self.u = None;
                    return Ok(None);
                }
                self.u = Some(sol.u);
                Ok(Some(sol.v))
            }
        }
    }
}

/// Runs `config.iterations` control steps per scenario, carrying `q` (and the
/// AC warm start) from one scenario to the next. `q0` must lie in the box.
pub fn simulate(
    model: &SensitivityModel,
    rules: &[LocalRule],
    config: &ControllerConfig,
    scenarios: &[Scenario],
    q0: &DVector<f64>,
) -> Result<Vec<SimulationTrace>> {
    config.check()?;
    let c = model.der_count();
    if rules.len() != c || q0.len() != c {
        return Err(Error::Dimension {
            context: "controller rules / initial q",
            expected: c,
            got: if rules.len() != c { rules.len() } else { q0.len() },
        });
    }
    if !model.in_box(q0) {
        return Err(Error::Parameter("initial reactive powers outside the box".into()));
    }
    let epsilon = config.effective_epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut flow = Flow {
        model,
        kind: config.flow,
        map: model.voltage_map(),
        u: None,
    };
    let mut q = q0.clone();
    let mut traces = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        scenario.check(model)?;
        let v_hat = model.v_hat(scenario);
        let mut q_history = Vec::with_capacity(config.iterations);
        let mut v_history = Vec::new();
        let mut residuals = Vec::with_capacity(config.iterations);
        let mut increments = Vec::with_capacity(config.iterations);
        let mut failed = false;
        let mut v = match flow.solve(scenario, &v_hat, &q)? {
            Some(v) => v,
            None => {
                traces.push(SimulationTrace {
                    scenario: scenario.index,
                    q_history,
                    v_history,
                    residuals,
                    verdict: TraceVerdict::FlowFailure,
                    converged_at: None,
                });
                continue;
            }
        };
        for step in 0..config.iterations {
            let mut measured = model.der_entries(&v);
            if config.noise > 0.0 {
                for m in measured.iter_mut() {
                    *m *= 1.0 + rng.random_range(-config.noise..=config.noise);
                }
            }
            let next = control_step(&q, &measured, rules, epsilon);
            let delta = &next - &q;
            residuals.push(norm_inf(&delta));
            increments.push(delta);
            q = next;
            q_history.push(q.clone());
            match flow.solve(scenario, &v_hat, &q)? {
                Some(next_v) => v = next_v,
                None => {
                    failed = true;
                    break;
                }
            }
            if config.record == VoltageRecord::EveryStep || step + 1 == config.iterations {
                v_history.push(v.clone());
            }
        }
        let (verdict, converged_at) = if failed {
            (TraceVerdict::FlowFailure, None)
        } else {
            verdict(&residuals, &increments)
        };
        traces.push(SimulationTrace {
            scenario: scenario.index,
            q_history,
            v_history,
            residuals,
            verdict,
            converged_at,
        });
    }
    Ok(traces)
}

/// The closed-loop voltage update `g(v) = (1 − ε)v + ε(Xφ(v) + v̂_C)` on the
/// DER buses under the linearized model.
pub fn closed_loop_voltage_map(
    model: &SensitivityModel,
    rules: &[LocalRule],
    v_hat_c: &DVector<f64>,
    epsilon: f64,
    v: &DVector<f64>,
) -> DVector<f64> {
    let phi = DVector::from_fn(v.len(), |n, _| rules[n].eval(v[n]));
    v * (1.0 - epsilon) + (&model.x * phi + v_hat_c) * epsilon
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub q: DVector<f64>,
    /// DER voltages at `q`.
    pub v: DVector<f64>,
    pub iterations: usize,
}

/// The unique equilibrium `q = φ(v)`, `v = Xq + v̂_C` of the linearized loop,
/// found by iterating from `q = 0` at `ε = 0.9·ε_max`.
pub fn find_equilibrium(model: &SensitivityModel, rules: &[LocalRule], scenario: &Scenario, tolerance: f64) -> Result<Equilibrium> {
    let start = DVector::from_fn(model.der_count(), |i, _| 0.0f64.clamp(model.q_min[i], model.q_max[i]));
    find_equilibrium_from(model, rules, scenario, &start, tolerance)
}

const EQUILIBRIUM_CAP: usize = 1_000_000;

pub fn find_equilibrium_from(
    model: &SensitivityModel,
    rules: &[LocalRule],
    scenario: &Scenario,
    start: &DVector<f64>,
    tolerance: f64,
) -> Result<Equilibrium> {
    scenario.check(model)?;
    if rules.len() != model.der_count() || start.len() != model.der_count() {
        return Err(Error::Dimension {
            context: "controller rules / start",
            expected: model.der_count(),
            got: rules.len(),
        });
    }
    let epsilon = 0.9 * stepsize_bound(model.x_norm, max_lipschitz(rules));
    let v_hat_c = model.der_entries(&model.v_hat(scenario));
    let mut q = start.clone();
    let mut gap = f64::INFINITY;
    for iterations in 0..EQUILIBRIUM_CAP {
        let v = &model.x * &q + &v_hat_c;
        let phi = DVector::from_fn(q.len(), |n, _| rules[n].eval(v[n]));
        gap = norm_inf(&(&phi - &q));
        if gap <= tolerance {
            return Ok(Equilibrium { q, v, iterations });
        }
        q += (phi - &q) * epsilon;
    }
    Err(Error::NotConverged {
        context: "equilibrium search",
        cap: EQUILIBRIUM_CAP,
        residual: gap,
    })
}
