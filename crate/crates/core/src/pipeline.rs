//! The offline learning stage and day-long evaluation runs, shared by the
//! command-line driver, the benches and the acceptance tests.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::control::{
    avg_loss, distance_metric, max_lipschitz, optimize_droop_params, simulate, stepsize_bound,
    ControllerConfig, ControllerKind, DistanceReport, DroopParams, LocalRule, OptimizedDroop,
    SimulationTrace, SummaryRow, TraceVerdict,
};
use crate::dataset::{add_pseudo_points, collect_dataset, default_pseudo_ranges, generate_scenarios, DatasetBuild, LocalDataset};
use crate::error::{Error, Result};
use crate::grid::SensitivityModel;
use crate::monotone::{train, EquilibriumFunction, TrainConfig};
use crate::orpf::{solve_orpf_with, OrpfInstance, OrpfOptions, OrpfStatus};
use crate::power_flow::Scenario;

/// Derives an independent seed for the named purpose from a top-level seed.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub alpha: f64,
    /// Number of training scenarios `K`.
    pub scenarios: usize,
    pub perturbation: f64,
    pub pseudo_low: usize,
    pub pseudo_high: usize,
    /// Overrides of the default pseudo-point voltage ranges.
    pub pseudo_low_range: Option<(f64, f64)>,
    pub pseudo_high_range: Option<(f64, f64)>,
    pub hidden: usize,
    pub train: TrainConfig,
    pub orpf: OrpfOptions,
    /// Deadband grid spacing of the optimized droop fit.
    pub droop_resolution: f64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            alpha: 0.5,
            scenarios: 1440,
            perturbation: 0.05,
            pseudo_low: 700,
            pseudo_high: 700,
            pseudo_low_range: None,
            pseudo_high_range: None,
            hidden: 100,
            train: TrainConfig::default(),
            orpf: OrpfOptions::default(),
            droop_resolution: 0.001,
            seed: 0,
        }
    }
}

/// Datasets for every DER, with pseudo points appended. When every scenario
/// is infeasible the build has no solutions and the datasets hold only pseudo
/// points; check [`DatasetBuild::ensure_nonempty`].
pub fn build_datasets(model: &SensitivityModel, base: &[Scenario], config: &LearnConfig) -> Result<DatasetBuild> {
    let scenarios = generate_scenarios(
        base,
        config.scenarios,
        config.perturbation,
        sub_seed(config.seed, "scenario-gen"),
    )?;
    let mut build = collect_dataset(model, &scenarios, config.alpha, config.orpf)?;
    build.datasets = build
        .datasets
        .into_iter()
        .map(|d| {
            let (low, high) = default_pseudo_ranges(&d.der);
            add_pseudo_points(
                d,
                config.pseudo_low,
                config.pseudo_high,
                config.pseudo_low_range.unwrap_or(low),
                config.pseudo_high_range.unwrap_or(high),
            )
        })
        .collect::<Result<_>>()?;
    Ok(build)
}

/// A second, independently perturbed realization of the base day. Controllers
/// are evaluated on it rather than on the scenarios they were trained on.
pub fn evaluation_day(base: &[Scenario], config: &LearnConfig) -> Result<Vec<Scenario>> {
    generate_scenarios(base, base.len(), config.perturbation, sub_seed(config.seed, "realization"))
}

#[derive(Debug, Clone)]
pub struct TrainedSet {
    pub functions: Vec<EquilibriumFunction>,
    pub mse: Vec<f64>,
}

impl TrainedSet {
    pub fn lipschitz(&self) -> f64 {
        self.functions.iter().map(|f| f.lipschitz()).fold(0.0, f64::max)
    }
}

/// Trains one equilibrium function per dataset, in parallel.
pub fn train_all(datasets: &[LocalDataset], hidden: usize, config: &TrainConfig, seed: u64) -> Result<TrainedSet> {
    let trained: Vec<_> = datasets
        .par_iter()
        .map(|d| {
            let cfg = TrainConfig {
                seed: sub_seed(seed, &format!("train-bus-{}", d.der.bus)),
                ..config.clone()
            };
            train(d, hidden, d.der.q_min, d.der.q_max, &cfg)
        })
        .collect::<Result<_>>()?;
    let (functions, mse) = trained.into_iter().map(|t| (t.function, t.mse)).unzip();
    Ok(TrainedSet { functions, mse })
}

/// All rule sets the evaluation compares.
#[derive(Debug, Clone)]
pub struct RuleBook {
    pub learned: Vec<EquilibriumFunction>,
    pub standard: Vec<DroopParams>,
    pub optimized: Vec<OptimizedDroop>,
}

impl RuleBook {
    pub fn new(datasets: &[LocalDataset], learned: Vec<EquilibriumFunction>, droop_resolution: f64) -> Result<Self> {
        Ok(RuleBook {
            standard: datasets.iter().map(DroopParams::of).collect::<Result<_>>()?,
            optimized: optimize_droop_params(datasets, droop_resolution)?,
            learned,
        })
    }

    pub fn rules(&self, kind: ControllerKind) -> Vec<LocalRule> {
        match kind {
            ControllerKind::Incremental | ControllerKind::NonIncremental => {
                self.learned.iter().cloned().map(LocalRule::Learned).collect()
            }
            ControllerKind::DroopStandard => self.standard.iter().copied().map(LocalRule::Standard).collect(),
            ControllerKind::DroopOptimized => self.optimized.iter().copied().map(LocalRule::Optimized).collect(),
            ControllerKind::None => vec![LocalRule::Zero; self.standard.len()],
        }
    }

    /// Average squared-error loss of every controller kind on the datasets.
    pub fn losses(&self, datasets: &[LocalDataset]) -> Result<Vec<(ControllerKind, f64)>> {
        [
            ControllerKind::Incremental,
            ControllerKind::DroopOptimized,
            ControllerKind::DroopStandard,
            ControllerKind::None,
        ]
        .into_iter()
        .map(|k| Ok((k, avg_loss(datasets, &self.rules(k))?)))
        .collect()
    }
}

/// `0.9·min{1, 2/(‖X‖L + 1)²}` for a rule set.
pub fn auto_epsilon(model: &SensitivityModel, rules: &[LocalRule]) -> f64 {
    0.9 * stepsize_bound(model.x_norm, max_lipschitz(rules))
}

/// Linearized-model ORPF optimum of every scenario, used as the tracking
/// reference. Scenarios without a feasible optimum are omitted.
pub fn reference_solutions(
    model: &SensitivityModel,
    scenarios: &[Scenario],
    alpha: f64,
    options: OrpfOptions,
) -> Result<Vec<(usize, DVector<f64>)>> {
    let solved: Vec<_> = scenarios
        .par_iter()
        .map(|s| {
            let sol = solve_orpf_with(&OrpfInstance::new(model, s, alpha)?, options)?;
            Ok((s.index, sol))
        })
        .collect::<Result<_>>()?;
    Ok(solved
        .into_iter()
        .filter(|(_, s)| s.status != OrpfStatus::Infeasible)
        .map(|(i, s)| (i, s.q_star))
        .collect())
}

#[derive(Debug, Clone)]
pub struct DayRun {
    pub traces: Vec<SimulationTrace>,
    pub distance: DistanceReport,
    pub summary: SummaryRow,
}

/// Simulates a whole day from `q = 0` and scores it against `references`
/// (scenarios without a reference are simulated but not scored).
pub fn run_day(
    model: &SensitivityModel,
    rules: &[LocalRule],
    config: &ControllerConfig,
    scenarios: &[Scenario],
    references: &[(usize, DVector<f64>)],
    alpha: f64,
) -> Result<DayRun> {
    let traces = simulate(model, rules, config, scenarios, &DVector::zeros(model.der_count()))?;
    let mut scored = Vec::with_capacity(references.len());
    let mut refs = references.iter().peekable();
    for trace in &traces {
        if let Some((index, _)) = refs.peek() {
            if *index == trace.scenario {
                scored.push(trace.clone());
                refs.next();
            }
        }
    }
    if refs.peek().is_some() {
        return Err(Error::Parameter("reference solutions do not follow the scenario order".into()));
    }
    let distance = distance_metric(&scored, references)?;
    let count = |v: TraceVerdict| traces.iter().filter(|t| t.verdict == v).count();
    let max_violation = traces
        .iter()
        .filter_map(|t| t.final_v())
        .map(|v| {
            v.iter()
                .zip(model.v_min.iter().zip(model.v_max.iter()))
                .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let summary = SummaryRow {
        controller: config.kind.to_string(),
        alpha,
        noise: config.noise,
        epsilon: config.effective_epsilon(),
        flow: config.flow.to_string(),
        scenarios: traces.len(),
        converged: count(TraceVerdict::Converged),
        oscillating: count(TraceVerdict::Oscillating),
        flow_failures: count(TraceVerdict::FlowFailure),
        avg_distance: distance.average,
        max_violation,
    };
    Ok(DayRun {
        traces,
        distance,
        summary,
    })
}
