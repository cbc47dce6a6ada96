//! Scenario generation and per-DER `(v★, q★)` datasets built from ORPF
//! solutions, with optional saturated pseudo points.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SensitivityModel;
use crate::orpf::{solve_orpf_with, OrpfInstance, OrpfOptions, OrpfSolution, OrpfStatus};
use crate::power_flow::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Real,
    PseudoLow,
    PseudoHigh,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointKind::Real => "real",
            PointKind::PseudoLow => "pseudo_low",
            PointKind::PseudoHigh => "pseudo_high",
        })
    }
}

impl FromStr for PointKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "real" => Ok(PointKind::Real),
            "pseudo_low" => Ok(PointKind::PseudoLow),
            "pseudo_high" => Ok(PointKind::PseudoHigh),
            other => Err(format!("unknown point kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub v: f64,
    pub q: f64,
    pub kind: PointKind,
    /// Source scenario of a real point.
    pub scenario: Option<usize>,
}

/// Box and voltage limits of one DER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerLimits {
    pub bus: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl DerLimits {
    pub fn of(model: &SensitivityModel, der: usize) -> Self {
        let pos = model.der_pos[der];
        DerLimits {
            bus: pos + 1,
            q_min: model.q_min[der],
            q_max: model.q_max[der],
            v_min: model.v_min[pos],
            v_max: model.v_max[pos],
        }
    }

    pub fn all(model: &SensitivityModel) -> Vec<Self> {
        (0..model.der_count()).map(|k| Self::of(model, k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub der: DerLimits,
    pub points: Vec<DataPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointCounts {
    pub real: usize,
    pub pseudo_low: usize,
    pub pseudo_high: usize,
}

impl PointCounts {
    pub fn total(&self) -> usize {
        self.real + self.pseudo_low + self.pseudo_high
    }
}

impl LocalDataset {
    pub fn new(der: DerLimits) -> Self {
        LocalDataset {
            der,
            points: Vec::new(),
        }
    }

    pub fn counts(&self) -> PointCounts {
        let count = |kind| self.points.iter().filter(|p| p.kind == kind).count();
        PointCounts {
            real: count(PointKind::Real),
            pseudo_low: count(PointKind::PseudoLow),
            pseudo_high: count(PointKind::PseudoHigh),
        }
    }

    pub fn real_points(&self) -> impl Iterator<Item = &DataPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::Real)
    }

    /// Checks box membership and the placement of pseudo points.
    pub fn validate(&self) -> Result<()> {
        let d = &self.der;
        for (i, p) in self.points.iter().enumerate() {
            if !p.v.is_finite() || !p.q.is_finite() {
                return Err(Error::Invariant(format!("bus {}: point {i} is not finite", d.bus)));
            }
            if p.q < d.q_min || p.q > d.q_max {
                return Err(Error::Invariant(format!(
                    "bus {}: point {i} has q = {} outside [{}, {}]",
                    d.bus, p.q, d.q_min, d.q_max
                )));
            }
            let ok = match p.kind {
                PointKind::Real => true,
                PointKind::PseudoLow => p.v <= d.v_min && p.q == d.q_max,
                PointKind::PseudoHigh => p.v >= d.v_max && p.q == d.q_min,
            };
            if !ok {
                return Err(Error::Invariant(format!(
                    "bus {}: {} point {i} at v = {} is misplaced",
                    d.bus, p.kind, p.v
                )));
            }
        }
        Ok(())
    }

    /// Fraction of real point pairs ordered `v_i < v_j` with `q_i < q_j`,
    /// i.e. pairs that no nonincreasing function can fit.
    pub fn monotone_inconsistency(&self) -> f64 {
        let mut real: Vec<(f64, f64)> = self.real_points().map(|p| (p.v, p.q)).collect();
        if real.len() < 2 {
            return 0.0;
        }
        real.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = real.len();
        let mut violating = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if real[i].0 < real[j].0 && real[i].1 < real[j].1 {
                    violating += 1;
                }
            }
        }
        violating as f64 / (n * (n - 1) / 2) as f64
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["v", "q", "kind", "scenario_id"])?;
        for p in &self.points {
            writer.write_record([
                p.v.to_string(),
                p.q.to_string(),
                p.kind.to_string(),
                p.scenario.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads the points written by [`LocalDataset::write_csv`] and validates
    /// them against `der`.
    pub fn read_csv(path: impl AsRef<Path>, der: DerLimits) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        if reader.headers()?.iter().collect::<Vec<_>>() != ["v", "q", "kind", "scenario_id"] {
            return Err(Error::format(path, "expected columns v,q,kind,scenario_id"));
        }
        let mut points = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |m: String| Error::format(path, format!("row {}: {m}", row + 2));
            let v = record[0].parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let q = record[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let kind = record[2].parse::<PointKind>().map_err(bad)?;
            let scenario = match &record[3] {
                "" => None,
                s => Some(s.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            };
            points.push(DataPoint { v, q, kind, scenario });
        }
        let dataset = LocalDataset { der, points };
        dataset.validate()?;
        Ok(dataset)
    }
}

/// Draws `count` scenarios cycling through `base`, each entry of `p` and `q_L`
/// scaled by an independent factor uniform in `[1 − δ, 1 + δ]`.
pub fn generate_scenarios(base: &[Scenario], count: usize, perturbation: f64, seed: u64) -> Result<Vec<Scenario>> {
    if base.is_empty() {
        return Err(Error::Parameter("no base profile steps".into()));
    }
    if !(0.0..1.0).contains(&perturbation) {
        return Err(Error::Parameter(format!("perturbation {perturbation} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factor = move || {
        if perturbation == 0.0 {
            1.0
        } else {
            rng.random_range(1.0 - perturbation..=1.0 + perturbation)
        }
    };
    Ok((0..count)
        .map(|k| {
            let b = &base[k % base.len()];
            Scenario {
                index: k,
                p: b.p.map(|x| x * factor()),
                q_l: b.q_l.map(|x| x * factor()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub scenario: usize,
    pub status: OrpfStatus,
    pub min_violation: f64,
}

impl DatasetBuild {
    pub fn ensure_nonempty(&self) -> Result<()> {
        if self.solutions.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "all {} scenarios are infeasible",
                self.skipped.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DatasetBuild {
    /// One dataset per DER, in DER order.
    pub datasets: Vec<LocalDataset>,
    /// Solutions of the kept scenarios, by scenario order.
    pub solutions: Vec<(usize, OrpfSolution)>,
    pub skipped: Vec<Skipped>,
}

/// Solves the ORPF of every scenario in parallel and splits the minimizers
/// into per-DER datasets. Infeasible scenarios are skipped and logged.
pub fn build_dataset(
    model: &SensitivityModel,
    scenarios: &[Scenario],
    alpha: f64,
    options: OrpfOptions,
) -> Result<DatasetBuild> {
    let build = collect_dataset(model, scenarios, alpha, options)?;
    build.ensure_nonempty()?;
    Ok(build)
}

/// Like [`build_dataset`] but returns an empty build (with the full skip log)
/// when every scenario is infeasible.
pub fn collect_dataset(
    model: &SensitivityModel,
    scenarios: &[Scenario],
    alpha: f64,
    options: OrpfOptions,
) -> Result<DatasetBuild> {
    let solved: Vec<Result<OrpfSolution>> = scenarios
        .par_iter()
        .map(|s| solve_orpf_with(&OrpfInstance::new(model, s, alpha)?, options))
        .collect();
    let limits = DerLimits::all(model);
    let mut datasets: Vec<LocalDataset> = limits.iter().map(|d| LocalDataset::new(*d)).collect();
    let mut solutions = Vec::new();
    let mut skipped = Vec::new();
    for (scenario, result) in scenarios.iter().zip(solved) {
        let solution = result?;
        match solution.status {
            OrpfStatus::Infeasible => {
                skipped.push(Skipped {
                    scenario: scenario.index,
                    status: solution.status,
                    min_violation: solution.min_violation,
                });
                continue;
            }
            OrpfStatus::MaxIter => warn!(
                "scenario {}: ORPF hit the iteration cap (residual {:.2e}); keeping the iterate",
                scenario.index, solution.kkt_residual
            ),
            OrpfStatus::Optimal => {}
        }
        let v_der = model.der_entries(&solution.v_star);
        for (k, dataset) in datasets.iter_mut().enumerate() {
            dataset.points.push(DataPoint {
                v: v_der[k],
                q: solution.q_star[k],
                kind: PointKind::Real,
                scenario: Some(scenario.index),
            });
        }
        solutions.push((scenario.index, solution));
    }
    info!(
        "dataset: {} scenarios kept, {} skipped",
        solutions.len(),
        skipped.len()
    );
    for d in &datasets {
        info!(
            "bus {}: monotone inconsistency {:.4}",
            d.der.bus,
            d.monotone_inconsistency()
        );
    }
    Ok(DatasetBuild {
        datasets,
        solutions,
        skipped,
    })
}

/// Default pseudo-point voltage ranges `[v_min − 0.1, v_min]` and
/// `[v_max, v_max + 0.1]`.
pub fn default_pseudo_ranges(der: &DerLimits) -> ((f64, f64), (f64, f64)) {
    ((der.v_min - 0.1, der.v_min), (der.v_max, der.v_max + 0.1))
}

fn linspace(range: (f64, f64), count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![range.0],
        _ => (0..count)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Appends `low` points `(v, q_max)` equispaced over `low_range` (endpoints
/// included) and `high` points `(v, q_min)` over `high_range`.
pub fn add_pseudo_points(
    mut dataset: LocalDataset,
    low: usize,
    high: usize,
    low_range: (f64, f64),
    high_range: (f64, f64),
) -> Result<LocalDataset> {
    let d = dataset.der;
    if low > 0 && !(low_range.0 <= low_range.1 && low_range.1 <= d.v_min) {
        return Err(Error::Parameter(format!(
            "low pseudo range [{}, {}] must lie below v_min = {}",
            low_range.0, low_range.1, d.v_min
        )));
    }
    if high > 0 && !(high_range.0 <= high_range.1 && high_range.0 >= d.v_max) {
        return Err(Error::Parameter(format!(
            "high pseudo range [{}, {}] must lie above v_max = {}",
            high_range.0, high_range.1, d.v_max
        )));
    }
    dataset.points.extend(linspace(low_range, low).into_iter().map(|v| DataPoint {
        v,
        q: d.q_max,
        kind: PointKind::PseudoLow,
        scenario: None,
    }));
    dataset.points.extend(linspace(high_range, high).into_iter().map(|v| DataPoint {
        v,
        q: d.q_min,
        kind: PointKind::PseudoHigh,
        scenario: None,
    }));
    Ok(dataset)
}
