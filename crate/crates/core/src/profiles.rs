//! Daily base profiles: synthesis from a feeder's nominal loads and solar
//! peaks, and CSV persistence.
//!
//! A profile is a sequence of [`Scenario`]s, one per time step. The CSV layout
//! is one row per step with columns `step`, `p_<bus>` for buses `1..=N` and
//! `qL_<bus>` for every non-DER bus.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{FeederSpec, SensitivityModel};
use crate::power_flow::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub steps: usize,
    /// Peak aggregate demand as a multiple of the nominal total.
    pub peak_ratio: f64,
    /// Half-width of the per-step multiplicative load noise.
    pub load_noise: f64,
    /// Largest fractional solar drop caused by passing clouds.
    pub cloud_depth: f64,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            steps: 1440,
            peak_ratio: 1.65,
            load_noise: 0.03,
            cloud_depth: 0.3,
            seed: 0,
        }
    }
}

/// Normalized residential demand over the day (`hour ∈ [0, 24)`), peaking at
/// 1 in the evening with a smaller morning peak and a midday trough.
pub fn demand_shape(hour: f64) -> f64 {
    let bump = |center: f64, width: f64| (-((hour - center) / width).powi(2)).exp();
    0.30 + 0.30 * bump(7.5, 1.5) + 0.70 * bump(19.0, 2.2) - 0.08 * bump(13.0, 2.5)
        + 0.04 * (2.0 * PI * hour / 24.0).cos()
}

/// Clear-sky solar output normalized to 1 at solar noon, zero outside
/// 06:00–20:00.
pub fn solar_shape(hour: f64) -> f64 {
    if !(6.0..20.0).contains(&hour) {
        return 0.0;
    }
    (PI * (hour - 6.0) / 14.0).sin().powf(1.5)
}

/// Smooth random walk in `[0, 1]` used for cloud cover.
fn smooth_noise(rng: &mut ChaCha8Rng, steps: usize, persistence: f64) -> Vec<f64> {
    let mut state: f64 = 0.0;
    (0..steps)
        .map(|_| {
            state = (persistence * state + (1.0 - persistence) * rng.random_range(-1.0..1.0) * 8.0)
                .clamp(-1.0, 1.0);
            0.5 * (state + 1.0)
        })
        .collect()
}

/// Synthesizes a profile for `spec`: every nominal load follows
/// [`demand_shape`] with independent multiplicative noise, scaled so the peak
/// aggregate demand equals `peak_ratio` times the nominal total; reactive
/// demand follows at the bus power factor; DERs inject
/// `solar_peak·solar_shape·(1 − cloud)`.
pub fn synthesize(spec: &FeederSpec, model: &SensitivityModel, config: &ProfileConfig) -> Result<Vec<Scenario>> {
    if config.steps == 0 {
        return Err(Error::Parameter("profile needs at least one step".into()));
    }
    if !(config.peak_ratio > 0.0) || !(0.0..1.0).contains(&config.load_noise) {
        return Err(Error::Parameter("bad profile scaling".into()));
    }
    let nominal_total: f64 = spec.loads.iter().map(|l| l.p).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let hours: Vec<f64> = (0..config.steps)
        .map(|t| 24.0 * t as f64 / config.steps as f64)
        .collect();

    // demand[t][k] for nominal load k, before global scaling
    let demand: Vec<Vec<f64>> = hours
        .iter()
        .map(|&h| {
            let shape = demand_shape(h);
            spec.loads
                .iter()
                .map(|l| l.p * shape * (1.0 + rng.random_range(-config.load_noise..=config.load_noise)))
                .collect()
        })
        .collect();
    let peak = demand
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 {
        config.peak_ratio * nominal_total / peak
    } else {
        0.0
    };
    let clouds: Vec<Vec<f64>> = spec
        .ders
        .iter()
        .map(|_| smooth_noise(&mut rng, config.steps, 0.98))
        .collect();

    let mut load_index = vec![None; spec.bus_count];
    for (k, &pos) in model.load_pos.iter().enumerate() {
        load_index[pos + 1] = Some(k);
    }
    let scenarios = (0..config.steps)
        .map(|t| {
            let mut p = DVector::zeros(model.n);
            let mut q_l = DVector::zeros(model.load_count());
            for (k, load) in spec.loads.iter().enumerate() {
                let consumption = demand[t][k] * scale;
                p[load.bus - 1] -= consumption;
                if let Some(j) = load_index[load.bus] {
                    let phi = load.power_factor.clamp(0.0, 1.0).acos();
                    q_l[j] -= consumption * phi.tan();
                }
            }
            for (d, der) in spec.ders.iter().enumerate() {
                let cloud = config.cloud_depth * clouds[d][t];
                p[der.bus - 1] += der.solar_peak * solar_shape(hours[t]) * (1.0 - cloud);
            }
            Scenario { index: t, p, q_l }
        })
        .collect();
    Ok(scenarios)
}

fn header(model: &SensitivityModel) -> Vec<String> {
    let mut cols = vec!["step".to_string()];
    cols.extend((1..=model.n).map(|b| format!("p_{b}")));
    cols.extend(model.load_pos.iter().map(|pos| format!("qL_{}", pos + 1)));
    cols
}

pub fn write_csv(path: impl AsRef<Path>, model: &SensitivityModel, scenarios: &[Scenario]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header(model))?;
    for s in scenarios {
        s.check(model)?;
        let mut row = vec![s.index.to_string()];
        row.extend(s.p.iter().map(|x| x.to_string()));
        row.extend(s.q_l.iter().map(|x| x.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a profile written by [`write_csv`]; the header must match the
/// feeder exactly.
pub fn read_csv(path: impl AsRef<Path>, model: &SensitivityModel) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let expected = header(model);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(Error::format(
            path,
            "profile columns do not match the feeder (expected step, p_1..p_N, qL_<bus> for non-DER buses)",
        ));
    }
    let mut scenarios = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))
        };
        let index = record[0]
            .parse::<usize>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
        let p = (1..=model.n).map(field).collect::<Result<Vec<_>>>()?;
        let q_l = (model.n + 1..=model.n + model.load_count())
            .map(field)
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            index,
            p: DVector::from_vec(p),
            q_l: DVector::from_vec(q_l),
        };
        scenario.check(model)?;
        scenarios.push(scenario);
    }
    if scenarios.is_empty() {
        return Err(Error::format(path, "profile has no rows"));
    }
    Ok(scenarios)
}
