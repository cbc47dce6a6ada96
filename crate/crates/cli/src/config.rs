//! The per-experiment TOML configuration.
//!
//! Relative paths are resolved against the directory of the config file. The
//! effective configuration (after command-line overrides, with absolute
//! paths) is written next to every artifact it produces.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use voltvar_core::control::{ControllerKind, FlowModel};
use voltvar_core::orpf::OrpfOptions;
use voltvar_core::pipeline::LearnConfig;
use voltvar_core::profiles::ProfileConfig;
use voltvar_core::TrainConfig;

use crate::error::{CliError, CliResult};

/// A fixed stepsize, or `auto` for `0.9·ε_max` of the active rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Auto => f.write_str("auto"),
            StepSize::Fixed(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for StepSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(StepSize::Auto);
        }
        s.parse::<f64>()
            .map(StepSize::Fixed)
            .map_err(|_| format!("stepsize must be a number or \"auto\", got {s:?}"))
    }
}

impl Serialize for StepSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StepSize::Auto => s.serialize_str("auto"),
            StepSize::Fixed(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(StepSize::Fixed(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub feeder: PathBuf,
    pub profiles: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Number of training scenarios `K`.
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
    /// Half-width of the multiplicative load perturbation of each scenario.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default)]
    pub pseudo: PseudoSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub orpf: OrpfSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_alpha() -> f64 {
    0.5
}

fn default_scenarios() -> usize {
    1440
}

fn default_perturbation() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoSection {
    pub low: usize,
    pub high: usize,
    /// Voltage ranges of the pseudo points; default `[v_min − 0.1, v_min]` and
    /// `[v_max, v_max + 0.1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high_range: Option<[f64; 2]>,
}

impl Default for PseudoSection {
    fn default() -> Self {
        PseudoSection {
            low: 700,
            high: 700,
            low_range: None,
            high_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: usize,
    pub episodes: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub bias_range: [f64; 2],
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            hidden: 100,
            episodes: t.episodes,
            learning_rate: t.learning_rate,
            decay_factor: t.decay_factor,
            decay_interval: t.decay_interval,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_epsilon: t.adam_epsilon,
            bias_range: [t.bias_range.0, t.bias_range.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrpfSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub infeasibility_threshold: f64,
}

impl Default for OrpfSection {
    fn default() -> Self {
        let o = OrpfOptions::default();
        OrpfSection {
            tolerance: o.tolerance,
            max_iterations: o.max_iterations,
            infeasibility_threshold: o.infeasibility_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub controller: String,
    pub epsilon: StepSize,
    pub noise: f64,
    /// Control steps per scenario.
    pub iterations: usize,
    pub flow: String,
    /// Trace rows: every `k`-th step of each scenario plus its last, or only
    /// the last step when 0.
    pub trace_stride: usize,
    /// Deadband grid spacing of the optimized droop fit.
    pub droop_resolution: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            controller: ControllerKind::Incremental.to_string(),
            epsilon: StepSize::Auto,
            noise: 0.0,
            iterations: 120,
            flow: FlowModel::Linearized.to_string(),
            trace_stride: 0,
            droop_resolution: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Columns of the comparison table; empty means the run's own `alpha`.
    pub alphas: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub controllers: Vec<String>,
    /// Defaults to the `[control]` flow model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            alphas: vec![],
            noise_levels: vec![0.0, 0.002, 0.005, 0.01],
            controllers: [
                ControllerKind::Incremental,
                ControllerKind::DroopOptimized,
                ControllerKind::DroopStandard,
                ControllerKind::None,
            ]
            .iter()
            .map(ToString::to_string)
            .collect(),
            flow: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub steps: usize,
    pub peak_ratio: f64,
    pub load_noise: f64,
    pub cloud_depth: f64,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let p = ProfileConfig::default();
        SynthesisSection {
            steps: p.steps,
            peak_ratio: p.peak_ratio,
            load_noise: p.load_noise,
            cloud_depth: p.cloud_depth,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<StepSize>,
    pub noise: Option<f64>,
    pub controller: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::path::absolute(base)?;
        config.feeder = base.join(&config.feeder);
        config.profiles = base.join(&config.profiles);
        config.out = base.join(&config.out);
        if let Some(out) = &overrides.out {
            config.out = std::path::absolute(out)?;
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(alpha) = overrides.alpha {
            config.alpha = alpha;
        }
        if let Some(epsilon) = overrides.epsilon {
            config.control.epsilon = epsilon;
        }
        if let Some(noise) = overrides.noise {
            config.control.noise = noise;
        }
        if let Some(controller) = &overrides.controller {
            config.control.controller = controller.clone();
        }
        config.check()?;
        Ok(config)
    }

    /// Value checks that need no files.
    pub fn check(&self) -> CliResult<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CliError::Config(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if let StepSize::Fixed(e) = self.control.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return Err(CliError::Config(format!("stepsize {e} outside (0, 1]")));
            }
        }
        if self.scenarios == 0 {
            return Err(CliError::Config("scenarios must be positive".into()));
        }
        if self.train.hidden == 0 {
            return Err(CliError::Config("train.hidden must be positive".into()));
        }
        self.controller()?;
        self.flow()?;
        for c in &self.evaluate.controllers {
            c.parse::<ControllerKind>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(flow) = &self.evaluate.flow {
            flow.parse::<FlowModel>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(a) = self.evaluate.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(CliError::Config(format!("evaluate.alphas entry {a} outside [0, 1]")));
        }
        self.learn_config().train.check()?;
        Ok(())
    }

    /// Fails with the list of referenced input files that do not exist.
    pub fn require_inputs(&self, profiles: bool) -> CliResult<()> {
        let mut missing = vec![];
        if !self.feeder.is_file() {
            missing.push(self.feeder.clone());
        }
        if profiles && !self.profiles.is_file() {
            missing.push(self.profiles.clone());
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Missing(missing))
        }
    }

    pub fn controller(&self) -> CliResult<ControllerKind> {
        self.control
            .controller
            .parse()
            .map_err(|e: voltvar_core::Error| CliError::Config(e.to_string()))
    }

    pub fn flow(&self) -> CliResult<FlowModel> {
        self.control
            .flow
            .parse()
            .map_err(|e: voltvar_core::Error| CliError::Config(e.to_string()))
    }

    pub fn learn_config(&self) -> LearnConfig {
        let t = &self.train;
        LearnConfig {
            alpha: self.alpha,
            scenarios: self.scenarios,
            perturbation: self.perturbation,
            pseudo_low: self.pseudo.low,
            pseudo_high: self.pseudo.high,
            pseudo_low_range: self.pseudo.low_range.map(|[a, b]| (a, b)),
            pseudo_high_range: self.pseudo.high_range.map(|[a, b]| (a, b)),
            hidden: t.hidden,
            train: TrainConfig {
                episodes: t.episodes,
                learning_rate: t.learning_rate,
                decay_factor: t.decay_factor,
                decay_interval: t.decay_interval,
                beta1: t.beta1,
                beta2: t.beta2,
                adam_epsilon: t.adam_epsilon,
                seed: 0,
                bias_range: (t.bias_range[0], t.bias_range[1]),
            },
            orpf: OrpfOptions {
                tolerance: self.orpf.tolerance,
                max_iterations: self.orpf.max_iterations,
                infeasibility_threshold: self.orpf.infeasibility_threshold,
            },
            droop_resolution: self.control.droop_resolution,
            seed: self.seed,
        }
    }

    pub fn profile_config(&self) -> ProfileConfig {
        let s = &self.synthesis;
        ProfileConfig {
            steps: s.steps,
            peak_ratio: s.peak_ratio,
            load_noise: s.load_noise,
            cloud_depth: s.cloud_depth,
            seed: voltvar_core::pipeline::sub_seed(self.seed, "profiles"),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Artifacts that depend on `alpha` live under `out/alpha_<α>`.
    pub fn alpha_dir(&self) -> PathBuf {
        self.out.join(alpha_label(self.alpha))
    }

    pub fn dataset_path(&self, bus: usize) -> PathBuf {
        self.alpha_dir().join("datasets").join(format!("bus_{bus}.csv"))
    }

    pub fn function_path(&self, bus: usize) -> PathBuf {
        self.alpha_dir().join("functions").join(format!("bus_{bus}.toml"))
    }

    pub fn run_dir(&self, kind: ControllerKind, flow: FlowModel, noise: f64) -> PathBuf {
        self.alpha_dir()
            .join("runs")
            .join(format!("{kind}_{flow}_noise_{noise:.4}"))
    }
}

pub fn alpha_label(alpha: f64) -> String {
    format!("alpha_{alpha:.4}")
}
