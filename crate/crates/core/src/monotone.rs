//! Clamped, nonincreasing single-hidden-layer ReLU networks used as
//! per-DER equilibrium functions.
//!
//! The pre-clamp network is `N(x) = Σ_h w_h·max(0, x − b_h) + β`. With the
//! biases sorted ascending, the slope on the `J`-th segment is the cumulative
//! sum `c_J = Σ_{j≤J} w_j`, so `N` is nonincreasing iff every `c_J ≤ 0` and its
//! Lipschitz constant is `max_J |c_J|`. The equilibrium function clamps `N`
//! into the DER box `[q_min, q_max]`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LocalDataset;
use crate::error::{Error, Result};

/// The unclamped network `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub biases: Vec<f64>,
    pub weights: Vec<f64>,
    pub beta: f64,
}

impl Network {
    pub fn hidden(&self) -> usize {
        self.biases.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.biases
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| w * (x - b).max(0.0))
            .sum::<f64>()
            + self.beta
    }

    /// Segment slopes `c_J`, accumulated left to right.
    pub fn cumulative_slopes(&self) -> Vec<f64> {
        self.weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }

    pub fn biases_sorted(&self) -> bool {
        self.biases.windows(2).all(|p| p[0] <= p[1])
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.cumulative_slopes().iter().all(|c| *c <= 0.0)
    }

    /// Sorts the neurons by bias; weights follow their bias.
    pub fn sort_neurons(&mut self) {
        let order = sort_order(&self.biases);
        self.biases = order.iter().map(|&i| self.biases[i]).collect();
        self.weights = order.iter().map(|&i| self.weights[i]).collect();
    }
}

fn sort_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// `max_J |Σ_{j≤J} w_j|`, zero for an empty network. Assumes sorted biases.
pub fn lipschitz_constant(network: &Network) -> f64 {
    network
        .cumulative_slopes()
        .iter()
        .fold(0.0, |acc, c| acc.max(c.abs()))
}

/// Clips every cumulative sum at zero and recovers the weights by
/// differencing. This is a feasibility restoration, not a Euclidean
/// projection. Feasible weights are returned untouched.
pub fn restore_feasibility(network: &mut Network) {
    let slopes = network.cumulative_slopes();
    if slopes.iter().all(|c| *c <= 0.0) {
        return;
    }
    // differencing against the running sum actually produced keeps every
    // recomputed cumulative sum ≤ 0 despite rounding
    let mut running = 0.0;
    for (w, c) in network.weights.iter_mut().zip(slopes) {
        *w = c.min(0.0) - running;
        running += *w;
    }
}

/// A clamped monotone network satisfying: sorted biases, nonpositive
/// cumulative weight sums, output within `[q_min, q_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumFunction {
    network: Network,
    q_min: f64,
    q_max: f64,
    lipschitz: f64,
    // N at each bias and the slope to its right, for O(log H) evaluation
    knots: Vec<f64>,
    slopes: Vec<f64>,
}

impl EquilibriumFunction {
    pub fn new(network: Network, q_min: f64, q_max: f64) -> Result<Self> {
        if network.biases.len() != network.weights.len() {
            return Err(Error::Invariant(format!(
                "{} biases but {} weights",
                network.biases.len(),
                network.weights.len()
            )));
        }
        if network
            .biases
            .iter()
            .chain(&network.weights)
            .chain(std::iter::once(&network.beta))
            .any(|x| !x.is_finite())
        {
            return Err(Error::Invariant("non-finite network parameter".into()));
        }
        if !network.biases_sorted() {
            return Err(Error::Invariant("biases are not sorted ascending".into()));
        }
        if let Some((j, c)) = network
            .cumulative_slopes()
            .iter()
            .enumerate()
            .find(|(_, c)| **c > 0.0)
        {
            return Err(Error::Invariant(format!(
                "cumulative weight sum {} at neuron {} is positive",
                c,
                j + 1
            )));
        }
        if q_min.is_nan() || q_max.is_nan() || q_min > q_max {
            return Err(Error::Invariant(format!("bad clamp box [{q_min}, {q_max}]")));
        }
        let lipschitz = lipschitz_constant(&network);
        let slopes = network.cumulative_slopes();
        let mut knots = Vec::with_capacity(slopes.len());
        for (j, b) in network.biases.iter().enumerate() {
            knots.push(match j {
                0 => network.beta,
                _ => knots[j - 1] + slopes[j - 1] * (b - network.biases[j - 1]),
            });
        }
        Ok(EquilibriumFunction {
            network,
            q_min,
            q_max,
            lipschitz,
            knots,
            slopes,
        })
    }

    /// A constant function `φ ≡ value` (no hidden neurons).
    pub fn constant(value: f64, q_min: f64, q_max: f64) -> Result<Self> {
        Self::new(
            Network {
                biases: vec![],
                weights: vec![],
                beta: value,
            },
            q_min,
            q_max,
        )
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn hidden(&self) -> usize {
        self.network.hidden()
    }

    pub fn evaluate(&self, v: f64) -> f64 {
        evaluate(self, v)
    }

    pub fn save(&self, path: impl AsRef<Path>, bus: Option<usize>) -> Result<()> {
        std::fs::write(path, self.to_text(bus))?;
        Ok(())
    }

    pub fn to_text(&self, bus: Option<usize>) -> String {
        let file = FunctionFile {
            format: FUNCTION_FORMAT.to_string(),
            bus,
            hidden: self.hidden(),
            beta: self.network.beta,
            q_min: self.q_min,
            q_max: self.q_max,
            lipschitz: self.lipschitz,
            biases: self.network.biases.clone(),
            weights: self.network.weights.clone(),
        };
        toml::to_string(&file).expect("function serializes")
    }

    /// Parses and re-validates a function file. Returns the DER bus if recorded.
    pub fn from_text(text: &str) -> std::result::Result<(Self, Option<usize>), String> {
        let file: FunctionFile = toml::from_str(text).map_err(|e| e.to_string())?;
        if file.format != FUNCTION_FORMAT {
            return Err(format!("unsupported format tag {:?}", file.format));
        }
        if file.hidden != file.biases.len() {
            return Err(format!(
                "header says {} neurons, found {} biases",
                file.hidden,
                file.biases.len()
            ));
        }
        let phi = EquilibriumFunction::new(
            Network {
                biases: file.biases,
                weights: file.weights,
                beta: file.beta,
            },
            file.q_min,
            file.q_max,
        )
        .map_err(|e| e.to_string())?;
        if phi.lipschitz != file.lipschitz {
            return Err(format!(
                "stored Lipschitz constant {} disagrees with weights ({})",
                file.lipschitz, phi.lipschitz
            ));
        }
        Ok((phi, file.bus))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<usize>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|m| Error::format(path, m))
    }
}

pub const FUNCTION_FORMAT: &str = "voltvar-equilibrium-function/1";

#[derive(Debug, Serialize, Deserialize)]
struct FunctionFile {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus: Option<usize>,
    hidden: usize,
    beta: f64,
    q_min: f64,
    q_max: f64,
    lipschitz: f64,
    biases: Vec<f64>,
    weights: Vec<f64>,
}

/// `φ(v) = min(max(N(v), q_min), q_max)`, equivalently
/// `q_max − ReLU(q_max − N) + ReLU(q_min − N)` for a finite box.
pub fn evaluate(phi: &EquilibriumFunction, v: f64) -> f64 {
    let biases = &phi.network.biases;
    let n = match biases.partition_point(|b| *b < v) {
        0 => phi.network.beta,
        k => phi.knots[k - 1] + phi.slopes[k - 1] * (v - biases[k - 1]),
    };
    n.max(phi.q_min).min(phi.q_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Initial biases are equispaced over this voltage range.
    pub bias_range: (f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 2000,
            learning_rate: 0.01,
            decay_factor: 0.5,
            decay_interval: 500,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            bias_range: (0.90, 1.10),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Parameter("decay factor must be in (0, 1]".into()));
        }
        if !(self.bias_range.0 < self.bias_range.1) {
            return Err(Error::Parameter("bias range must be a nonempty interval".into()));
        }
        if self.decay_interval == 0 {
            return Err(Error::Parameter("decay interval must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Parameter("Adam moment factors must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, step: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((step / self.decay_interval) as i32)
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    fn permute(&mut self, order: &[usize]) {
        self.first = order.iter().map(|&i| self.first[i]).collect();
        self.second = order.iter().map(|&i| self.second[i]).collect();
    }
}

/// Result of [`train`]: the function plus its final mean squared error.
#[derive(Debug, Clone)]
pub struct Trained {
    pub function: EquilibriumFunction,
    pub mse: f64,
}

fn mean_squared_error(phi_net: &Network, q_min: f64, q_max: f64, points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .map(|(v, q)| {
            let r = phi_net.eval(*v).max(q_min).min(q_max) - q;
            r * r
        })
        .sum::<f64>()
        / points.len() as f64
}

/// Fits `φ` to all points (real and pseudo) of `dataset` by full-batch Adam on
/// the mean squared error. After every step the neurons are re-sorted by bias
/// (optimizer state follows) and the weights pass through
/// [`restore_feasibility`], so every iterate is monotone.
pub fn train(
    dataset: &LocalDataset,
    hidden: usize,
    q_min: f64,
    q_max: f64,
    config: &TrainConfig,
) -> Result<Trained> {
    let points: Vec<(f64, f64)> = dataset.points.iter().map(|p| (p.v, p.q)).collect();
    train_points(&points, hidden, q_min, q_max, config)
}

pub fn train_points(
    points: &[(f64, f64)],
    hidden: usize,
    q_min: f64,
    q_max: f64,
    config: &TrainConfig,
) -> Result<Trained> {
    config.check()?;
    if hidden == 0 {
        return Err(Error::Parameter("hidden layer needs at least one neuron".into()));
    }
    if points.is_empty() {
        return Err(Error::EmptyDataset("no training points".into()));
    }
    if !(q_min <= q_max) {
        return Err(Error::Parameter(format!("bad clamp box [{q_min}, {q_max}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // train on the standardized input x = (v − center)/half, where the bias
    // range maps onto [−1, 1]
    let (lo, hi) = config.bias_range;
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let scaled: Vec<(f64, f64)> = points.iter().map(|(v, q)| ((v - center) / half, *q)).collect();
    let biases: Vec<f64> = (0..hidden)
        .map(|h| {
            if hidden == 1 {
                0.0
            } else {
                -1.0 + 2.0 * h as f64 / (hidden - 1) as f64
            }
        })
        .collect();
    let weights: Vec<f64> = (0..hidden).map(|_| rng.random_range(-0.01..=0.0)).collect();
    let beta = points.iter().map(|(_, q)| q).sum::<f64>() / points.len() as f64;
    let mut net = Network {
        biases,
        weights,
        beta: beta.clamp(q_min, q_max),
    };

    let mut bias_m = Moments::new(hidden);
    let mut weight_m = Moments::new(hidden);
    let mut beta_m = Moments::new(1);
    let scale = 2.0 / points.len() as f64;
    let mut grad_b = vec![0.0; hidden];
    let mut grad_w = vec![0.0; hidden];

    for step in 0..config.episodes {
        grad_b.iter_mut().for_each(|g| *g = 0.0);
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_beta = 0.0;
        for (v, q) in &scaled {
            let n = net.eval(*v);
            // the clamp passes gradient only strictly inside the box
            if !(q_min < n && n < q_max) {
                continue;
            }
            let d = scale * (n - q);
            grad_beta += d;
            for h in 0..hidden {
                let gap = v - net.biases[h];
                if gap > 0.0 {
                    grad_w[h] += d * gap;
                    grad_b[h] -= d * net.weights[h];
                }
            }
        }

        let lr = config.learning_rate_at(step);
        let t = (step + 1) as i32;
        let correction1 = 1.0 - config.beta1.powi(t);
        let correction2 = 1.0 - config.beta2.powi(t);
        let adam = |param: &mut f64, grad: f64, m: &mut f64, s: &mut f64| {
            *m = config.beta1 * *m + (1.0 - config.beta1) * grad;
            *s = config.beta2 * *s + (1.0 - config.beta2) * grad * grad;
            let m_hat = *m / correction1;
            let s_hat = *s / correction2;
            *param -= lr * m_hat / (s_hat.sqrt() + config.adam_epsilon);
        };
        for h in 0..hidden {
            adam(
                &mut net.biases[h],
                grad_b[h],
                &mut bias_m.first[h],
                &mut bias_m.second[h],
            );
            adam(
                &mut net.weights[h],
                grad_w[h],
                &mut weight_m.first[h],
                &mut weight_m.second[h],
            );
        }
        adam(&mut net.beta, grad_beta, &mut beta_m.first[0], &mut beta_m.second[0]);

        if !net.biases_sorted() {
            let order = sort_order(&net.biases);
            net.biases = order.iter().map(|&i| net.biases[i]).collect();
            net.weights = order.iter().map(|&i| net.weights[i]).collect();
            bias_m.permute(&order);
            weight_m.permute(&order);
        }
        restore_feasibility(&mut net);
    }

    net.biases.iter_mut().for_each(|b| *b = center + half * *b);
    net.weights.iter_mut().for_each(|w| *w /= half);
    restore_feasibility(&mut net);
    let mse = mean_squared_error(&net, q_min, q_max, points);
    let function = EquilibriumFunction::new(net, q_min, q_max)?;
    Ok(Trained { function, mse })
}

/// Builds the interpolating network of a nonincreasing `g` from its values at
/// the `H + 1` equispaced points of `[x_lo, x_hi]`: `β = g(x_lo)`,
/// `b_h = x_lo + (h − 1)s`, and weights chosen so that segment `h` has the
/// secant slope of `g` over `[b_h, b_h + s]`. The box is left unbounded.
pub fn construct_interpolant(samples: &[f64], x_lo: f64, x_hi: f64) -> Result<EquilibriumFunction> {
    if samples.len() < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    if !(x_lo < x_hi) {
        return Err(Error::Parameter(format!("empty interval [{x_lo}, {x_hi}]")));
    }
    if let Some(i) = samples.windows(2).position(|p| p[1] > p[0]) {
        return Err(Error::Parameter(format!(
            "samples increase between points {i} and {}",
            i + 1
        )));
    }
    let hidden = samples.len() - 1;
    let spacing = (x_hi - x_lo) / hidden as f64;
    let mut running = 0.0;
    let mut weights = Vec::with_capacity(hidden);
    for h in 0..hidden {
        let slope = (samples[h + 1] - samples[h]) / spacing;
        let w = slope - running;
        running += w;
        weights.push(w);
    }
    let biases = (0..hidden).map(|h| x_lo + h as f64 * spacing).collect();
    EquilibriumFunction::new(
        Network {
            biases,
            weights,
            beta: samples[0],
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(biases: &[f64], weights: &[f64], beta: f64) -> Network {
        Network {
            biases: biases.to_vec(),
            weights: weights.to_vec(),
            beta,
        }
    }

    // Independent evaluator: walk the segments and integrate slopes.
    fn piecewise_eval(n: &Network, x: f64) -> f64 {
        let mut value = n.beta;
        let mut slope = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for (b, w) in n.biases.iter().zip(&n.weights) {
            if x <= *b {
                break;
            }
            if prev.is_finite() {
                value += slope * (b - prev);
            }
            slope += w;
            prev = *b;
        }
        if prev.is_finite() {
            value += slope * (x - prev);
        }
        value
    }

    #[test]
    fn constant_network() {
        let phi = EquilibriumFunction::new(net(&[0.9, 1.0], &[0.0, 0.0], 0.2), -0.4, 0.4).unwrap();
        for v in [0.5, 0.95, 1.0, 1.5] {
            assert_eq!(phi.evaluate(v), 0.2);
        }
    }

    #[test]
    fn upper_clamp() {
        let phi = EquilibriumFunction::constant(1.0, -0.4, 0.4).unwrap();
        assert_eq!(phi.evaluate(1.0), 0.4);
    }

    #[test]
    fn hand_evaluated_two_neuron_network() {
        let n = net(&[0.95, 1.00], &[-1.0, -1.0], 0.1);
        let phi = EquilibriumFunction::new(n.clone(), -0.4, 0.4).unwrap();
        assert!((phi.evaluate(1.02) - 0.01).abs() < 1e-12);
        assert!((piecewise_eval(&n, 1.02) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn relu_clamp_form_agrees() {
        let n = net(&[0.9, 0.97, 1.01], &[-3.0, -5.0, 2.0], 0.35);
        let phi = EquilibriumFunction::new(n.clone(), -0.4, 0.4).unwrap();
        for k in 0..=400 {
            let v = 0.8 + k as f64 * 0.001;
            let raw = n.eval(v);
            let relu = |x: f64| x.max(0.0);
            let form = 0.4 - relu(0.4 - raw) + relu(-0.4 - raw);
            assert!((phi.evaluate(v) - form).abs() < 1e-15);
            assert!((raw - piecewise_eval(&n, v)).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_constant(&net(&[1.0], &[-1.0], 0.0)), 1.0);
        assert_eq!(lipschitz_constant(&net(&[0.9, 1.0], &[-1.0, 0.4], 0.0)), 1.0);
        assert_eq!(lipschitz_constant(&net(&[0.9, 1.0], &[0.0, 0.0], 0.0)), 0.0);
    }

    #[test]
    fn lipschitz_matches_slope_scan() {
        let n = net(&[0.9, 1.0], &[-1.0, 0.4], 0.0);
        let h = 1e-6;
        let sup = (0..10_000)
            .map(|k| 0.8 + k as f64 * 3e-5)
            .map(|x| ((n.eval(x + h) - n.eval(x)) / h).abs())
            .fold(0.0, f64::max);
        assert!((sup - lipschitz_constant(&n)).abs() < 1e-9 * 1e3, "{sup}");
    }

    #[test]
    fn restore_feasibility_examples() {
        let mut feasible = net(&[0.9, 1.0], &[-1.0, 0.4], 0.0);
        restore_feasibility(&mut feasible);
        assert_eq!(feasible.weights, vec![-1.0, 0.4]);

        let mut bad = net(&[0.9, 1.0], &[0.5, -1.0], 0.0);
        restore_feasibility(&mut bad);
        assert_eq!(bad.weights, vec![0.0, -0.5]);

        let mut zero = net(&[0.9, 1.0], &[0.0, 0.0], 0.0);
        restore_feasibility(&mut zero);
        assert_eq!(zero.weights, vec![0.0, 0.0]);
    }

    #[test]
    fn invariant_violations_rejected() {
        assert!(EquilibriumFunction::new(net(&[1.0, 0.9], &[-1.0, 0.0], 0.0), -1.0, 1.0).is_err());
        assert!(EquilibriumFunction::new(net(&[0.9, 1.0], &[0.5, -1.0], 0.0), -1.0, 1.0).is_err());
        assert!(EquilibriumFunction::new(net(&[0.9], &[-1.0], 0.0), 1.0, -1.0).is_err());
    }

    #[test]
    fn interpolant_of_linear_function() {
        let samples: Vec<f64> = (0..=10).map(|i| -(i as f64) / 10.0).collect();
        let phi = construct_interpolant(&samples, 0.0, 1.0).unwrap();
        assert_eq!(phi.hidden(), 10);
        let err = (0..=10_000)
            .map(|k| k as f64 / 10_000.0)
            .map(|x| (phi.evaluate(x) + x).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1.0 * 0.1);
    }

    #[test]
    fn interpolant_of_constant_is_flat() {
        let phi = construct_interpolant(&[0.3; 6], 0.0, 1.0).unwrap();
        assert!(phi.network().weights.iter().all(|w| *w == 0.0));
        assert_eq!(phi.evaluate(0.77), 0.3);
    }

    #[test]
    fn interpolant_rejects_increasing_samples() {
        assert!(construct_interpolant(&[0.0, 0.1], 0.0, 1.0).is_err());
    }

    #[test]
    fn trains_recoverable_linear_target() {
        let points: Vec<(f64, f64)> = (0..200)
            .map(|k| {
                let v = 0.9 + 0.2 * k as f64 / 199.0;
                (v, (-0.5 * (v - 1.0)).clamp(-0.4, 0.4))
            })
            .collect();
        let trained = train_points(&points, 50, -0.4, 0.4, &TrainConfig::default()).unwrap();
        assert!(trained.mse <= 1e-4, "mse {}", trained.mse);
        let again = train_points(&points, 50, -0.4, 0.4, &TrainConfig::default()).unwrap();
        assert_eq!(trained.function, again.function);
    }

    #[test]
    fn training_rejects_bad_input() {
        let cfg = TrainConfig::default();
        assert!(train_points(&[], 5, -0.4, 0.4, &cfg).is_err());
        assert!(train_points(&[(1.0, 0.0)], 0, -0.4, 0.4, &cfg).is_err());
    }

    #[test]
    fn file_round_trip_and_revalidation() {
        let phi = EquilibriumFunction::new(net(&[0.9, 1.0], &[-1.0, 0.4], 0.1), -0.4, 0.4).unwrap();
        let text = phi.to_text(Some(12));
        let (back, bus) = EquilibriumFunction::from_text(&text).unwrap();
        assert_eq!(back, phi);
        assert_eq!(bus, Some(12));
        let tampered = text.replace("-1.0", "1.0");
        assert!(EquilibriumFunction::from_text(&tampered).is_err());
    }
}
