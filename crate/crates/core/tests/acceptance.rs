//! Acceptance checks on the bundled feeder and synthetic fixtures. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voltvar_core::control::{
    control_step, find_equilibrium_from, simulate, stepsize_bound, ControllerConfig, ControllerKind, FlowModel,
    LocalRule, SimulationTrace, TraceVerdict, VoltageRecord,
};
use voltvar_core::dataset::LocalDataset;
use voltvar_core::fixtures::{path_feeder, random_radial};
use voltvar_core::linalg::spectral_norm;
use voltvar_core::monotone::{construct_interpolant, lipschitz_constant, restore_feasibility, Network};
use voltvar_core::orpf::{grid_search_refined, solve_orpf, OrpfInstance, OrpfStatus};
use voltvar_core::pipeline::{
    auto_epsilon, build_datasets, evaluation_day, reference_solutions, run_day, train_all, LearnConfig, RuleBook,
};
use voltvar_core::power_flow::{solve_ac, solve_linearized};
use voltvar_core::profiles::{read_csv, synthesize, ProfileConfig};
use voltvar_core::{EquilibriumFunction, FeederSpec, Scenario, SensitivityModel};

const ALPHAS: [f64; 5] = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
const NOISE_LEVELS: [f64; 4] = [0.0, 0.002, 0.005, 0.01];
const CONVERGED: f64 = 1e-8;
const STARTS: usize = 20;

const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_BUDGET: Duration = Duration::from_secs(5);
const C3_BUDGET: Duration = Duration::from_secs(10);
const C5_BUDGET: Duration = Duration::from_secs(5);
const C6_BUDGET: Duration = Duration::from_secs(60);
const C7_BUDGET: Duration = Duration::from_secs(10);
const C8_BUDGET: Duration = Duration::from_secs(15 * 60);
const C11_BUDGET: Duration = Duration::from_secs(5);

const C1_ALPHA: f64 = 0.5;
const C3_AGREEMENT: f64 = 1e-8;
const C5_TIGHTNESS: f64 = 0.01;
const C6_GAP: f64 = 1e-4;
const C7_SLOPE: (f64, f64) = (1.7, 2.3);
const C9_BAND: f64 = 0.10;
const C10_TOTAL: usize = 2840;
const C11_PAIRS: usize = 500;
const EIG_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

struct Bundled {
    model: SensitivityModel,
    day: Vec<Scenario>,
}

fn bundled() -> Bundled {
    let spec = FeederSpec::load(data_dir().join("ieee37_style.toml")).unwrap();
    let model = SensitivityModel::from_spec(&spec).unwrap();
    let day = read_csv(data_dir().join("ieee37_style_day.csv"), &model).unwrap();
    Bundled { model, day }
}

struct AlphaRun {
    alpha: f64,
    datasets: Vec<LocalDataset>,
    book: RuleBook,
}

const SEED: u64 = 2024;

fn learn_config(alpha: f64) -> LearnConfig {
    LearnConfig {
        alpha,
        seed: SEED,
        ..LearnConfig::default()
    }
}

/// Learning stage for every alpha: datasets, training, droop fits.
fn learning_stage(b: &Bundled) -> Vec<AlphaRun> {
    ALPHAS
        .iter()
        .map(|&alpha| {
            let config = learn_config(alpha);
            let build = build_datasets(&b.model, &b.day, &config).unwrap();
            build.ensure_nonempty().unwrap();
            let trained = train_all(&build.datasets, config.hidden, &config.train, config.seed).unwrap();
            let book = RuleBook::new(&build.datasets, trained.functions, config.droop_resolution).unwrap();
            AlphaRun {
                alpha,
                datasets: build.datasets,
                book,
            }
        })
        .collect()
}

/// Box checker shared by every criterion that produces iterates.
#[derive(Default)]
struct BoxAudit {
    steps: usize,
    violations: usize,
}

impl BoxAudit {
    fn check(&mut self, model: &SensitivityModel, q: &DVector<f64>) {
        self.steps += 1;
        if !model.in_box(q) {
            self.violations += 1;
        }
    }

    fn traces(&mut self, model: &SensitivityModel, traces: &[SimulationTrace]) {
        for t in traces {
            for q in &t.q_history {
                self.check(model, q);
            }
        }
    }
}

fn c1_stability(b: &Bundled, runs: &[AlphaRun], audit: &mut BoxAudit) -> Outcome {
    let start = Instant::now();
    let run = runs.iter().find(|r| r.alpha == C1_ALPHA).unwrap();
    let rules = run.book.rules(ControllerKind::Incremental);
    let epsilon = auto_epsilon(&b.model, &rules);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cap = 200_000;
    let (mut worst, mut failures) = (0usize, 0usize);
    for scenario in &b.day {
        let v_hat = b.model.der_entries(&b.model.v_hat(scenario));
        for _ in 0..STARTS {
            let mut q = DVector::from_fn(b.model.der_count(), |k, _| {
                rng.random_range(b.model.q_min[k]..=b.model.q_max[k])
            });
            let mut steps = 0;
            loop {
                let v = &b.model.x * &q + &v_hat;
                let next = control_step(&q, &v, &rules, epsilon);
                let residual = (&next - &q).amax();
                q = next;
                steps += 1;
                audit.check(&b.model, &q);
                if residual <= CONVERGED {
                    break;
                }
                if steps == cap {
                    failures += 1;
                    break;
                }
            }
            worst = worst.max(steps);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < C1_BUDGET,
        format!(
            "alpha {C1_ALPHA}, eps {epsilon:.3e}: {} of {} runs reached residual <= {CONVERGED:e} (worst {worst} steps) in {:.1} s (budget {} s)",
            b.day.len() * STARTS - failures,
            b.day.len() * STARTS,
            elapsed.as_secs_f64(),
            C1_BUDGET.as_secs()
        ),
    )
}

/// `φ(v) = −slope·(v − center)` (clamped to ±0.4).
fn linear_rule(slope: f64, center: f64) -> LocalRule {
    let net = Network {
        biases: vec![center - 1.0],
        weights: vec![-slope],
        beta: slope,
    };
    LocalRule::Learned(EquilibriumFunction::new(net, -0.4, 0.4).unwrap())
}

fn small_feeder() -> SensitivityModel {
    SensitivityModel::from_spec(&path_feeder(6, Complex::new(0.02, 0.04), &[3, 5])).unwrap()
}

fn single_scenario_run(
    model: &SensitivityModel,
    rules: &[LocalRule],
    epsilon: f64,
    iterations: usize,
    q0: f64,
) -> SimulationTrace {
    let config = ControllerConfig {
        epsilon,
        iterations,
        kind: ControllerKind::Incremental,
        record: VoltageRecord::LastStep,
        ..ControllerConfig::default()
    };
    let q0 = DVector::from_element(model.der_count(), q0);
    simulate(model, rules, &config, &[Scenario::zero(model)], &q0)
        .unwrap()
        .remove(0)
}

fn c2_failure_mode(audit: &mut BoxAudit) -> Outcome {
    let start = Instant::now();
    let model = small_feeder();
    let slope = 5.0 / model.x_norm;
    let rules = vec![linear_rule(slope, 1.0); 2];
    let product = model.x_norm * slope;
    let full = single_scenario_run(&model, &rules, 1.0, 200, 0.3);
    let safe_eps = 0.9 * stepsize_bound(model.x_norm, slope);
    let safe = single_scenario_run(&model, &rules, safe_eps, 20_000, 0.3);
    audit.traces(&model, &[full.clone(), safe.clone()]);
    let elapsed = start.elapsed();
    outcome(
        product >= 3.0
            && full.verdict == TraceVerdict::Oscillating
            && safe.verdict == TraceVerdict::Converged
            && elapsed < C2_BUDGET,
        format!(
            "|X|L = {product:.2}: eps 1 -> {:?}, eps {safe_eps:.3e} -> {:?} after {:?} steps ({:.2} s)",
            full.verdict,
            safe.verdict,
            safe.converged_at.map(|t| t + 1),
            elapsed.as_secs_f64()
        ),
    )
}

fn random_network(rng: &mut ChaCha8Rng, hidden: usize, scale: f64) -> Network {
    let mut biases: Vec<f64> = (0..hidden).map(|_| rng.random_range(0.9..1.1)).collect();
    biases.sort_by(f64::total_cmp);
    let weights = (0..hidden).map(|_| rng.random_range(-scale..scale * 0.3)).collect();
    let mut net = Network {
        biases,
        weights,
        beta: rng.random_range(-0.3..0.3),
    };
    restore_feasibility(&mut net);
    net
}

fn c3_uniqueness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for feeder in 0..10 {
        let ders = 1 + feeder % 5;
        let spec = random_radial(&mut rng, 12, ders);
        let model = SensitivityModel::from_spec(&spec).unwrap();
        let rules: Vec<LocalRule> = (0..ders)
            .map(|k| {
                let net = random_network(&mut rng, 10, 40.0);
                LocalRule::Learned(EquilibriumFunction::new(net, model.q_min[k], model.q_max[k]).unwrap())
            })
            .collect();
        let scenario = Scenario {
            index: 0,
            p: DVector::from_fn(model.n, |_, _| rng.random_range(-0.2..0.1)),
            q_l: DVector::from_fn(model.load_count(), |_, _| rng.random_range(-0.1..0.0)),
        };
        let points: Vec<DVector<f64>> = (0..STARTS)
            .map(|_| {
                let q0 = DVector::from_fn(ders, |k, _| rng.random_range(model.q_min[k]..=model.q_max[k]));
                find_equilibrium_from(&model, &rules, &scenario, &q0, 1e-12).unwrap().q
            })
            .collect();
        for p in &points {
            worst = worst.max((p - &points[0]).amax());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= C3_AGREEMENT && elapsed < C3_BUDGET,
        format!(
            "10 random feeders x {STARTS} starts: max disagreement {worst:.2e} (tol {C3_AGREEMENT:e}) in {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Max secant slope magnitude of `f` over a uniform grid.
fn scan(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (bool, f64, f64, f64) {
    let mut monotone = true;
    let mut steepest = 0.0f64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let h = (hi - lo) / points as f64;
    let mut prev = f(lo);
    for k in 1..=points {
        let x = lo + h * k as f64;
        let y = f(x);
        monotone &= y <= prev;
        steepest = steepest.max((prev - y) / h);
        min = min.min(y);
        max = max.max(y);
        prev = y;
    }
    (monotone, steepest, min, max)
}

fn c5_monotone_contract(runs: &[AlphaRun]) -> Outcome {
    let start = Instant::now();
    let mut failures = vec![];
    let mut worst_gap = 0.0f64;
    let mut count = 0;
    for run in runs {
        for phi in &run.book.learned {
            count += 1;
            let net = phi.network();
            let lo = net.biases[0] - 0.01;
            let hi = net.biases[net.biases.len() - 1] + 0.01;
            let (mono, _, min, max) = scan(|v| phi.evaluate(v), lo - 0.2, hi + 0.2, 100_000);
            if !mono || min < phi.q_min() || max > phi.q_max() {
                failures.push(format!("alpha {:.3}: clamped scan", run.alpha));
            }
            let raw = EquilibriumFunction::new(net.clone(), f64::NEG_INFINITY, f64::INFINITY).unwrap();
            let (mono, steepest, _, _) = scan(|v| raw.evaluate(v), lo, hi, 400_000);
            let l = lipschitz_constant(net);
            let gap = if l > 0.0 { (l - steepest) / l } else { 0.0 };
            worst_gap = worst_gap.max(gap.abs());
            if !mono || steepest > l * (1.0 + 1e-9) || gap > C5_TIGHTNESS {
                failures.push(format!("alpha {:.3}: slope {steepest} vs L {l}", run.alpha));
            }
        }
    }
    let samples: Vec<f64> = (0..=10).map(|k| -(k as f64) / 10.0).collect();
    let interp = construct_interpolant(&samples, 0.0, 1.0).unwrap();
    let sup = (0..=10_000)
        .map(|k| k as f64 / 10_000.0)
        .map(|x| (interp.evaluate(x) + x).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && sup <= 0.1 && elapsed < C5_BUDGET,
        format!(
            "{count} trained functions scanned, worst Lipschitz gap {:.3}% (tol {}%){}; interpolant of -x on [0,1], H=10: sup error {sup:.2e} <= 0.1 ({:.2} s)",
            100.0 * worst_gap,
            100.0 * C5_TIGHTNESS,
            if failures.is_empty() { String::new() } else { format!(", failures: {failures:?}") },
            elapsed.as_secs_f64()
        ),
    )
}

fn c6_orpf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut solved = 0;
    let mut resampled = 0;
    for (i, alpha) in ALPHAS.iter().cycle().take(25).enumerate() {
        let ders = 1 + i % 3;
        loop {
            let spec = random_radial(&mut rng, 8, ders);
            let model = SensitivityModel::from_spec(&spec).unwrap();
            let scenario = Scenario {
                index: i,
                p: DVector::from_fn(model.n, |_, _| rng.random_range(-0.3..0.1)),
                q_l: DVector::from_fn(model.load_count(), |_, _| rng.random_range(-0.1..0.0)),
            };
            let instance = OrpfInstance::new(&model, &scenario, *alpha).unwrap();
            let sol = solve_orpf(&instance).unwrap();
            if sol.status == OrpfStatus::Infeasible {
                resampled += 1;
                continue;
            }
            let oracle = grid_search_refined(&instance, 41, 8).unwrap();
            worst = worst.max((sol.objective - oracle.objective).abs());
            solved += 1;
            break;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        solved == 25 && worst <= C6_GAP && elapsed < C6_BUDGET,
        format!(
            "{solved} instances (C <= 3, 5 alphas, {resampled} infeasible draws resampled): max objective gap {worst:.2e} (tol {C6_GAP:e}) in {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_linearization() -> Outcome {
    let start = Instant::now();
    let mut slopes = vec![];
    let mut feeders: Vec<PathBuf> = std::fs::read_dir(data_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .filter(|p| std::fs::read_to_string(p).unwrap().contains("[buses]"))
        .collect();
    feeders.sort();
    for path in &feeders {
        let spec = FeederSpec::load(path).unwrap();
        let model = SensitivityModel::from_spec(&spec).unwrap();
        let day = synthesize(&spec, &model, &ProfileConfig::default()).unwrap();
        let peak = &day[19 * 60];
        let q = DVector::zeros(model.der_count());
        let scales = [0.05, 0.1, 0.2, 0.4];
        let points: Vec<(f64, f64)> = scales
            .iter()
            .map(|s| {
                let scaled = Scenario {
                    index: 0,
                    p: &peak.p * *s,
                    q_l: &peak.q_l * *s,
                };
                let lin = solve_linearized(&model, &scaled, &q).unwrap();
                let ac = solve_ac(&model, &scaled, &q).unwrap();
                (s.ln(), (lin - ac.v).norm().ln())
            })
            .collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        slopes.push((spec.name.clone(), slope));
    }
    let elapsed = start.elapsed();
    let ok = !slopes.is_empty() && slopes.iter().all(|(_, s)| *s >= C7_SLOPE.0 && *s <= C7_SLOPE.1);
    outcome(
        ok && elapsed < C7_BUDGET,
        format!(
            "log-log error slopes {:?} (accept {:?}) in {:.2} s",
            slopes
                .iter()
                .map(|(n, s)| format!("{n}: {s:.3}"))
                .collect::<Vec<_>>(),
            C7_SLOPE,
            elapsed.as_secs_f64()
        ),
    )
}

fn c8_loss_ordering(runs: &[AlphaRun], elapsed: Duration) -> Outcome {
    let mut ok = elapsed < C8_BUDGET;
    let mut cells = vec![];
    for run in runs {
        let losses = run.book.losses(&run.datasets).unwrap();
        let get = |k: ControllerKind| losses.iter().find(|(kind, _)| *kind == k).unwrap().1;
        let (l, o, s) = (
            get(ControllerKind::Incremental),
            get(ControllerKind::DroopOptimized),
            get(ControllerKind::DroopStandard),
        );
        ok &= l < o && o < s;
        cells.push(format!("a={:.3}: {l:.2e} < {o:.2e} < {s:.2e}", run.alpha));
    }
    outcome(
        ok,
        format!(
            "learned < optimized droop < standard droop: [{}]; pipeline {:.0} s (budget {} s)",
            cells.join("; "),
            elapsed.as_secs_f64(),
            C8_BUDGET.as_secs()
        ),
    )
}

fn c9_distance_ordering(b: &Bundled, runs: &[AlphaRun], audit: &mut BoxAudit) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut cells = vec![];
    for run in runs {
        let config = learn_config(run.alpha);
        let day = evaluation_day(&b.day, &config).unwrap();
        let references = reference_solutions(&b.model, &day, run.alpha, config.orpf).unwrap();
        let distance = |kind: ControllerKind, noise: f64, audit: &mut BoxAudit| {
            let rules = run.book.rules(kind);
            let controller = ControllerConfig {
                epsilon: auto_epsilon(&b.model, &rules),
                flow: FlowModel::Ac,
                noise,
                kind,
                seed: 9,
                ..ControllerConfig::default()
            };
            let day_run = run_day(&b.model, &rules, &controller, &day, &references, run.alpha).unwrap();
            audit.traces(&b.model, &day_run.traces);
            day_run.distance.average
        };
        let kinds = [
            ControllerKind::Incremental,
            ControllerKind::DroopOptimized,
            ControllerKind::DroopStandard,
            ControllerKind::None,
        ];
        let at_zero: Vec<f64> = kinds.iter().map(|k| distance(*k, 0.0, audit)).collect();
        let smallest = at_zero[1..].iter().all(|d| at_zero[0] < *d);
        let mut trend = vec![at_zero[0]];
        for noise in &NOISE_LEVELS[1..] {
            trend.push(distance(ControllerKind::Incremental, *noise, audit));
        }
        let nondecreasing = trend.windows(2).all(|w| w[1] >= (1.0 - C9_BAND) * w[0]);
        ok &= smallest && nondecreasing;
        cells.push(format!(
            "a={:.3}: learned {:.3e} vs [{:.3e}, {:.3e}, {:.3e}]{}, noise trend [{}]{}",
            run.alpha,
            at_zero[0],
            at_zero[1],
            at_zero[2],
            at_zero[3],
            if smallest { "" } else { " NOT SMALLEST" },
            trend.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", "),
            if nondecreasing { "" } else { " NOT NONDECREASING" }
        ));
    }
    outcome(
        ok,
        format!(
            "AC flow, perturbed evaluation day: {} ({:.0} s)",
            cells.join("; "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c10_point_count(runs: &[AlphaRun]) -> Outcome {
    let counts: Vec<_> = runs
        .iter()
        .flat_map(|r| r.datasets.iter().map(|d| d.counts()))
        .collect();
    let ok = counts
        .iter()
        .all(|c| c.total() == C10_TOTAL && c.real == 1440 && c.pseudo_low == 700 && c.pseudo_high == 700);
    outcome(
        ok,
        format!(
            "{} datasets, each {} real + {} + {} pseudo = {} points (expected {C10_TOTAL})",
            counts.len(),
            counts[0].real,
            counts[0].pseudo_low,
            counts[0].pseudo_high,
            counts[0].total()
        ),
    )
}

fn c11_lemma() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut min_eig, mut worst_excess) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..C11_PAIRS {
        let c = rng.random_range(1..=6);
        let a = DMatrix::from_fn(c, c, |_, _| rng.random_range(-1.0..1.0));
        let x = &a * a.transpose() + DMatrix::identity(c, c) * rng.random_range(1e-3..1.0);
        let l = rng.random_range(0.0..50.0);
        let m = DMatrix::from_diagonal(&DVector::from_fn(c, |_, _| rng.random_range(0.0..=l)));
        let xm = &x * &m;
        for e in xm.complex_eigenvalues().iter() {
            min_eig = min_eig.min(e.re);
        }
        let excess = spectral_norm(&xm).unwrap() - spectral_norm(&x).unwrap() * l;
        worst_excess = worst_excess.max(excess);
    }
    let elapsed = start.elapsed();
    outcome(
        min_eig >= -EIG_TOL && worst_excess <= EIG_TOL && elapsed < C11_BUDGET,
        format!(
            "{C11_PAIRS} pairs: min Re eig(XM) {min_eig:.2e}, max |XM| - |X|L {worst_excess:.2e} (tol {EIG_TOL:e}) in {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c12_full_step(audit: &mut BoxAudit) -> Outcome {
    let model = small_feeder();
    let slope = 0.9 * (std::f64::consts::SQRT_2 - 1.0) / model.x_norm;
    let rules = vec![linear_rule(slope, 1.0); 2];
    let trace = single_scenario_run(&model, &rules, 1.0, 500, 0.3);
    audit.traces(&model, std::slice::from_ref(&trace));
    outcome(
        trace.verdict == TraceVerdict::Converged,
        format!(
            "|X|L = {:.4} < sqrt(2) - 1: eps 1 -> {:?} after {:?} steps (above the threshold nothing is asserted)",
            model.x_norm * slope,
            trace.verdict,
            trace.converged_at.map(|t| t + 1)
        ),
    )
}

fn main() {
    let b = bundled();
    let pipeline_start = Instant::now();
    let runs = learning_stage(&b);
    let pipeline = pipeline_start.elapsed();
    let mut audit = BoxAudit::default();

    let mut results: Vec<(&str, Outcome)> = vec![];
    let report = |name: &'static str, o: Outcome, results: &mut Vec<(&str, Outcome)>| {
        println!(
            "[{}] C{:<2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            results.len() + 1,
            o.detail
        );
        results.push((name, o));
    };
    report("stability bound", c1_stability(&b, &runs, &mut audit), &mut results);
    report("failure mode", c2_failure_mode(&mut audit), &mut results);
    report("uniqueness", c3_uniqueness(), &mut results);
    // criterion 4 audits the iterates of every other closed-loop criterion,
    // so it is evaluated after them and printed in place
    let c5 = c5_monotone_contract(&runs);
    let c6 = c6_orpf_oracle();
    let c7 = c7_linearization();
    let c8 = c8_loss_ordering(&runs, pipeline);
    let c9 = c9_distance_ordering(&b, &runs, &mut audit);
    let c10 = c10_point_count(&runs);
    let c11 = c11_lemma();
    let c12 = c12_full_step(&mut audit);
    let c4 = outcome(
        audit.violations == 0 && audit.steps > 0,
        format!(
            "{} box violations over {} audited iterates (criteria 1, 2, 9, 12)",
            audit.violations, audit.steps
        ),
    );
    report("feasibility", c4, &mut results);
    report("monotone network contract", c5, &mut results);
    report("ORPF oracle equivalence", c6, &mut results);
    report("linearization fidelity", c7, &mut results);
    report("loss ordering", c8, &mut results);
    report("distance ordering", c9, &mut results);
    report("pseudo-point count", c10, &mut results);
    report("mixing-matrix lemma", c11, &mut results);
    report("full-step condition", c12, &mut results);

    let failed: Vec<_> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
