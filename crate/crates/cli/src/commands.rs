//! One function per subcommand. Each is a pure function of the config, the
//! input files and the seed.

use std::fs;
use std::path::Path;

use log::warn;
use voltvar_core::control::{
    read_summary_csv, stepsize_bound, write_summary_csv, write_trace_csv, ControllerConfig, ControllerKind,
    DroopParams, FlowModel, LocalRule, SummaryRow, VoltageRecord,
};
use voltvar_core::dataset::{DerLimits, LocalDataset};
use voltvar_core::pipeline::{
    auto_epsilon, build_datasets, evaluation_day, reference_solutions, run_day, sub_seed, train_all, RuleBook,
};
use voltvar_core::{profiles, EquilibriumFunction, FeederSpec, SensitivityModel};

use crate::config::{alpha_label, RunConfig, StepSize};
use crate::error::{CliError, CliResult};

fn load_model(config: &RunConfig) -> CliResult<SensitivityModel> {
    let spec = FeederSpec::load(&config.feeder)?;
    Ok(SensitivityModel::from_spec(&spec)?)
}

fn write_config(config: &RunConfig, path: &Path) -> CliResult<()> {
    fs::write(path, config.to_toml())?;
    Ok(())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

pub fn profiles(config: &RunConfig) -> CliResult<()> {
    config.require_inputs(false)?;
    let spec = FeederSpec::load(&config.feeder)?;
    let model = SensitivityModel::from_spec(&spec)?;
    let day = profiles::synthesize(&spec, &model, &config.profile_config())?;
    create_dir(&config.out)?;
    let path = config.out.join("profiles.csv");
    profiles::write_csv(&path, &model, &day)?;
    write_config(config, &config.out.join("profiles.config.toml"))?;
    println!("wrote {} steps to {}", day.len(), path.display());
    Ok(())
}

pub fn build_dataset(config: &RunConfig) -> CliResult<()> {
    config.require_inputs(true)?;
    let model = load_model(config)?;
    let base = profiles::read_csv(&config.profiles, &model)?;
    let build = build_datasets(&model, &base, &config.learn_config())?;

    let dir = config.alpha_dir();
    create_dir(&dir.join("datasets"))?;
    write_config(config, &dir.join("build-dataset.config.toml"))?;
    let skip_log = dir.join("skipped.csv");
    let mut log = String::from("scenario_id,status,min_violation\n");
    for s in &build.skipped {
        log.push_str(&format!("{},{},{}\n", s.scenario, s.status, s.min_violation));
    }
    fs::write(&skip_log, log)?;

    if build.solutions.is_empty() {
        return Err(CliError::Infeasible(format!(
            "all {} scenarios have no voltage-feasible reactive dispatch; see {}",
            build.skipped.len(),
            skip_log.display()
        )));
    }
    for d in &build.datasets {
        d.validate()?;
        d.write_csv(config.dataset_path(d.der.bus))?;
    }
    let counts = build.datasets[0].counts();
    println!(
        "{}: K_eff = {} of {} scenarios, {} skipped",
        alpha_label(config.alpha),
        build.solutions.len(),
        config.scenarios,
        build.skipped.len()
    );
    for d in &build.datasets {
        println!(
            "  bus {:>3}: {} points ({} real, {} pseudo low, {} pseudo high)",
            d.der.bus,
            counts.total(),
            counts.real,
            counts.pseudo_low,
            counts.pseudo_high
        );
    }
    Ok(())
}

fn load_datasets(config: &RunConfig, model: &SensitivityModel) -> CliResult<Vec<LocalDataset>> {
    let limits = DerLimits::all(model);
    let missing: Vec<_> = limits
        .iter()
        .map(|d| config.dataset_path(d.bus))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }
    limits
        .into_iter()
        .map(|d| Ok(LocalDataset::read_csv(config.dataset_path(d.bus), d)?))
        .collect()
}

fn load_functions(config: &RunConfig, model: &SensitivityModel) -> CliResult<Vec<EquilibriumFunction>> {
    let limits = DerLimits::all(model);
    let missing: Vec<_> = limits
        .iter()
        .map(|d| config.function_path(d.bus))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }
    limits
        .into_iter()
        .map(|d| {
            let path = config.function_path(d.bus);
            let (phi, bus) = EquilibriumFunction::load(&path)?;
            if bus.is_some_and(|b| b != d.bus) || phi.q_min() != d.q_min || phi.q_max() != d.q_max {
                return Err(CliError::Input(format!(
                    "{} does not belong to the DER at bus {}",
                    path.display(),
                    d.bus
                )));
            }
            Ok(phi)
        })
        .collect()
}

pub fn train(config: &RunConfig) -> CliResult<()> {
    config.require_inputs(false)?;
    let model = load_model(config)?;
    let datasets = load_datasets(config, &model)?;
    let learn = config.learn_config();
    let trained = train_all(&datasets, learn.hidden, &learn.train, learn.seed)?;

    // round-trip every function through its file format before writing any
    let mut texts = Vec::with_capacity(datasets.len());
    for (d, phi) in datasets.iter().zip(&trained.functions) {
        let text = phi.to_text(Some(d.der.bus));
        match EquilibriumFunction::from_text(&text) {
            Ok((back, _)) if &back == phi => texts.push(text),
            Ok(_) => return Err(CliError::Numerical(format!("bus {}: function does not survive a round trip", d.der.bus))),
            Err(e) => return Err(CliError::Numerical(format!("bus {}: {e}", d.der.bus))),
        }
    }
    let dir = config.alpha_dir();
    create_dir(&dir.join("functions"))?;
    for (d, text) in datasets.iter().zip(&texts) {
        fs::write(config.function_path(d.der.bus), text)?;
    }
    let mut report = String::from("bus,mse,lipschitz\n");
    for ((d, phi), mse) in datasets.iter().zip(&trained.functions).zip(&trained.mse) {
        report.push_str(&format!("{},{},{}\n", d.der.bus, mse, phi.lipschitz()));
    }
    fs::write(dir.join("train_report.csv"), report)?;
    write_config(config, &dir.join("train.config.toml"))?;

    println!("{}: trained {} functions (H = {})", alpha_label(config.alpha), datasets.len(), learn.hidden);
    for ((d, phi), mse) in datasets.iter().zip(&trained.functions).zip(&trained.mse) {
        println!("  bus {:>3}: mse {:.6e}  L {:.4}", d.der.bus, mse, phi.lipschitz());
    }
    let l = trained.lipschitz();
    let bound = stepsize_bound(model.x_norm, l);
    println!("L = {l:.4}, |X| = {:.6}, epsilon_max = {bound:.6e}", model.x_norm);
    let book = RuleBook::new(&datasets, trained.functions, learn.droop_resolution)?;
    for (kind, loss) in book.losses(&datasets)? {
        println!("  avg_loss {kind:<16} {loss:.6e}");
    }
    Ok(())
}

fn load_rules(config: &RunConfig, model: &SensitivityModel, kind: ControllerKind) -> CliResult<Vec<LocalRule>> {
    Ok(match kind {
        ControllerKind::Incremental | ControllerKind::NonIncremental => {
            load_functions(config, model)?.into_iter().map(LocalRule::Learned).collect()
        }
        ControllerKind::DroopStandard => DerLimits::all(model)
            .into_iter()
            .map(|d| Ok(LocalRule::Standard(DroopParams::new(d.q_min, d.q_max, d.v_min, d.v_max)?)))
            .collect::<CliResult<_>>()?,
        ControllerKind::DroopOptimized => {
            let datasets = load_datasets(config, model)?;
            voltvar_core::control::optimize_droop_params(&datasets, config.control.droop_resolution)?
                .into_iter()
                .map(LocalRule::Optimized)
                .collect()
        }
        ControllerKind::None => vec![LocalRule::Zero; model.der_count()],
    })
}

pub fn bound(config: &RunConfig) -> CliResult<()> {
    config.require_inputs(false)?;
    let model = load_model(config)?;
    let kind = config.controller()?;
    let rules = load_rules(config, &model, kind)?;
    let buses = DerLimits::all(&model);
    let l = voltvar_core::control::max_lipschitz(&rules);
    let bound = stepsize_bound(model.x_norm, l);
    let product = model.x_norm * l;
    let full_step = product < std::f64::consts::SQRT_2 - 1.0;

    let mut text = format!(
        "controller = \"{kind}\"\nx_norm = {}\nlipschitz = {l}\nx_norm_times_l = {product}\nepsilon_max = {bound}\nepsilon_auto = {}\nfull_step_stable = {full_step}\n\n[per_der]\n",
        model.x_norm,
        0.9 * bound
    );
    for (d, r) in buses.iter().zip(&rules) {
        text.push_str(&format!("bus_{} = {}\n", d.bus, r.lipschitz()));
    }
    create_dir(&config.alpha_dir())?;
    fs::write(config.alpha_dir().join(format!("bound_{kind}.toml")), &text)?;

    println!("{} {kind}", alpha_label(config.alpha));
    for (d, r) in buses.iter().zip(&rules) {
        println!("  bus {:>3}: L_n = {:.6}", d.bus, r.lipschitz());
    }
    println!("  |X| = {:.6}, L = {l:.6}, |X|L = {product:.6}", model.x_norm);
    println!("  epsilon_max = {bound:.6e}, auto epsilon = {:.6e}", 0.9 * bound);
    if full_step {
        println!("  |X|L < sqrt(2) - 1: the full step epsilon = 1 is stable");
    }
    Ok(())
}

pub fn simulate(config: &RunConfig) -> CliResult<()> {
    config.require_inputs(true)?;
    let model = load_model(config)?;
    let kind = config.controller()?;
    let flow = config.flow()?;
    let rules = load_rules(config, &model, kind)?;
    let epsilon = match config.control.epsilon {
        StepSize::Auto => auto_epsilon(&model, &rules),
        StepSize::Fixed(e) => e,
    };
    let controller = ControllerConfig {
        epsilon,
        iterations: config.control.iterations,
        flow,
        noise: config.control.noise,
        kind,
        seed: sub_seed(config.seed, "measurement-noise"),
        record: if config.control.trace_stride == 0 {
            VoltageRecord::LastStep
        } else {
            VoltageRecord::EveryStep
        },
    };
    controller.check()?;

    let learn = config.learn_config();
    let base = profiles::read_csv(&config.profiles, &model)?;
    let day = evaluation_day(&base, &learn)?;
    let references = reference_solutions(&model, &day, config.alpha, learn.orpf)?;
    if references.len() < day.len() {
        warn!(
            "{} of {} scenarios have no feasible reference and are not scored",
            day.len() - references.len(),
            day.len()
        );
    }
    let run = run_day(&model, &rules, &controller, &day, &references, config.alpha)?;

    let dir = config.run_dir(kind, flow, config.control.noise);
    create_dir(&dir)?;
    let stride = match config.control.trace_stride {
        0 => None,
        k => Some(k),
    };
    write_trace_csv(dir.join("trace.csv"), &model, &run.traces, stride)?;
    write_summary_csv(dir.join("summary.csv"), std::slice::from_ref(&run.summary))?;
    write_config(config, &dir.join("config.toml"))?;

    let s = &run.summary;
    println!(
        "{} {kind} {flow} noise {} epsilon {:.6e}: distance {:.6e}, {} of {} converged, {} oscillating, {} flow failures, max violation {:.3e}",
        alpha_label(config.alpha),
        s.noise,
        s.epsilon,
        s.avg_distance,
        s.converged,
        s.scenarios,
        s.oscillating,
        s.flow_failures,
        s.max_violation
    );
    if s.oscillating > 0 {
        println!("warning: divergence detected in {} scenarios", s.oscillating);
    }
    Ok(())
}

fn summaries(config: &RunConfig) -> CliResult<Vec<SummaryRow>> {
    let mut rows = vec![];
    let Ok(entries) = fs::read_dir(&config.out) else {
        return Ok(rows);
    };
    let mut alpha_dirs: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("alpha_")))
        .collect();
    alpha_dirs.sort();
    for dir in alpha_dirs {
        let Ok(runs) = fs::read_dir(dir.join("runs")) else {
            continue;
        };
        let mut runs: Vec<_> = runs.filter_map(|e| e.ok().map(|e| e.path().join("summary.csv"))).collect();
        runs.sort();
        for path in runs.into_iter().filter(|p| p.is_file()) {
            rows.extend(read_summary_csv(&path)?);
        }
    }
    Ok(rows)
}

pub fn evaluate(config: &RunConfig) -> CliResult<()> {
    let flow: FlowModel = match &config.evaluate.flow {
        Some(f) => f.parse().map_err(|e: voltvar_core::Error| CliError::Config(e.to_string()))?,
        None => config.flow()?,
    };
    let alphas = if config.evaluate.alphas.is_empty() {
        vec![config.alpha]
    } else {
        config.evaluate.alphas.clone()
    };
    let kinds: Vec<ControllerKind> = config
        .evaluate
        .controllers
        .iter()
        .map(|c| c.parse().map_err(|e: voltvar_core::Error| CliError::Config(e.to_string())))
        .collect::<CliResult<_>>()?;
    let rows = summaries(config)?;

    let columns: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|a| config.evaluate.noise_levels.iter().map(move |n| (*a, *n)))
        .collect();
    let mut table = vec![vec![f64::NAN; columns.len()]; kinds.len()];
    let mut missing = vec![];
    for (i, kind) in kinds.iter().enumerate() {
        for (j, (alpha, noise)) in columns.iter().enumerate() {
            let found = rows.iter().find(|r| {
                r.controller == kind.name()
                    && r.flow == flow.to_string()
                    && alpha_label(r.alpha) == alpha_label(*alpha)
                    && (r.noise - noise).abs() < 1e-12
            });
            match found {
                Some(r) => table[i][j] = r.avg_distance,
                None => missing.push(
                    RunConfig {
                        alpha: *alpha,
                        ..config.clone()
                    }
                    .run_dir(*kind, flow, *noise)
                    .join("summary.csv"),
                ),
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }

    let labels: Vec<String> = columns
        .iter()
        .map(|(a, n)| format!("alpha={a:.4} noise={n:.4}"))
        .collect();
    let mut csv = String::from("controller");
    for l in &labels {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for (kind, values) in kinds.iter().zip(&table) {
        csv.push_str(kind.name());
        for v in values {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    create_dir(&config.out)?;
    fs::write(config.out.join("evaluation.csv"), csv)?;
    write_config(config, &config.out.join("evaluate.config.toml"))?;

    println!("average distance to the ORPF optimum ({flow} flow; * marks the column minimum)");
    print!("{:<16}", "controller");
    for l in &labels {
        print!(" {l:>26}");
    }
    println!();
    for (i, kind) in kinds.iter().enumerate() {
        print!("{:<16}", kind.name());
        for (j, v) in table[i].iter().enumerate() {
            let best = table.iter().all(|row| row[j] >= *v);
            print!(" {:>25.6e}{}", v, if best { "*" } else { " " });
        }
        println!();
    }
    Ok(())
}
