use std::path::Path;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voltvar_core::control::{
    closed_loop_voltage_map, simulate, stepsize_bound, ControllerConfig, ControllerKind, LocalRule, VoltageRecord,
};
use voltvar_core::dataset::{DataPoint, DerLimits, LocalDataset};
use voltvar_core::fixtures::random_radial;
use voltvar_core::linalg::spectral_norm;
use voltvar_core::monotone::{lipschitz_constant, restore_feasibility, Network};
use voltvar_core::{EquilibriumFunction, FeederSpec, PointKind, Scenario, SensitivityModel};

fn bundled() -> SensitivityModel {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ieee37_style.toml");
    SensitivityModel::from_spec(&FeederSpec::load(path).unwrap()).unwrap()
}

/// Sorted biases in `[0.85, 1.15]`, arbitrary-sign weights, then restored.
fn network(hidden: std::ops::Range<usize>, scale: f64) -> impl Strategy<Value = Network> {
    hidden
        .prop_flat_map(move |h| {
            (
                prop::collection::vec(0.85..1.15f64, h),
                prop::collection::vec(-scale..scale * 0.3, h),
                -0.5..0.5f64,
            )
        })
        .prop_map(|(mut biases, weights, beta)| {
            biases.sort_by(f64::total_cmp);
            let mut n = Network { biases, weights, beta };
            restore_feasibility(&mut n);
            n
        })
}

fn rule(n: Network, q_min: f64, q_max: f64) -> LocalRule {
    LocalRule::Learned(EquilibriumFunction::new(n, q_min, q_max).unwrap())
}

fn spd(c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, c * c).prop_map(move |a| {
        let a = DMatrix::from_vec(c, c, a);
        &a * a.transpose() + DMatrix::identity(c, c) * 1e-3
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restored_networks_are_monotone(mut n in network(1..40, 50.0)) {
        prop_assert!(n.is_nonincreasing());
        let before = n.clone();
        restore_feasibility(&mut n);
        prop_assert_eq!(n, before);
    }

    #[test]
    fn evaluation_is_monotone_clamped_and_lipschitz(n in network(1..40, 50.0), lo in -0.5..0.0f64, width in 0.0..1.0f64) {
        let l = lipschitz_constant(&n);
        let phi = EquilibriumFunction::new(n, lo, lo + width).unwrap();
        let grid: Vec<f64> = (0..=3000).map(|k| 0.8 + 0.4 * k as f64 / 3000.0).collect();
        let values: Vec<f64> = grid.iter().map(|v| phi.evaluate(*v)).collect();
        for (i, w) in values.windows(2).enumerate() {
            prop_assert!(w[1] <= w[0]);
            let slope = (w[0] - w[1]) / (grid[i + 1] - grid[i]);
            prop_assert!(slope <= l * (1.0 + 1e-9) + 1e-9);
        }
        prop_assert!(values.iter().all(|q| *q >= lo && *q <= lo + width));
    }

    #[test]
    fn mixing_is_nonnegative_and_bounded(x in spd(4), m in prop::collection::vec(0.0..1.0f64, 4), l in 0.1..100.0f64) {
        let m = DMatrix::from_diagonal(&DVector::from_iterator(4, m.iter().map(|t| t * l)));
        let xm = &x * &m;
        for e in xm.complex_eigenvalues().iter() {
            prop_assert!(e.re >= -1e-9 * (1.0 + l));
            prop_assert!(e.im.abs() <= 1e-7 * (1.0 + l));
        }
        let bound = spectral_norm(&x).unwrap() * l;
        prop_assert!(spectral_norm(&xm).unwrap() <= bound + 1e-9 * (1.0 + bound));
    }

    #[test]
    fn dataset_csv_round_trip(points in prop::collection::vec((0.8..1.2f64, -0.4..=0.4f64, prop::option::of(0usize..5000)), 0..60)) {
        let der = DerLimits { bus: 7, q_min: -0.4, q_max: 0.4, v_min: 0.95, v_max: 1.05 };
        let mut d = LocalDataset::new(der);
        d.points = points
            .into_iter()
            .map(|(v, q, scenario)| DataPoint { v, q, kind: PointKind::Real, scenario })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.write_csv(&path).unwrap();
        prop_assert_eq!(LocalDataset::read_csv(&path, der).unwrap(), d);
    }

    #[test]
    fn iterates_never_leave_the_box(seed in any::<u64>(), ders in 1usize..5, epsilon in 0.01..=1.0f64, start in prop::collection::vec(0.0..=1.0f64, 5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_radial(&mut rng, 8, ders);
        let model = SensitivityModel::from_spec(&spec).unwrap();
        let c = model.der_count();
        let rules: Vec<LocalRule> = (0..c)
            .map(|k| {
                let n = Network { biases: vec![0.95, 1.0], weights: vec![-20.0, -30.0], beta: 0.3 };
                rule(n, model.q_min[k], model.q_max[k])
            })
            .collect();
        let q0 = DVector::from_fn(c, |k, _| model.q_min[k] + start[k] * (model.q_max[k] - model.q_min[k]));
        let scenario = Scenario::zero(&model);
        let config = ControllerConfig {
            epsilon,
            iterations: 50,
            kind: ControllerKind::Incremental,
            noise: 0.01,
            seed,
            record: VoltageRecord::EveryStep,
            ..ControllerConfig::default()
        };
        let traces = simulate(&model, &rules, &config, &[scenario], &q0).unwrap();
        for q in &traces[0].q_history {
            prop_assert!(model.in_box(q));
        }
    }

    #[test]
    fn closed_loop_map_contracts_on_bundled_feeder(
        nets in prop::collection::vec(network(1..30, 400.0), 5),
        v1 in prop::collection::vec(0.9..1.1f64, 5),
        v2 in prop::collection::vec(0.9..1.1f64, 5),
    ) {
        let model = bundled();
        let rules: Vec<LocalRule> = nets
            .into_iter()
            .enumerate()
            .map(|(k, n)| rule(n, model.q_min[k], model.q_max[k]))
            .collect();
        let l = rules.iter().map(LocalRule::lipschitz).fold(0.0, f64::max);
        let epsilon = 0.9 * stepsize_bound(model.x_norm, l);
        let v_hat = DVector::from_element(5, 1.0);
        let (a, b) = (DVector::from_vec(v1), DVector::from_vec(v2));
        let ga = closed_loop_voltage_map(&model, &rules, &v_hat, epsilon, &a);
        let gb = closed_loop_voltage_map(&model, &rules, &v_hat, epsilon, &b);
        let gap = (&a - &b).norm();
        prop_assert!((ga - gb).norm() <= gap * (1.0 + 1e-12));
    }
}
