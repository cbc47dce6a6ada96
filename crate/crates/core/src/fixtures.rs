//! Small synthetic feeders for tests, benchmarks and examples.

use nalgebra::Complex;
use rand::Rng;

use crate::grid::{Complex64, Der, FeederSpec, Line};

/// A path `0 - 1 - ... - (buses-1)` with identical line impedances, DERs at
/// `ders` with a `[-0.4, 0.4]` box and `[0.95, 1.05]` voltage limits.
pub fn path_feeder(buses: usize, z: Complex64, ders: &[usize]) -> FeederSpec {
    FeederSpec {
        name: format!("path-{buses}"),
        bus_count: buses,
        lines: (1..buses)
            .map(|b| Line {
                from: b - 1,
                to: b,
                impedance: z,
            })
            .collect(),
        shunts: vec![Complex::new(0.0, 0.0); buses],
        ders: ders
            .iter()
            .map(|&bus| Der {
                bus,
                q_min: -0.4,
                q_max: 0.4,
                solar_peak: 0.0,
            })
            .collect(),
        v_min: vec![0.95; buses - 1],
        v_max: vec![1.05; buses - 1],
        loads: vec![],
    }
}

/// Random radial feeder: bus `b` hangs off a uniformly chosen earlier bus,
/// `r, x ∈ [0.005, 0.05)`, and `ders` distinct DER buses.
pub fn random_radial<R: Rng>(rng: &mut R, buses: usize, ders: usize) -> FeederSpec {
    let mut spec = path_feeder(buses, Complex::new(1.0, 1.0), &[]);
    spec.name = format!("random-radial-{buses}");
    spec.lines = (1..buses)
        .map(|b| Line {
            from: rng.random_range(0..b),
            to: b,
            impedance: Complex::new(rng.random_range(0.005..0.05), rng.random_range(0.005..0.05)),
        })
        .collect();
    let mut candidates: Vec<usize> = (1..buses).collect();
    for i in 0..ders {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    spec.ders = candidates[..ders]
        .iter()
        .map(|&bus| Der {
            bus,
            q_min: -0.4,
            q_max: 0.4,
            solar_peak: 0.0,
        })
        .collect();
    spec
}
