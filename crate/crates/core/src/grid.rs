//! Feeder description, bus admittance matrix and the linear voltage
//! sensitivity model.
//!
//! Conventions: everything is per-unit, bus `0` is the substation (slack,
//! `u₀ = 1∠0`), and vectors indexed "per bus" cover the non-substation buses
//! `1..=N` at positions `0..N`.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub type Complex64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub impedance: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Der {
    pub bus: usize,
    pub q_min: f64,
    pub q_max: f64,
    /// Peak active generation used when synthesizing profiles (p.u.).
    pub solar_peak: f64,
}

/// Nominal consumption of a load bus, used to synthesize profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalLoad {
    pub bus: usize,
    /// Active consumption (positive, p.u.).
    pub p: f64,
    pub power_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederSpec {
    pub name: String,
    /// Number of buses including the substation.
    pub bus_count: usize,
    pub lines: Vec<Line>,
    /// Shunt admittance per bus, substation included (length `bus_count`).
    pub shunts: Vec<Complex64>,
    /// DERs in the order that defines the `C` indexing.
    pub ders: Vec<Der>,
    /// Voltage bounds for buses `1..=N` (length `N`).
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    pub loads: Vec<NominalLoad>,
}

impl FeederSpec {
    /// Number of non-substation buses.
    pub fn n(&self) -> usize {
        self.bus_count - 1
    }

    pub fn der_buses(&self) -> Vec<usize> {
        self.ders.iter().map(|d| d.bus).collect()
    }

    /// Non-DER buses in ascending order; this is the `L` ordering of `q_L`.
    pub fn load_buses(&self) -> Vec<usize> {
        let ders: BTreeSet<usize> = self.ders.iter().map(|d| d.bus).collect();
        (1..self.bus_count).filter(|b| !ders.contains(b)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bus_count < 2 {
            return Err(Error::Feeder("need at least two buses".into()));
        }
        let n = self.n();
        for (i, line) in self.lines.iter().enumerate() {
            if line.from >= self.bus_count || line.to >= self.bus_count {
                return Err(Error::Feeder(format!(
                    "line {i} references bus outside 0..{}",
                    self.bus_count
                )));
            }
            if line.from == line.to {
                return Err(Error::Feeder(format!("line {i} is a self loop")));
            }
            let z = line.impedance;
            if !(z.re.is_finite() && z.im.is_finite()) || z.norm() == 0.0 {
                return Err(Error::Feeder(format!(
                    "line {i} ({}-{}) has zero or non-finite impedance",
                    line.from, line.to
                )));
            }
        }
        if self.shunts.len() != self.bus_count {
            return Err(Error::Dimension {
                context: "shunts",
                expected: self.bus_count,
                got: self.shunts.len(),
            });
        }
        if self.v_min.len() != n || self.v_max.len() != n {
            return Err(Error::Dimension {
                context: "voltage limits",
                expected: n,
                got: self.v_min.len().min(self.v_max.len()),
            });
        }
        for (i, (lo, hi)) in self.v_min.iter().zip(&self.v_max).enumerate() {
            if !(*lo < 1.0 && 1.0 < *hi) {
                return Err(Error::Feeder(format!(
                    "bus {} voltage limits [{lo}, {hi}] must straddle 1 p.u.",
                    i + 1
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for der in &self.ders {
            if der.bus == 0 || der.bus >= self.bus_count {
                return Err(Error::Feeder(format!(
                    "DER bus {} must be in 1..{}",
                    der.bus,
                    self.bus_count - 1
                )));
            }
            if !seen.insert(der.bus) {
                return Err(Error::Feeder(format!("duplicate DER at bus {}", der.bus)));
            }
            if !(der.q_min <= 0.0 && 0.0 <= der.q_max) {
                return Err(Error::Feeder(format!(
                    "DER at bus {} needs q_min <= 0 <= q_max, got [{}, {}]",
                    der.bus, der.q_min, der.q_max
                )));
            }
        }
        if self.ders.is_empty() {
            return Err(Error::Feeder("no DER buses".into()));
        }
        for load in &self.loads {
            if load.bus == 0 || load.bus >= self.bus_count {
                return Err(Error::Feeder(format!("load bus {} out of range", load.bus)));
            }
            if !(load.power_factor > 0.0 && load.power_factor <= 1.0) {
                return Err(Error::Feeder(format!(
                    "load at bus {} has power factor {}",
                    load.bus, load.power_factor
                )));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let mut adjacency = vec![Vec::new(); self.bus_count];
        for line in &self.lines {
            adjacency[line.from].push(line.to);
            adjacency[line.to].push(line.from);
        }
        let mut reached = vec![false; self.bus_count];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(bus) = queue.pop_front() {
            for &next in &adjacency[bus] {
                if !reached[next] {
                    reached[next] = true;
                    queue.push_back(next);
                }
            }
        }
        let unreachable: Vec<usize> = (0..self.bus_count).filter(|&b| !reached[b]).collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::Feeder(format!(
                "graph is disconnected; buses unreachable from the substation: {unreachable:?}"
            )))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FeederFile =
            toml::from_str(text).map_err(|e| Error::Feeder(format!("parse error: {e}")))?;
        let spec = file.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Feeder(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = FeederFile::from_spec(self);
        toml::to_string(&file).expect("feeder serializes")
    }
}

// On-disk layout of the feeder file.
#[derive(Debug, Serialize, Deserialize)]
struct FeederFile {
    #[serde(default)]
    name: String,
    buses: BusesSection,
    limits: LimitsSection,
    lines: Vec<LineRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    shunts: Vec<ShuntRow>,
    ders: Vec<DerRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    loads: Vec<LoadRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BusesSection {
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LimitsSection {
    vmin: f64,
    vmax: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<LimitOverride>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LimitOverride {
    bus: usize,
    vmin: f64,
    vmax: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    from: usize,
    to: usize,
    r: f64,
    x: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShuntRow {
    bus: usize,
    #[serde(default)]
    g: f64,
    #[serde(default)]
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DerRow {
    bus: usize,
    qmin: f64,
    qmax: f64,
    #[serde(default)]
    solar: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoadRow {
    bus: usize,
    p: f64,
    #[serde(default = "default_pf")]
    pf: f64,
}

fn default_pf() -> f64 {
    1.0
}

impl FeederFile {
    fn into_spec(self) -> Result<FeederSpec> {
        let count = self.buses.count;
        if count < 2 {
            return Err(Error::Feeder("need at least two buses".into()));
        }
        let mut shunts = vec![Complex64::new(0.0, 0.0); count];
        for row in &self.shunts {
            if row.bus >= count {
                return Err(Error::Feeder(format!("shunt bus {} out of range", row.bus)));
            }
            shunts[row.bus] += Complex64::new(row.g, row.b);
        }
        let mut v_min = vec![self.limits.vmin; count - 1];
        let mut v_max = vec![self.limits.vmax; count - 1];
        for o in &self.limits.overrides {
            if o.bus == 0 || o.bus >= count {
                return Err(Error::Feeder(format!("limit override bus {} out of range", o.bus)));
            }
            v_min[o.bus - 1] = o.vmin;
            v_max[o.bus - 1] = o.vmax;
        }
        Ok(FeederSpec {
            name: self.name,
            bus_count: count,
            lines: self
                .lines
                .into_iter()
                .map(|l| Line {
                    from: l.from,
                    to: l.to,
                    impedance: Complex64::new(l.r, l.x),
                })
                .collect(),
            shunts,
            ders: self
                .ders
                .into_iter()
                .map(|d| Der {
                    bus: d.bus,
                    q_min: d.qmin,
                    q_max: d.qmax,
                    solar_peak: d.solar,
                })
                .collect(),
            v_min,
            v_max,
            loads: self
                .loads
                .into_iter()
                .map(|l| NominalLoad {
                    bus: l.bus,
                    p: l.p,
                    power_factor: l.pf,
                })
                .collect(),
        })
    }

    fn from_spec(spec: &FeederSpec) -> Self {
        let vmin = spec.v_min.first().copied().unwrap_or(0.95);
        let vmax = spec.v_max.first().copied().unwrap_or(1.05);
        let overrides = spec
            .v_min
            .iter()
            .zip(&spec.v_max)
            .enumerate()
            .filter(|(_, (lo, hi))| **lo != vmin || **hi != vmax)
            .map(|(i, (lo, hi))| LimitOverride {
                bus: i + 1,
                vmin: *lo,
                vmax: *hi,
            })
            .collect();
        FeederFile {
            name: spec.name.clone(),
            buses: BusesSection {
                count: spec.bus_count,
            },
            limits: LimitsSection {
                vmin,
                vmax,
                overrides,
            },
            lines: spec
                .lines
                .iter()
                .map(|l| LineRow {
                    from: l.from,
                    to: l.to,
                    r: l.impedance.re,
                    x: l.impedance.im,
                })
                .collect(),
            shunts: spec
                .shunts
                .iter()
                .enumerate()
                .filter(|(_, y)| y.norm() != 0.0)
                .map(|(bus, y)| ShuntRow {
                    bus,
                    g: y.re,
                    b: y.im,
                })
                .collect(),
            ders: spec
                .ders
                .iter()
                .map(|d| DerRow {
                    bus: d.bus,
                    qmin: d.q_min,
                    qmax: d.q_max,
                    solar: d.solar_peak,
                })
                .collect(),
            loads: spec
                .loads
                .iter()
                .map(|l| LoadRow {
                    bus: l.bus,
                    p: l.p,
                    pf: l.power_factor,
                })
                .collect(),
        }
    }
}

/// Bus admittance matrix `Y = Y_L + diag(y_T)` of size `(N+1)×(N+1)`.
pub fn build_admittance(spec: &FeederSpec) -> Result<DMatrix<Complex64>> {
    spec.validate()?;
    let size = spec.bus_count;
    let mut y = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for line in &spec.lines {
        let admittance = line.impedance.inv();
        let (m, n) = (line.from, line.to);
        y[(m, m)] += admittance;
        y[(n, n)] += admittance;
        y[(m, n)] -= admittance;
        y[(n, m)] -= admittance;
    }
    for (bus, shunt) in spec.shunts.iter().enumerate() {
        y[(bus, bus)] += shunt;
    }
    Ok(y)
}

/// Linearized voltage model `v = R̃p + X̃q + |û|` and its DER/load blocks.
///
/// Full `N×N` matrices are kept in bus order. The `C`/`L` partition is
/// recorded through `der_pos`/`load_pos` (positions into the bus-ordered
/// vectors) and the extracted blocks.
#[derive(Debug, Clone)]
pub struct SensitivityModel {
    pub n: usize,
    pub ytilde: DMatrix<Complex64>,
    pub ztilde: DMatrix<Complex64>,
    pub rtilde: DMatrix<f64>,
    pub xtilde: DMatrix<f64>,
    /// Zero-injection voltage `û = −Z̃y₀`.
    pub u_hat: DVector<Complex64>,
    pub u_hat_mag: DVector<f64>,
    pub der_pos: Vec<usize>,
    pub load_pos: Vec<usize>,
    /// `C×C` blocks.
    pub r: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// `C×L` blocks.
    pub r_l: DMatrix<f64>,
    pub x_l: DMatrix<f64>,
    /// `L×L` blocks.
    pub r_ll: DMatrix<f64>,
    pub x_ll: DMatrix<f64>,
    /// `‖X‖₂`.
    pub x_norm: f64,
    pub q_min: DVector<f64>,
    pub q_max: DVector<f64>,
    pub v_min: DVector<f64>,
    pub v_max: DVector<f64>,
}

pub fn derive_sensitivity(y: &DMatrix<Complex64>, spec: &FeederSpec) -> Result<SensitivityModel> {
    let size = spec.bus_count;
    if y.nrows() != size || y.ncols() != size {
        return Err(Error::Dimension {
            context: "admittance matrix",
            expected: size,
            got: y.nrows(),
        });
    }
    let n = size - 1;
    let ytilde = y.view((1, 1), (n, n)).into_owned();
    let y0 = y.view((1, 0), (n, 1)).column(0).into_owned();
    let inverse = linalg::invert(&ytilde, "substation-reduced admittance")?;
    // Ỹ is complex symmetric, so its inverse is too; remove rounding asymmetry
    let ztilde = (&inverse + inverse.transpose()).map(|z| z * 0.5);
    let u_hat = -(&ztilde * y0);
    let u_hat_mag = u_hat.map(|u| u.norm());
    let rtilde = ztilde.map(|z| z.re);
    let xtilde = ztilde.map(|z| z.im);

    let der_pos: Vec<usize> = spec.ders.iter().map(|d| d.bus - 1).collect();
    let load_pos: Vec<usize> = spec.load_buses().iter().map(|b| b - 1).collect();
    let block = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    };
    let x = block(&xtilde, &der_pos, &der_pos);
    let x_norm = linalg::spectral_norm(&x)?;
    Ok(SensitivityModel {
        n,
        r: block(&rtilde, &der_pos, &der_pos),
        r_l: block(&rtilde, &der_pos, &load_pos),
        r_ll: block(&rtilde, &load_pos, &load_pos),
        x_l: block(&xtilde, &der_pos, &load_pos),
        x_ll: block(&xtilde, &load_pos, &load_pos),
        x,
        x_norm,
        ytilde,
        ztilde,
        rtilde,
        xtilde,
        u_hat,
        u_hat_mag,
        q_min: DVector::from_iterator(spec.ders.len(), spec.ders.iter().map(|d| d.q_min)),
        q_max: DVector::from_iterator(spec.ders.len(), spec.ders.iter().map(|d| d.q_max)),
        v_min: DVector::from_column_slice(&spec.v_min),
        v_max: DVector::from_column_slice(&spec.v_max),
        der_pos,
        load_pos,
    })
}

impl SensitivityModel {
    /// Convenience: admittance plus sensitivity derivation.
    pub fn from_spec(spec: &FeederSpec) -> Result<Self> {
        let y = build_admittance(spec)?;
        derive_sensitivity(&y, spec)
    }

    pub fn der_count(&self) -> usize {
        self.der_pos.len()
    }

    pub fn load_count(&self) -> usize {
        self.load_pos.len()
    }

    /// The `N×C` map from DER reactive injections to all bus voltages,
    /// i.e. `[X; X_Lᵀ]` laid out in bus order.
    pub fn voltage_map(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.der_count(), |i, j| self.xtilde[(i, self.der_pos[j])])
    }

    /// Scatters `q_C` and `q_L` into a bus-ordered reactive injection vector.
    pub fn assemble_q(&self, q_c: &DVector<f64>, q_l: &DVector<f64>) -> DVector<f64> {
        let mut q = DVector::zeros(self.n);
        for (k, &pos) in self.der_pos.iter().enumerate() {
            q[pos] = q_c[k];
        }
        for (k, &pos) in self.load_pos.iter().enumerate() {
            q[pos] = q_l[k];
        }
        q
    }

    pub fn der_entries(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.der_count(), self.der_pos.iter().map(|&p| v[p]))
    }

    /// Rebuilds `R̃` and `X̃` from the partition blocks alone.
    pub fn reassemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut r = DMatrix::zeros(self.n, self.n);
        let mut x = DMatrix::zeros(self.n, self.n);
        let c = &self.der_pos;
        let l = &self.load_pos;
        for i in 0..c.len() {
            for j in 0..c.len() {
                r[(c[i], c[j])] = self.r[(i, j)];
                x[(c[i], c[j])] = self.x[(i, j)];
            }
            for j in 0..l.len() {
                r[(c[i], l[j])] = self.r_l[(i, j)];
                r[(l[j], c[i])] = self.r_l[(i, j)];
                x[(c[i], l[j])] = self.x_l[(i, j)];
                x[(l[j], c[i])] = self.x_l[(i, j)];
            }
        }
        for i in 0..l.len() {
            for j in 0..l.len() {
                r[(l[i], l[j])] = self.r_ll[(i, j)];
                x[(l[i], l[j])] = self.x_ll[(i, j)];
            }
        }
        (r, x)
    }

    /// Whether `q` lies in the reactive box `Q`.
    pub fn in_box(&self, q: &DVector<f64>) -> bool {
        q.iter()
            .zip(self.q_min.iter().zip(self.q_max.iter()))
            .all(|(q, (lo, hi))| *lo <= *q && *q <= *hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{path_feeder, random_radial};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Independent assembly: incidence-matrix form A·diag(y)·Aᵀ.
    fn stamped_by_incidence(spec: &FeederSpec) -> DMatrix<Complex64> {
        let m = spec.lines.len();
        let mut a = DMatrix::from_element(spec.bus_count, m, c(0.0, 0.0));
        let mut d = DMatrix::from_element(m, m, c(0.0, 0.0));
        for (k, line) in spec.lines.iter().enumerate() {
            a[(line.from, k)] = c(1.0, 0.0);
            a[(line.to, k)] = c(-1.0, 0.0);
            d[(k, k)] = c(1.0, 0.0) / line.impedance;
        }
        let mut y = &a * d * a.transpose();
        for (b, s) in spec.shunts.iter().enumerate() {
            y[(b, b)] += s;
        }
        y
    }

    #[test]
    fn two_bus_single_line() {
        let spec = path_feeder(2, c(0.0, 1.0), &[1]);
        let y = build_admittance(&spec).unwrap();
        assert_eq!(y[(0, 0)], c(0.0, -1.0));
        assert_eq!(y[(0, 1)], c(0.0, 1.0));
        assert_eq!(y[(1, 0)], c(0.0, 1.0));
        assert_eq!(y[(1, 1)], c(0.0, -1.0));
    }

    #[test]
    fn shunt_adds_to_diagonal() {
        let mut spec = path_feeder(2, c(0.0, 1.0), &[1]);
        spec.shunts[1] = c(0.0, 0.1);
        let y = build_admittance(&spec).unwrap();
        assert_relative_eq!(y[(1, 1)].im, -1.0 + 0.1, epsilon = 1e-15);
        assert_eq!(y[(1, 1)].re, 0.0);
    }

    #[test]
    fn three_bus_path_matches_incidence_stamping() {
        let spec = path_feeder(3, c(0.1, 0.2), &[2]);
        let y = build_admittance(&spec).unwrap();
        let oracle = stamped_by_incidence(&spec);
        assert!((y - oracle).norm() < 1e-12);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let spec = path_feeder(6, c(0.01, 0.02), &[3, 5]);
        let y = build_admittance(&spec).unwrap();
        for row in y.row_iter() {
            assert!(row.iter().sum::<Complex64>().norm() < 1e-10);
        }
        assert!((&y - y.transpose()).norm() < 1e-12);
    }

    #[test]
    fn disconnected_graph_names_component() {
        let mut spec = path_feeder(4, c(0.1, 0.1), &[1]);
        spec.lines.retain(|l| l.to != 2);
        let err = build_admittance(&spec).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn zero_impedance_rejected() {
        let spec = path_feeder(3, c(0.0, 0.0), &[1]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bad_limits_rejected() {
        let mut spec = path_feeder(3, c(0.1, 0.1), &[1]);
        spec.v_max[0] = 0.99;
        assert!(spec.validate().is_err());
        let mut spec = path_feeder(3, c(0.1, 0.1), &[1]);
        spec.ders[0].q_min = 0.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn two_bus_scalar_sensitivity() {
        let (r, x) = (0.03, 0.07);
        let spec = path_feeder(2, c(r, x), &[1]);
        let model = SensitivityModel::from_spec(&spec).unwrap();
        assert_relative_eq!(model.x[(0, 0)], x, max_relative = 1e-12);
        assert_relative_eq!(model.r[(0, 0)], r, max_relative = 1e-12);
        assert_relative_eq!(model.x_norm, x, max_relative = 1e-12);
    }

    #[test]
    fn shunt_free_zero_injection_voltage_is_nominal() {
        let spec = path_feeder(5, c(0.02, 0.03), &[2, 4]);
        let model = SensitivityModel::from_spec(&spec).unwrap();
        for (u, mag) in model.u_hat.iter().zip(model.u_hat_mag.iter()) {
            assert!((mag - 1.0).abs() < 1e-9);
            assert!(u.im.abs() < 1e-9);
        }
        let prod = &model.ztilde * &model.ytilde;
        assert!((prod - DMatrix::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn random_radial_sensitivity_is_positive_definite_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let spec = random_radial(&mut rng, 11, 4);
            let model = SensitivityModel::from_spec(&spec).unwrap();
            assert!(linalg::min_eigenvalue(&model.x) > 0.0);
            let scale = model.xtilde.norm();
            assert!((&model.xtilde - model.xtilde.transpose()).norm() <= 1e-10 * scale);
            assert!((&model.rtilde - model.rtilde.transpose()).norm() <= 1e-10 * scale);
            let (r, x) = model.reassemble();
            assert_eq!(r, model.rtilde);
            assert_eq!(x, model.xtilde);
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut spec = path_feeder(4, c(0.01, 0.02), &[3]);
        spec.shunts[2] = c(0.0, 0.01);
        spec.loads.push(NominalLoad {
            bus: 2,
            p: 0.1,
            power_factor: 0.9,
        });
        spec.v_min[1] = 0.9;
        let text = spec.to_toml_string();
        let back = FeederSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
