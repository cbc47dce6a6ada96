//! AC power flow (Z-bus fixed point) and the linearized voltage model.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::{Complex64, SensitivityModel};

/// One load/generation condition. Injections are positive, consumption is
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    /// Active injections of buses `1..=N`, bus order.
    pub p: DVector<f64>,
    /// Reactive injections of the load buses, in `SensitivityModel::load_pos` order.
    pub q_l: DVector<f64>,
}

impl Scenario {
    pub fn check(&self, model: &SensitivityModel) -> Result<()> {
        if self.p.len() != model.n {
            return Err(Error::Dimension {
                context: "scenario p",
                expected: model.n,
                got: self.p.len(),
            });
        }
        if self.q_l.len() != model.load_count() {
            return Err(Error::Dimension {
                context: "scenario q_L",
                expected: model.load_count(),
                got: self.q_l.len(),
            });
        }
        if self.p.iter().chain(self.q_l.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("scenario injections"));
        }
        Ok(())
    }

    pub fn zero(model: &SensitivityModel) -> Self {
        Scenario {
            index: 0,
            p: DVector::zeros(model.n),
            q_l: DVector::zeros(model.load_count()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoltageSolution {
    pub u: DVector<Complex64>,
    pub v: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest bus power mismatch `|s_n − u_n·conj(i_n)|` of the returned iterate.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AcOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for AcOptions {
    fn default() -> Self {
        AcOptions {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

fn complex_injections(
    model: &SensitivityModel,
    scenario: &Scenario,
    q_c: &DVector<f64>,
) -> Result<DVector<Complex64>> {
    scenario.check(model)?;
    if q_c.len() != model.der_count() {
        return Err(Error::Dimension {
            context: "q_C",
            expected: model.der_count(),
            got: q_c.len(),
        });
    }
    let q = model.assemble_q(q_c, &scenario.q_l);
    Ok(DVector::from_fn(model.n, |i, _| Complex64::new(scenario.p[i], q[i])))
}

fn mismatch(model: &SensitivityModel, s: &DVector<Complex64>, u: &DVector<Complex64>) -> f64 {
    let currents = &model.ytilde * (u - &model.u_hat);
    s.iter()
        .zip(u.iter().zip(currents.iter()))
        .map(|(s, (u, i))| (s - u * i.conj()).norm())
        .fold(0.0, f64::max)
}

/// Solves the AC power flow from the flat start `u⁰ = û`.
pub fn solve_ac(
    model: &SensitivityModel,
    scenario: &Scenario,
    q_c: &DVector<f64>,
) -> Result<VoltageSolution> {
    solve_ac_from(model, scenario, q_c, None, AcOptions::default())
}

/// Z-bus fixed-point iteration `u ← Z̃·conj(s/u) + û`.
///
/// A non-converged result (iteration cap, non-finite or collapsing iterate)
/// is returned with `converged = false` and the last finite iterate.
pub fn solve_ac_from(
    model: &SensitivityModel,
    scenario: &Scenario,
    q_c: &DVector<f64>,
    initial: Option<&DVector<Complex64>>,
    options: AcOptions,
) -> Result<VoltageSolution> {
    let s = complex_injections(model, scenario, q_c)?;
    let mut u = match initial {
        Some(u0) if u0.len() == model.n => u0.clone(),
        _ => model.u_hat.clone(),
    };
    let mut residual = mismatch(model, &s, &u);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        let currents = s.zip_map(&u, |s, u| (s / u).conj());
        let next = &model.ztilde * currents + &model.u_hat;
        iterations += 1;
        if next.iter().any(|x| !x.re.is_finite() || !x.im.is_finite() || x.norm() < 1e-3) {
            break;
        }
        u = next;
        residual = mismatch(model, &s, &u);
        if residual <= options.tolerance {
            converged = true;
            break;
        }
    }
    let v = u.map(|x| x.norm());
    Ok(VoltageSolution {
        u,
        v,
        converged,
        iterations,
        residual,
    })
}

impl SensitivityModel {
    /// Uncontrolled part of the linearized voltages:
    /// `v̂ = X̃[:, L]·q_L + R̃·p + |û|` (bus order, length `N`).
    pub fn v_hat(&self, scenario: &Scenario) -> DVector<f64> {
        let q = self.assemble_q(&DVector::zeros(self.der_count()), &scenario.q_l);
        &self.rtilde * &scenario.p + &self.xtilde * q + &self.u_hat_mag
    }
}

/// Linearized voltages `v = [X; X_Lᵀ]·q_C + v̂`.
pub fn solve_linearized(
    model: &SensitivityModel,
    scenario: &Scenario,
    q_c: &DVector<f64>,
) -> Result<DVector<f64>> {
    scenario.check(model)?;
    if q_c.len() != model.der_count() {
        return Err(Error::Dimension {
            context: "q_C",
            expected: model.der_count(),
            got: q_c.len(),
        });
    }
    let q = model.assemble_q(q_c, &scenario.q_l);
    Ok(&model.rtilde * &scenario.p + &model.xtilde * q + &model.u_hat_mag)
}
