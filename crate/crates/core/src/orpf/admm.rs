//! Operator splitting (scaled-form ADMM) for problems of the shape
//!
//! ```text
//! minimize  ½ qᵀPq + lᵀq + I_box(q) + Σ_b h_b(Aq + c)
//! ```
//!
//! where every `h_b` has a cheap proximal operator. Each term gets its own
//! copy variable, so the `q`-update is a fixed SPD linear solve and all other
//! updates are separable.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::linalg::norm_inf;

/// A term applied to the affine image `y = Aq + c`.
#[derive(Debug, Clone)]
pub(crate) enum Term {
    /// Indicator of `lo ≤ y ≤ hi`.
    Bounds { lo: DVector<f64>, hi: DVector<f64> },
    /// `weight·‖y − 1‖₂`.
    Deviation { weight: f64 },
    /// `weight·Σ dist(y_n, [lo_n, hi_n])`.
    Violation {
        weight: f64,
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
}

impl Term {
    /// `prox_{t·h}(x)`.
    fn prox(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        match self {
            Term::Bounds { lo, hi } => {
                DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i]))
            }
            Term::Deviation { weight } => {
                let d = x.add_scalar(-1.0);
                let norm = d.norm();
                let kappa = weight * t;
                if norm <= kappa {
                    DVector::from_element(x.len(), 1.0)
                } else {
                    (d * (1.0 - kappa / norm)).add_scalar(1.0)
                }
            }
            Term::Violation { weight, lo, hi } => {
                let shift = weight * t;
                DVector::from_fn(x.len(), |i, _| {
                    let xi = x[i];
                    if xi < lo[i] {
                        (xi + shift).min(lo[i])
                    } else if xi > hi[i] {
                        (xi - shift).max(hi[i])
                    } else {
                        xi
                    }
                })
            }
        }
    }
}

pub(crate) struct Problem<'a> {
    pub p: DMatrix<f64>,
    pub l: DVector<f64>,
    pub lo: &'a DVector<f64>,
    pub hi: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub c: &'a DVector<f64>,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rho: f64,
}

/// Early exit hook, called with the box-feasible iterate.
pub(crate) type Stop<'s> = &'s dyn Fn(&DVector<f64>) -> bool;

pub(crate) struct Outcome {
    /// Box-feasible iterate (the box copy variable).
    pub q: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

const ADAPT_EVERY: usize = 25;

pub(crate) fn solve(
    problem: &Problem<'_>,
    settings: Settings,
    start: &DVector<f64>,
    stop: Option<Stop<'_>>,
) -> Outcome {
    let dim = problem.l.len();
    let m = problem.terms.len();
    let a = problem.a;
    let at = a.transpose();
    let ata = &at * a;
    // voltage rows are much smaller than the q box; rescale their penalty
    let a_norm = ata.norm().sqrt().max(1e-12);
    let scale = 1.0 / (a_norm * a_norm);

    let mut rho = settings.rho;
    let factor = |rho: f64| -> Cholesky<f64, Dyn> {
        let mut k = problem.p.clone();
        for i in 0..dim {
            k[(i, i)] += rho;
        }
        k += &ata * (rho * scale * m as f64);
        Cholesky::new(k).expect("splitting system is positive definite")
    };
    let mut chol = factor(rho);

    let mut q = start.clone();
    let mut z0 = DVector::from_fn(dim, |i, _| q[i].clamp(problem.lo[i], problem.hi[i]));
    let mut u0 = DVector::zeros(dim);
    let y0 = a * &z0 + problem.c;
    let mut z: Vec<DVector<f64>> = problem
        .terms
        .iter()
        .map(|t| t.prox(&y0, 1.0 / (rho * scale)))
        .collect();
    let mut u: Vec<DVector<f64>> = vec![DVector::zeros(problem.c.len()); m];

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    for iteration in 1..=settings.max_iterations {
        let rho_y = rho * scale;
        let mut rhs = -&problem.l + (&z0 - &u0) * rho;
        for (zb, ub) in z.iter().zip(&u) {
            rhs += &at * ((zb - ub - problem.c) * rho_y);
        }
        q = chol.solve(&rhs);
        let y = a * &q + problem.c;

        let z0_prev = std::mem::replace(
            &mut z0,
            DVector::from_fn(dim, |i, _| (q[i] + u0[i]).clamp(problem.lo[i], problem.hi[i])),
        );
        let mut dz = (&z0 - &z0_prev) * rho;
        primal = norm_inf(&(&q - &z0));
        u0 += &q - &z0;
        for ((term, zb), ub) in problem.terms.iter().zip(z.iter_mut()).zip(u.iter_mut()) {
            let next = term.prox(&(&y + &*ub), 1.0 / rho_y);
            dz += &at * ((&next - &*zb) * rho_y);
            *zb = next;
            let r = &y - &*zb;
            primal = primal.max(norm_inf(&r));
            *ub += r;
        }
        dual = norm_inf(&dz);

        if let Some(stop) = stop {
            if stop(&z0) {
                return Outcome {
                    q: z0,
                    converged: false,
                    iterations: iteration,
                    primal_residual: primal,
                    dual_residual: dual,
                };
            }
        }
        if primal <= settings.tolerance && dual <= settings.tolerance {
            return Outcome {
                q: z0,
                converged: true,
                iterations: iteration,
                primal_residual: primal,
                dual_residual: dual,
            };
        }
        if iteration % ADAPT_EVERY == 0 {
            let ratio = if rho > 1e6 || rho < 1e-6 { 1.0 } else if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if ratio != 1.0 {
                rho *= ratio;
                u0 /= ratio;
                for ub in u.iter_mut() {
                    *ub /= ratio;
                }
                chol = factor(rho);
            }
        }
    }
    Outcome {
        q: z0,
        converged: false,
        iterations: settings.max_iterations,
        primal_residual: primal,
        dual_residual: dual,
    }
}
