//! Exponentially convex envelope functions.
//!
//! An envelope `psi` is *exponentially convex* when every matrix
//! `[psi(t_i + t_j)]` over a finite point set is positive semidefinite.
//! The workhorse family here is the Laplace mixture
//! `psi(v) = sum_m w_m exp(lambda_m v)` with positive weights, which carries
//! an explicit random factorization: the Gaussian weight process
//! `U(t) = sum_m xi_m sqrt(w_m) exp(lambda_m t)` with iid standard normal
//! `xi_m` satisfies `E[U(t) U(u)] = psi(t + u)`. That factorization is what
//! the constructive simulation route samples.
//!
//! A closed-form catalog entry is provided for evaluation-only use; it has
//! no finite mixture factorization, so the constructive simulator rejects it.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PclsError, Result};
use crate::linalg;

/// Arguments beyond this make `exp` overflow `f64`.
const EXP_OVERFLOW_LIMIT: f64 = 709.0;

/// Relative PSD tolerance for envelope Gram checks (these matrices are
/// analytically PSD; only round-off can push eigenvalues below zero).
pub const GRAM_PSD_TOL_REL: f64 = 1e-12;

/// Finite mixture of exponentials with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceMixture {
    weights: Vec<f64>,
    rates: Vec<f64>,
}

impl LaplaceMixture {
    pub fn new(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(PclsError::Domain("mixture needs at least one term".into()));
        }
        if weights.len() != rates.len() {
            return Err(PclsError::Domain(format!(
                "mixture has {} weights but {} rates",
                weights.len(),
                rates.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(PclsError::Domain(format!(
                    "mixture weight #{} must be positive and finite, got {w}",
                    i + 1
                )));
            }
        }
        for (i, &r) in rates.iter().enumerate() {
            if !r.is_finite() {
                return Err(PclsError::Domain(format!(
                    "mixture rate #{} must be finite, got {r}",
                    i + 1
                )));
            }
        }
        Ok(Self { weights, rates })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (&w, &r) in self.weights.iter().zip(&self.rates) {
            let arg = r * v;
            if arg > EXP_OVERFLOW_LIMIT {
                return Err(PclsError::Overflow {
                    context: "laplace mixture",
                    rate: r,
                    arg: v,
                });
            }
            sum += w * arg.exp();
        }
        Ok(sum)
    }

    /// Draws one realization of the Gaussian weight process for this mixture.
    pub fn sample_weight_process<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightProcessRealization {
        let coeffs = self
            .weights
            .iter()
            .map(|&w| {
                let xi: f64 = rng.sample(StandardNormal);
                xi * w.sqrt()
            })
            .collect();
        WeightProcessRealization {
            coeffs,
            rates: self.rates.clone(),
        }
    }

    /// Seeded convenience wrapper around [`sample_weight_process`].
    ///
    /// [`sample_weight_process`]: Self::sample_weight_process
    pub fn sample_weight_process_seeded(&self, seed: u64) -> WeightProcessRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_weight_process(&mut rng)
    }
}

/// Closed-form exponentially convex envelopes (no mixture factorization).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormPsi {
    /// `psi(v) = (1 + v^2) exp(v^2 / 2)`.
    QuadraticGaussian,
}

impl ClosedFormPsi {
    pub fn name(&self) -> &'static str {
        match self {
            ClosedFormPsi::QuadraticGaussian => "quadratic_gaussian",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "quadratic_gaussian" => Some(ClosedFormPsi::QuadraticGaussian),
            _ => None,
        }
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        match self {
            ClosedFormPsi::QuadraticGaussian => {
                let arg = 0.5 * v * v;
                if arg > EXP_OVERFLOW_LIMIT {
                    return Err(PclsError::Overflow {
                        context: "quadratic_gaussian envelope",
                        rate: 0.5 * v,
                        arg: v,
                    });
                }
                Ok((1.0 + v * v) * arg.exp())
            }
        }
    }
}

/// An exponentially convex envelope: either a simulatable Laplace mixture or
/// a closed-form catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpConvexCov {
    Mixture(LaplaceMixture),
    ClosedForm(ClosedFormPsi),
}

impl ExpConvexCov {
    pub fn eval(&self, v: f64) -> Result<f64> {
        match self {
            ExpConvexCov::Mixture(m) => m.eval(v),
            ExpConvexCov::ClosedForm(c) => c.eval(v),
        }
    }

    /// Whether the constructive simulation route can factor this envelope.
    pub fn is_simulatable(&self) -> bool {
        matches!(self, ExpConvexCov::Mixture(_))
    }

    /// PSD check of `[psi(t_i + t_j)]` over the given points.
    pub fn gram_check(&self, points: &[f64], tol_rel: f64) -> Result<GramCheck> {
        let mut evals = Vec::with_capacity(points.len() * points.len());
        for &a in points {
            for &b in points {
                evals.push(self.eval(a + b)?);
            }
        }
        let m = DMatrix::from_row_slice(points.len(), points.len(), &evals);
        gram_psd_report(&m, tol_rel)
    }
}

/// Result of a Gram-matrix PSD check.
#[derive(Debug, Clone, Copy)]
pub struct GramCheck {
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub pass: bool,
}

/// PSD check of `[f(t_i + t_j)]` for an arbitrary scalar function. `pass`
/// means the smallest eigenvalue is at least `-tol_rel * trace`.
pub fn gram_psd_check<F: Fn(f64) -> f64>(f: F, points: &[f64], tol_rel: f64) -> Result<GramCheck> {
    let n = points.len();
    let m = DMatrix::from_fn(n, n, |i, k| f(points[i] + points[k]));
    gram_psd_report(&m, tol_rel)
}

fn gram_psd_report(m: &DMatrix<f64>, tol_rel: f64) -> Result<GramCheck> {
    if m.is_empty() {
        return Err(PclsError::Domain(
            "gram check needs at least one point".into(),
        ));
    }
    let min = linalg::min_eigenvalue(m)?;
    let trace = m.trace();
    Ok(GramCheck {
        min_eigenvalue: min,
        trace,
        pass: min >= -tol_rel * trace.abs(),
    })
}

/// One drawn weight process `U(t) = sum_m c_m exp(lambda_m t)` with
/// `c_m = xi_m sqrt(w_m)`.
#[derive(Debug, Clone)]
pub struct WeightProcessRealization {
    coeffs: Vec<f64>,
    rates: Vec<f64>,
}

impl WeightProcessRealization {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.rates)
            .map(|(&c, &r)| c * (r * t).exp())
            .sum()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}
