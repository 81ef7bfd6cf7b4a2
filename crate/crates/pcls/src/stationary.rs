//! Stationary covariance families with closed-form spectral measures.
//!
//! Only families whose spectral measure is known analytically are offered:
//! the frequency-domain reconstruction oracle needs trustworthy masses, and
//! numerically inverting an arbitrary covariance is a separate problem. The
//! discretization of a density family is a uniform lattice of point masses
//! `h * f(lambda_k)`; by Poisson summation, transforming such a lattice
//! reproduces the covariance periodized with period `2*pi/h`, so the lattice
//! pitch controls aliasing and the lattice extent controls truncation. The
//! default grids pick both from explicit tolerances.

use nalgebra::DMatrix;

use crate::error::{PclsError, Result};
use crate::linalg::{self, Complex64};

/// Default relative coverage requirement for user-supplied density grids:
/// the analytic tail mass outside the grid must stay below this fraction of
/// the variance.
pub const DEFAULT_COVERAGE_REL: f64 = 1e-6;

/// Hard cap on lattice size; parameters that blow past this are rejected
/// rather than silently truncated.
pub const MAX_LATTICE_NODES: usize = 8_000_000;

/// Tuning knobs for the default discretization of density families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGridParams {
    /// Largest lag the lattice transform must reproduce accurately.
    pub tau_max: f64,
    /// Relative aliasing budget at lags up to `tau_max`.
    pub alias_tol: f64,
    /// Relative truncation budget (analytic tail mass outside the lattice).
    pub tail_tol: f64,
}

impl Default for SpectralGridParams {
    fn default() -> Self {
        Self {
            tau_max: 12.0,
            alias_tol: 1e-6,
            tail_tol: 1e-5,
        }
    }
}

/// Stationary covariance families `gamma(tau)`.
#[derive(Debug, Clone, PartialEq)]
pub enum StationaryCov {
    /// `sigma2 * exp(-theta |tau|)`; spectral density
    /// `sigma2 * (theta/pi) / (theta^2 + lambda^2)` (heavy-tailed).
    Exponential { theta: f64, sigma2: f64 },
    /// `sigma2 * exp(-tau^2 / (2 ell^2))`; spectral density
    /// `sigma2 * ell / sqrt(2 pi) * exp(-ell^2 lambda^2 / 2)`.
    SquaredExponential { ell: f64, sigma2: f64 },
    /// `sum_r p_r cos(omega_r tau)`; spectral atoms `p_r / 2` at
    /// `+/- omega_r` (mass `p_r` at zero when `omega_r = 0`).
    CosineMixture {
        masses: Vec<f64>,
        frequencies: Vec<f64>,
    },
}

impl StationaryCov {
    pub fn validate(&self) -> Result<()> {
        match self {
            StationaryCov::Exponential { theta, sigma2 } => {
                if !theta.is_finite() || *theta <= 0.0 {
                    return Err(PclsError::Domain(format!(
                        "exponential rate must be positive, got {theta}"
                    )));
                }
                if !sigma2.is_finite() || *sigma2 <= 0.0 {
                    return Err(PclsError::Domain(format!(
                        "variance must be positive, got {sigma2}"
                    )));
                }
            }
            StationaryCov::SquaredExponential { ell, sigma2 } => {
                if !ell.is_finite() || *ell <= 0.0 {
                    return Err(PclsError::Domain(format!(
                        "length scale must be positive, got {ell}"
                    )));
                }
                if !sigma2.is_finite() || *sigma2 <= 0.0 {
                    return Err(PclsError::Domain(format!(
                        "variance must be positive, got {sigma2}"
                    )));
                }
            }
            StationaryCov::CosineMixture {
                masses,
                frequencies,
            } => {
                if masses.is_empty() || masses.len() != frequencies.len() {
                    return Err(PclsError::Domain(format!(
                        "cosine mixture needs matching nonempty lists, got {} masses, {} frequencies",
                        masses.len(),
                        frequencies.len()
                    )));
                }
                for &p in masses {
                    if !p.is_finite() || p <= 0.0 {
                        return Err(PclsError::Domain(format!(
                            "cosine mixture mass must be positive, got {p}"
                        )));
                    }
                }
                for &w in frequencies {
                    if !w.is_finite() || w < 0.0 {
                        return Err(PclsError::Domain(format!(
                            "cosine mixture frequency must be nonnegative, got {w}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Covariance at lag `tau`; even in `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            StationaryCov::Exponential { theta, sigma2 } => sigma2 * (-theta * tau.abs()).exp(),
            StationaryCov::SquaredExponential { ell, sigma2 } => {
                sigma2 * (-tau * tau / (2.0 * ell * ell)).exp()
            }
            StationaryCov::CosineMixture {
                masses,
                frequencies,
            } => masses
                .iter()
                .zip(frequencies)
                .map(|(&p, &w)| p * (w * tau).cos())
                .sum(),
        }
    }

    /// Variance `gamma(0)`.
    pub fn variance(&self) -> f64 {
        match self {
            StationaryCov::Exponential { sigma2, .. } => *sigma2,
            StationaryCov::SquaredExponential { sigma2, .. } => *sigma2,
            StationaryCov::CosineMixture { masses, .. } => masses.iter().sum(),
        }
    }

    /// Whether the spectral measure is purely atomic.
    pub fn is_atomic(&self) -> bool {
        matches!(self, StationaryCov::CosineMixture { .. })
    }

    /// Spectral density at `lambda` for density families, `None` for atomic.
    pub fn density(&self, lambda: f64) -> Option<f64> {
        match self {
            StationaryCov::Exponential { theta, sigma2 } => {
                Some(sigma2 * (theta / std::f64::consts::PI) / (theta * theta + lambda * lambda))
            }
            StationaryCov::SquaredExponential { ell, sigma2 } => Some(
                sigma2 * ell / (2.0 * std::f64::consts::PI).sqrt()
                    * (-0.5 * ell * ell * lambda * lambda).exp(),
            ),
            StationaryCov::CosineMixture { .. } => None,
        }
    }

    /// Exact atoms `(frequency, mass)` for atomic families, `None` otherwise.
    /// A component at frequency `w > 0` splits into `p/2` at `+/- w`; a zero
    /// frequency contributes its full mass at the origin.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            StationaryCov::CosineMixture {
                masses,
                frequencies,
            } => {
                let mut out = Vec::new();
                for (&p, &w) in masses.iter().zip(frequencies) {
                    if w == 0.0 {
                        out.push((0.0, p));
                    } else {
                        out.push((-w, 0.5 * p));
                        out.push((w, 0.5 * p));
                    }
                }
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
                Some(out)
            }
            _ => None,
        }
    }

    /// Analytic two-sided spectral mass outside `[-l, l]`.
    pub fn tail_mass(&self, l: f64) -> f64 {
        match self {
            StationaryCov::Exponential { theta, sigma2 } => {
                sigma2 * (1.0 - std::f64::consts::FRAC_2_PI * (l / theta).atan())
            }
            StationaryCov::SquaredExponential { ell, sigma2 } => {
                sigma2 * linalg::erfc(ell * l / std::f64::consts::SQRT_2)
            }
            StationaryCov::CosineMixture {
                masses,
                frequencies,
            } => masses
                .iter()
                .zip(frequencies)
                .filter(|(_, &w)| w.abs() > l)
                .map(|(&p, _)| p)
                .sum(),
        }
    }

    /// Discretizes the spectral measure on a caller-supplied grid, requiring
    /// the default coverage. Atomic families ignore the grid and place their
    /// exact atoms.
    pub fn spectral_measure(&self, grid: &FrequencyGrid) -> Result<SpectralMeasure> {
        self.spectral_measure_with_coverage(grid, DEFAULT_COVERAGE_REL)
    }

    /// Same as [`spectral_measure`], with an explicit relative coverage
    /// tolerance for the analytic tail mass outside the grid.
    ///
    /// [`spectral_measure`]: Self::spectral_measure
    pub fn spectral_measure_with_coverage(
        &self,
        grid: &FrequencyGrid,
        coverage_rel: f64,
    ) -> Result<SpectralMeasure> {
        if let Some(atoms) = self.atoms() {
            let (nodes, masses) = atoms.into_iter().unzip();
            return Ok(SpectralMeasure {
                nodes,
                masses,
                tail_mass: 0.0,
            });
        }
        let lo = grid.nodes.first().copied().unwrap_or(0.0);
        let hi = grid.nodes.last().copied().unwrap_or(0.0);
        let l = lo.abs().min(hi.abs());
        let tail = self.tail_mass(l);
        let budget = coverage_rel * self.variance();
        if tail > budget {
            return Err(PclsError::Coverage {
                tail_mass: tail,
                tol: budget,
            });
        }
        let masses = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(&x, &w)| w * self.density(x).expect("density family"))
            .collect();
        Ok(SpectralMeasure {
            nodes: grid.nodes.clone(),
            masses,
            tail_mass: tail,
        })
    }

    /// Default discretization: exact atoms for atomic families; for density
    /// families, a uniform lattice whose pitch and extent are designed from
    /// `params` (pitch from the aliasing budget via Poisson summation, extent
    /// from the tail budget).
    pub fn default_spectral_measure(&self, params: &SpectralGridParams) -> Result<SpectralMeasure> {
        if let Some(atoms) = self.atoms() {
            let (nodes, masses) = atoms.into_iter().unzip();
            return Ok(SpectralMeasure {
                nodes,
                masses,
                tail_mass: 0.0,
            });
        }
        let (period, extent) = match self {
            StationaryCov::Exponential { theta, .. } => {
                // Alias images sit at distance >= period - tau_max; the
                // covariance decays like exp(-theta d), so two images cost
                // 2 exp(-theta (P - tau_max)) relative to the variance.
                let p = params.tau_max + (2.0 / params.alias_tol).ln() / theta;
                // Cauchy tail beyond +/-L is ~ 2 theta / (pi L) relative.
                let l = 2.0 * theta / (std::f64::consts::PI * params.tail_tol);
                (p, l)
            }
            StationaryCov::SquaredExponential { ell, .. } => {
                let p = params.tau_max + ell * (2.0 * (2.0 / params.alias_tol).ln()).sqrt();
                let l = std::f64::consts::SQRT_2 * linalg::erfc_inv(params.tail_tol)? / ell;
                (p, l)
            }
            StationaryCov::CosineMixture { .. } => unreachable!("handled above"),
        };
        let h = 2.0 * std::f64::consts::PI / period;
        let m = (extent / h).ceil();
        if !m.is_finite() || 2.0 * m + 1.0 > MAX_LATTICE_NODES as f64 {
            return Err(PclsError::Numeric(format!(
                "designed spectral lattice needs {} nodes, cap is {}; relax tail_tol or alias_tol",
                2.0 * m + 1.0,
                MAX_LATTICE_NODES
            )));
        }
        let m = m as i64;
        let mut nodes = Vec::with_capacity((2 * m + 1) as usize);
        let mut masses = Vec::with_capacity((2 * m + 1) as usize);
        for k in -m..=m {
            let x = k as f64 * h;
            nodes.push(x);
            masses.push(h * self.density(x).expect("density family"));
        }
        Ok(SpectralMeasure {
            nodes,
            masses,
            tail_mass: self.tail_mass(m as f64 * h),
        })
    }
}

/// A frequency grid with quadrature weights (trapezoid by default).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl FrequencyGrid {
    /// Uniform symmetric grid of `n` nodes on `[-l, l]` with trapezoid weights.
    pub fn uniform(l: f64, n: usize) -> Result<Self> {
        if !(l > 0.0) || n < 2 {
            return Err(PclsError::Domain(format!(
                "uniform grid needs l > 0 and n >= 2, got l = {l}, n = {n}"
            )));
        }
        if n > MAX_LATTICE_NODES {
            return Err(PclsError::Domain(format!(
                "grid of {n} nodes exceeds the cap of {MAX_LATTICE_NODES}"
            )));
        }
        let h = 2.0 * l / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self { nodes, weights })
    }

    /// Grid over caller-supplied strictly increasing nodes, with trapezoid
    /// weights derived from the spacing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(PclsError::Domain("grid needs at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PclsError::Domain(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { nodes[i] - nodes[i - 1] };
            let right = if i == n - 1 {
                0.0
            } else {
                nodes[i + 1] - nodes[i]
            };
            weights[i] = 0.5 * (left + right);
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A discrete spectral measure: point masses on frequency nodes, plus the
/// analytic mass left outside the nodes (zero for atomic families).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    nodes: Vec<f64>,
    masses: Vec<f64>,
    tail_mass: f64,
}

impl SpectralMeasure {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        linalg::pairwise_sum(&self.masses)
    }

    /// `sum_k mass_k exp(i lambda_k tau)`.
    pub fn transform(&self, tau: f64) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&x, &m) in self.nodes.iter().zip(&self.masses) {
            let (s, c) = (x * tau).sin_cos();
            re += m * c;
            im += m * s;
        }
        Complex64::new(re, im)
    }
}

/// PSD check of the stationary Gram `[gamma(t_i - t_k)]` over arbitrary
/// points; stationary kernels are analytically PSD, so failures beyond
/// round-off indicate an implementation bug.
pub fn stationary_gram(g: &StationaryCov, points: &[f64]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, k| g.eval(points[i] - points[k]))
}
