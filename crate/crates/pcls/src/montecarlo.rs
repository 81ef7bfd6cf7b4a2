//! Gaussian ensemble simulation and empirical second-moment checks.
//!
//! Two simulation methods close the loop between the covariance formula and
//! the constructive definition of the process:
//!
//! * **joint factorization** draws paths as `B z` where `B Bᵀ` is the
//!   (possibly clipped) covariance matrix on the grid — it realizes the
//!   formula;
//! * **component-wise** builds each path the way the process is defined:
//!   per-family weight processes (drawn once and shared by the two blocks
//!   each family touches) multiply independent stationary paths, and the
//!   interval-measure part is drawn from its own assembled Gram — it
//!   realizes the construction.
//!
//! Agreement of the two ensembles' empirical covariances is the strongest
//! end-to-end evidence that formula and construction describe the same
//! process.
//!
//! Every path has its own counter-based stream derived from
//! `(master seed, path index)`, so ensembles are bit-identical regardless
//! of thread count or path evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{PclsError, Result};
use crate::excov::{ExpConvexCov, LaplaceMixture};
use crate::linalg::{self, pairwise_sum};
use crate::model::PclsModel;
use crate::pc::PcComponent;
use crate::stationary::StationaryCov;

/// PSD tolerance used when assembling simulation covariances: the assembled
/// cross-block law has no general PSD guarantee, so simulation clips small
/// negative eigenvalues and refuses matrices whose defect exceeds this
/// fraction of the trace.
pub const SIM_PSD_TOL_REL: f64 = 1e-2;

/// Cap on the number of grid pairs a statistical check examines.
pub const MC_MAX_PAIRS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMethod {
    JointFactorization,
    ComponentWise,
}

impl SimMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMethod::JointFactorization => "joint_factorization",
            SimMethod::ComponentWise => "component_wise",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "joint_factorization" => Ok(SimMethod::JointFactorization),
            "component_wise" => Ok(SimMethod::ComponentWise),
            other => Err(PclsError::UnsupportedMethod(format!(
                "unknown simulation method '{other}' (expected joint_factorization or component_wise)"
            ))),
        }
    }
}

/// The per-path random stream: a counter-based generator seeded by the
/// master seed with one stream per path. Stream 0 is reserved.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64 + 1);
    rng
}

/// A simulated ensemble: `n_paths` rows over a shared time grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    grid: Vec<f64>,
    /// Row-major: path `p` occupies `data[p*n .. (p+1)*n]`.
    data: Vec<f64>,
    n_paths: usize,
    seed: u64,
    method: SimMethod,
    fingerprint: String,
}

impl Ensemble {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> SimMethod {
        self.method
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[p * n..(p + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// CSV export: header row = grid, one row per path.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let header = self
            .grid
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{header}")?;
        for p in 0..self.n_paths {
            let row = self
                .path(p)
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Binary export: one JSON header line, then little-endian f64 values
    /// in column-major order (all paths at grid point 0, then point 1, …).
    pub fn write_binary<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let header = json!({
            "grid": self.grid,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "n_paths": self.n_paths,
            "method": self.method.as_str(),
        });
        writeln!(w, "{header}")?;
        let n = self.grid.len();
        for i in 0..n {
            for p in 0..self.n_paths {
                w.write_all(&self.data[p * n + i].to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Sample second moment of grid points `i` and `k` across paths,
    /// with its standard error (the model is zero-mean; no centering).
    pub fn empirical_cov(&self, i: usize, k: usize) -> Result<(f64, f64)> {
        if self.n_paths < 2 {
            return Err(PclsError::Domain(
                "empirical covariance needs at least 2 paths".into(),
            ));
        }
        let n = self.grid.len();
        if i >= n || k >= n {
            return Err(PclsError::Domain(format!(
                "grid indices ({i}, {k}) out of range for {n} points"
            )));
        }
        let products: Vec<f64> = (0..self.n_paths)
            .map(|p| self.data[p * n + i] * self.data[p * n + k])
            .collect();
        let mean = pairwise_sum(&products) / self.n_paths as f64;
        let sq_dev: Vec<f64> = products.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq_dev) / (self.n_paths as f64 - 1.0);
        let se = (var / self.n_paths as f64).sqrt();
        Ok((mean, se))
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(PclsError::Domain("simulation grid is empty".into()));
    }
    if grid[0] <= 0.0 || grid.iter().any(|t| !t.is_finite()) {
        return Err(PclsError::Domain(
            "grid points must be positive finite numbers".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PclsError::Domain(
            "grid points must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Draws `n_paths` zero-mean Gaussian paths of the model on `grid`.
pub fn simulate(
    model: &PclsModel,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    method: SimMethod,
    fingerprint: &str,
) -> Result<Ensemble> {
    if n_paths == 0 {
        return Err(PclsError::Domain("n_paths must be at least 1".into()));
    }
    validate_grid(grid)?;
    let data = match method {
        SimMethod::JointFactorization => joint_paths(model, grid, n_paths, seed)?,
        SimMethod::ComponentWise => component_paths(model, grid, n_paths, seed)?,
    };
    Ok(Ensemble {
        grid: grid.to_vec(),
        data,
        n_paths,
        seed,
        method,
        fingerprint: fingerprint.to_string(),
    })
}

fn joint_paths(model: &PclsModel, grid: &[f64], n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let cov = model.cov_matrix(grid, true, SIM_PSD_TOL_REL)?;
    let (factor, _) = linalg::psd_factor_clipped(cov.values())?;
    let n = grid.len();
    let mut data = vec![0.0f64; n_paths * n];
    data.par_chunks_mut(n).enumerate().for_each(|(p, row)| {
        let mut rng = path_rng(seed, p);
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &factor * z;
        row.copy_from_slice(x.as_slice());
    });
    Ok(data)
}

/// Per-family pieces of the constructive simulation: the weight covariance,
/// the indices of the grid points the family touches (its two blocks), and
/// a factor of the stationary Gram on those points.
struct FamilyPlan<'a> {
    mixture: &'a LaplaceMixture,
    point_idx: Vec<usize>,
    factor: DMatrix<f64>,
}

fn component_paths(model: &PclsModel, grid: &[f64], n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let n = grid.len();
    let partition = model.partition();
    let blocks: Vec<u64> = grid
        .iter()
        .map(|&t| partition.block_of(t))
        .collect::<Result<_>>()?;

    // Mixture part: one plan per family that touches the grid.
    let mut plans: Vec<FamilyPlan> = Vec::new();
    if let Some(ls) = model.ls() {
        let max_block = *blocks.last().expect("grid is nonempty");
        for f in 1..=max_block {
            let point_idx: Vec<usize> = (0..n)
                .filter(|&i| blocks[i] == f || blocks[i] == f + 1)
                .collect();
            if point_idx.is_empty() {
                continue;
            }
            let mixture = match ls.psi_at(f)? {
                ExpConvexCov::Mixture(mx) => mx,
                ExpConvexCov::ClosedForm(cf) => {
                    return Err(PclsError::UnsupportedMethod(format!(
                        "component_wise simulation needs mixture weight covariances; \
                         family {f} uses the closed form '{}'",
                        cf.name()
                    )));
                }
            };
            let pts: Vec<f64> = point_idx.iter().map(|&i| grid[i]).collect();
            let gram = stationary_gram_of(ls.gamma_at(f)?, &pts);
            let (factor, min) = linalg::psd_factor_clipped(&gram)?;
            if min < -SIM_PSD_TOL_REL * gram.trace().abs() {
                return Err(PclsError::NonPsd {
                    min_eigenvalue: min,
                    trace: gram.trace(),
                    tol: SIM_PSD_TOL_REL,
                });
            }
            plans.push(FamilyPlan {
                mixture,
                point_idx,
                factor,
            });
        }
    }

    // Measure part: factor of the assembled cross-block Gram, gated on the
    // same tolerance the joint method uses.
    let pc_factor: Option<DMatrix<f64>> = match model.pc() {
        Some(pc) => Some(measure_factor(pc, grid)?),
        None => None,
    };

    let mut data = vec![0.0f64; n_paths * n];
    data.par_chunks_mut(n).enumerate().for_each(|(p, row)| {
        let mut rng = path_rng(seed, p);
        // Fixed draw order per path: families ascending (weight
        // coefficients, then the stationary path), then the measure part.
        for plan in &plans {
            let weights = plan.mixture.sample_weight_process(&mut rng);
            let m = plan.point_idx.len();
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &plan.factor * z;
            for (slot, &i) in plan.point_idx.iter().enumerate() {
                row[i] += weights.eval(grid[i]) * y[slot];
            }
        }
        if let Some(factor) = &pc_factor {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = factor * z;
            for i in 0..n {
                row[i] += x[i];
            }
        }
    });
    Ok(data)
}

fn stationary_gram_of(g: &StationaryCov, pts: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(pts.len(), pts.len(), |i, k| g.eval(pts[i] - pts[k]))
}

fn measure_factor(pc: &PcComponent, grid: &[f64]) -> Result<DMatrix<f64>> {
    let gram = pc.xp_gram(grid)?;
    let (factor, min) = linalg::psd_factor_clipped(&gram)?;
    if min < -SIM_PSD_TOL_REL * gram.trace().abs() {
        return Err(PclsError::NonPsd {
            min_eigenvalue: min,
            trace: gram.trace(),
            tol: SIM_PSD_TOL_REL,
        });
    }
    Ok(factor)
}

/// Joint draws of interval-measure values for the given
/// `(block, interval)` pairs, row-major `n_paths × intervals.len()`.
/// Realizes the interval-value law directly (covariances from the
/// harmonic-mean / product formulas).
pub fn sample_measure_values(
    pc: &PcComponent,
    intervals: &[(u64, (f64, f64))],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_paths == 0 || intervals.is_empty() {
        return Err(PclsError::Domain(
            "need at least one path and one interval".into(),
        ));
    }
    let gram = pc.measure_gram(intervals)?;
    let (factor, min) = linalg::psd_factor_clipped(&gram)?;
    if min < -SIM_PSD_TOL_REL * gram.trace().abs() {
        return Err(PclsError::NonPsd {
            min_eigenvalue: min,
            trace: gram.trace(),
            tol: SIM_PSD_TOL_REL,
        });
    }
    let m = intervals.len();
    let mut data = vec![0.0f64; n_paths * m];
    data.par_chunks_mut(m).enumerate().for_each(|(p, row)| {
        let mut rng = path_rng(seed, p);
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &factor * z;
        row.copy_from_slice(x.as_slice());
    });
    Ok(data)
}

/// One grid pair whose empirical covariance strayed beyond the z threshold.
#[derive(Debug, Clone, Serialize)]
pub struct PairFailure {
    pub i: usize,
    pub k: usize,
    pub t: f64,
    pub u: f64,
    pub estimate: f64,
    pub exact: f64,
    pub se: f64,
    pub z_score: f64,
}

/// Statistical comparison of an ensemble's empirical covariances against
/// the exact ones.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub n_paths: usize,
    pub method: String,
    pub pairs_checked: usize,
    pub max_abs_z: f64,
    pub failures: Vec<PairFailure>,
    pub pass: bool,
}

/// Simulates and compares empirical to exact covariances on up to
/// [`MC_MAX_PAIRS`] grid pairs (deterministic stride subsample beyond
/// that). A pair fails when its z-score exceeds `z` in magnitude.
pub fn mc_check(
    model: &PclsModel,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    z: f64,
    method: SimMethod,
) -> Result<McReport> {
    if n_paths < 2 {
        return Err(PclsError::Domain(
            "the statistical check needs at least 2 paths".into(),
        ));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(PclsError::Domain(format!(
            "z threshold must be positive and finite, got {z}"
        )));
    }
    let ensemble = simulate(model, grid, n_paths, seed, method, "")?;
    let n = grid.len();
    let all_pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |k| (i, k))).collect();
    let stride = all_pairs.len().div_ceil(MC_MAX_PAIRS);
    let pairs: Vec<(usize, usize)> = all_pairs.into_iter().step_by(stride.max(1)).collect();

    let mut failures = Vec::new();
    let mut max_abs_z = 0.0f64;
    for &(i, k) in &pairs {
        let (estimate, se) = ensemble.empirical_cov(i, k)?;
        let exact = model.total_cov(grid[i], grid[k])?;
        let diff = estimate - exact;
        let z_score = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_abs_z = max_abs_z.max(z_score.abs());
        if z_score.abs() > z {
            failures.push(PairFailure {
                i,
                k,
                t: grid[i],
                u: grid[k],
                estimate,
                exact,
                se,
                z_score,
            });
        }
    }
    Ok(McReport {
        n_paths,
        method: method.as_str().to_string(),
        pairs_checked: pairs.len(),
        max_abs_z,
        pass: failures.is_empty(),
        failures,
    })
}
