//! The assembled two-part model and its exact covariance.
//!
//! The process is a sum of two independent zero-mean parts on `(0, ∞)`:
//!
//! * a **locally stationary mixture**: block `j` carries
//!   `U^{j-1}(t) Y_{j-1}(t) + U^j(t) Y_j(t)`, where each `Y_f` is a
//!   stationary process with covariance `γ_f` living on the block pair
//!   `B_f ∪ B_{f+1}`, and each `U^f` is an independent weight process with
//!   exponentially convex covariance `ψ_f` shared by the two blocks it
//!   touches (`Y_0 ≡ 0`, so block 1 has a single term);
//! * a **periodically correlated** part spread by per-block random interval
//!   measures ([`crate::pc`]).
//!
//! The pointwise covariance of the mixture follows a three-band rule in the
//! block indices `i = block(t)`, `j = block(u)`:
//!
//! * `|i−j| ≥ 2` → `0`,
//! * `|i−j| = 1` → `ψ_k(t+u) γ_k(t−u)` with `k = min(i,j)` (only the shared
//!   weight survives),
//! * `i = j`     → `ψ_{i−1}(t+u) γ_{i−1}(t−u) + ψ_i(t+u) γ_i(t−u)`.
//!
//! `total_cov = ls_cov + xp_cov` exactly, by independence.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{PclsError, Result};
use crate::excov::ExpConvexCov;
use crate::linalg;
use crate::partition::Partition;
use crate::pc::{PcComponent, PcSequence};
use crate::stationary::StationaryCov;

/// Hard cap on covariance-grid size (dense eigendecomposition beyond this
/// is impractical).
pub const MAX_GRID_POINTS: usize = 8192;

/// After an eigenvalue-clipping repair the matrix must satisfy
/// `min eig ≥ -REPAIR_RESIDUAL_TOL_REL * trace`.
pub const REPAIR_RESIDUAL_TOL_REL: f64 = 1e-10;

/// Two evaluation points participate in the factorization check only when
/// their coordinate sums agree to this fraction of the partition span.
const FACTORIZATION_SUM_TOL_REL: f64 = 1e-9;

/// Covariances below this magnitude are skipped (not divided by) in the
/// factorization check.
const FACTORIZATION_DEGENERATE_ABS: f64 = 1e-14;

/// The locally stationary mixture: per-family weight covariances `ψ_f` and
/// stationary covariances `γ_f`, `f = 1, 2, ...`.
///
/// By default the lists have the partition period `T` and are reused
/// periodically (`ψ_{f+T} = ψ_f`), which makes the mixture covariance
/// invariant under whole-span shifts of constant-envelope models. With
/// `aperiodic = true` the lists are indexed directly and evaluation past
/// their end is an error.
#[derive(Debug, Clone)]
pub struct LsComponent {
    psi: Vec<ExpConvexCov>,
    gamma: Vec<StationaryCov>,
    aperiodic: bool,
}

impl LsComponent {
    pub fn new(psi: Vec<ExpConvexCov>, gamma: Vec<StationaryCov>, aperiodic: bool) -> Result<Self> {
        if psi.is_empty() || psi.len() != gamma.len() {
            return Err(PclsError::Domain(format!(
                "psi and gamma lists must be nonempty and of equal length, got {} and {}",
                psi.len(),
                gamma.len()
            )));
        }
        for g in &gamma {
            g.validate()?;
        }
        Ok(Self {
            psi,
            gamma,
            aperiodic,
        })
    }

    pub fn n_families(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &[ExpConvexCov] {
        &self.psi
    }

    pub fn gamma(&self) -> &[StationaryCov] {
        &self.gamma
    }

    pub fn aperiodic(&self) -> bool {
        self.aperiodic
    }

    /// List slot backing family `f` (1-based): periodic wrap-around by
    /// default, direct indexing (with bounds error) for aperiodic lists.
    pub fn family_slot(&self, f: u64) -> Result<usize> {
        if f == 0 {
            return Err(PclsError::Domain("family indices are 1-based".into()));
        }
        let len = self.psi.len() as u64;
        if self.aperiodic {
            if f > len {
                return Err(PclsError::Domain(format!(
                    "family {f} exceeds the aperiodic list length {len}"
                )));
            }
            Ok((f - 1) as usize)
        } else {
            Ok(((f - 1) % len) as usize)
        }
    }

    pub fn psi_at(&self, f: u64) -> Result<&ExpConvexCov> {
        Ok(&self.psi[self.family_slot(f)?])
    }

    pub fn gamma_at(&self, f: u64) -> Result<&StationaryCov> {
        Ok(&self.gamma[self.family_slot(f)?])
    }
}

/// Outcome of the wide-sense locally stationary factorization check
/// ([`PclsModel::silverman_check`]).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SilvermanReport {
    /// Largest relative deviation from the factorization identity over all
    /// checked point pairs.
    pub max_rel_dev: f64,
    /// Number of pair combinations actually compared.
    pub checked: usize,
    /// Combinations skipped because a covariance was too small to divide by.
    pub skipped: usize,
}

/// A covariance matrix materialized on a time grid, with its measured
/// spectral floor and repair status.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    grid: Vec<f64>,
    values: DMatrix<f64>,
    min_eigenvalue: f64,
    repaired: bool,
}

impl CovMatrix {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn repaired(&self) -> bool {
        self.repaired
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Writes the matrix as CSV: header row = grid points, then one row of
    /// values per grid point.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let header = self
            .grid
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{header}")?;
        let n = self.grid.len();
        for i in 0..n {
            let row = (0..n)
                .map(|k| self.values[(i, k)].to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// JSON form with the metadata embedded.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.grid.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|k| self.values[(i, k)]).collect())
            .collect();
        json!({
            "grid": self.grid,
            "min_eigenvalue": self.min_eigenvalue,
            "repaired": self.repaired,
            "values": rows,
        })
    }
}

/// The full model: partition plus at least one of the two components.
#[derive(Debug, Clone)]
pub struct PclsModel {
    partition: Partition,
    ls: Option<LsComponent>,
    pc: Option<PcComponent>,
}

impl PclsModel {
    /// Builds a model. The periodically correlated part is constructed from
    /// its sequence over the same partition. Unless `ls.aperiodic` is set,
    /// the mixture lists must have exactly the partition period.
    pub fn new(
        partition: Partition,
        ls: Option<LsComponent>,
        pc_seq: Option<PcSequence>,
    ) -> Result<Self> {
        if ls.is_none() && pc_seq.is_none() {
            return Err(PclsError::Domain(
                "model needs at least one component".into(),
            ));
        }
        if let Some(ls) = &ls {
            if !ls.aperiodic() && ls.n_families() != partition.period() {
                return Err(PclsError::Domain(format!(
                    "periodic psi/gamma lists must have length {} (the partition period), got {}",
                    partition.period(),
                    ls.n_families()
                )));
            }
        }
        let pc = match pc_seq {
            Some(seq) => Some(PcComponent::new(partition.clone(), seq)?),
            None => None,
        };
        Ok(Self { partition, ls, pc })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn ls(&self) -> Option<&LsComponent> {
        self.ls.as_ref()
    }

    pub fn pc(&self) -> Option<&PcComponent> {
        self.pc.as_ref()
    }

    pub fn psi_at(&self, f: u64) -> Result<&ExpConvexCov> {
        self.ls_component()?.psi_at(f)
    }

    pub fn gamma_at(&self, f: u64) -> Result<&StationaryCov> {
        self.ls_component()?.gamma_at(f)
    }

    fn ls_component(&self) -> Result<&LsComponent> {
        self.ls
            .as_ref()
            .ok_or_else(|| PclsError::Domain("model has no locally stationary component".into()))
    }

    /// Covariance of the locally stationary mixture (0 when absent).
    pub fn ls_cov(&self, t: f64, u: f64) -> Result<f64> {
        let Some(ls) = &self.ls else { return Ok(0.0) };
        let bt = self.partition.block_of(t)?;
        let bu = self.partition.block_of(u)?;
        let (lo, hi) = if bt <= bu { (bt, bu) } else { (bu, bt) };
        if hi - lo >= 2 {
            return Ok(0.0);
        }
        let v = t + u;
        let d = t - u;
        if lo == hi {
            let mut acc = ls.psi_at(lo)?.eval(v)? * ls.gamma_at(lo)?.eval(d);
            if lo >= 2 {
                acc += ls.psi_at(lo - 1)?.eval(v)? * ls.gamma_at(lo - 1)?.eval(d);
            }
            Ok(acc)
        } else {
            Ok(ls.psi_at(lo)?.eval(v)? * ls.gamma_at(lo)?.eval(d))
        }
    }

    /// Covariance of the periodically correlated part (0 when absent).
    pub fn xp_cov(&self, t: f64, u: f64) -> Result<f64> {
        match &self.pc {
            Some(pc) => pc.xp_cov(t, u),
            None => Ok(0.0),
        }
    }

    /// Covariance of the sum: `ls_cov + xp_cov` (the parts are independent).
    pub fn total_cov(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.ls_cov(t, u)? + self.xp_cov(t, u)?)
    }

    /// True when any stationary covariance in the mixture has an absolutely
    /// continuous spectrum (frequency-domain reconstructions of such models
    /// carry quadrature error; purely atomic models reconstruct exactly).
    pub fn has_density_spectrum(&self) -> bool {
        self.ls
            .as_ref()
            .map(|l| l.gamma.iter().any(|g| !g.is_atomic()))
            .unwrap_or(false)
    }

    /// Materializes `total_cov` on a grid (strictly increasing, positive,
    /// at most [`MAX_GRID_POINTS`] points) and measures its smallest
    /// eigenvalue.
    ///
    /// * `min eig < -tol * trace` → the model is rejected as non-PSD;
    /// * otherwise, if `repair` is set and the minimum is negative, the
    ///   spectrum is clipped at zero and the matrix re-symmetrized;
    /// * without `repair` the matrix is returned as computed.
    pub fn cov_matrix(&self, grid: &[f64], repair: bool, tol: f64) -> Result<CovMatrix> {
        if grid.is_empty() {
            return Err(PclsError::Domain("covariance grid is empty".into()));
        }
        if grid.len() > MAX_GRID_POINTS {
            return Err(PclsError::Domain(format!(
                "covariance grid has {} points, cap is {MAX_GRID_POINTS}",
                grid.len()
            )));
        }
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(PclsError::Domain(format!(
                "PSD tolerance must be a finite nonnegative number, got {tol}"
            )));
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

        let n = grid.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|k| self.total_cov(grid[i], grid[k]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = DMatrix::zeros(n, n);
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let k = i + off;
                values[(i, k)] = v;
                values[(k, i)] = v;
            }
        }

        let min = linalg::min_eigenvalue(&values)?;
        let trace = values.trace();
        if min < -tol * trace.abs() {
            return Err(PclsError::NonPsd {
                min_eigenvalue: min,
                trace,
                tol,
            });
        }
        let mut repaired = false;
        let (values, min_eigenvalue) = if repair && min < 0.0 {
            let (clipped, _) = linalg::clip_to_psd(&values)?;
            let new_min = linalg::min_eigenvalue(&clipped)?;
            if new_min < -REPAIR_RESIDUAL_TOL_REL * clipped.trace().abs() {
                return Err(PclsError::Numeric(format!(
                    "eigenvalue clipping left min eigenvalue {new_min}"
                )));
            }
            repaired = true;
            (clipped, new_min)
        } else {
            (values, min)
        };
        Ok(CovMatrix {
            grid: grid.to_vec(),
            values,
            min_eigenvalue,
            repaired,
        })
    }

    /// Wide-sense locally stationary factorization check (after Silverman):
    /// within one block, on point pairs with a single active mixture term
    /// (block 1 by construction), the covariance factors as an envelope of
    /// the sum `t+u` times `γ_k(t−u)`. For every two pairs with equal sums,
    /// the cross-multiplied identity
    /// `ls_cov(t,u) γ_k(t'−u') = ls_cov(t',u') γ_k(t−u)` is evaluated and
    /// the largest relative deviation returned. Pairs with near-zero
    /// covariance are skipped and counted.
    pub fn silverman_check(&self, block: u64, pairs: &[(f64, f64)]) -> Result<SilvermanReport> {
        let ls = self.ls_component()?;
        if block == 0 {
            return Err(PclsError::Domain("block indices are 1-based".into()));
        }
        for &(t, u) in pairs {
            if self.partition.block_of(t)? != block || self.partition.block_of(u)? != block {
                return Err(PclsError::Domain(format!(
                    "point pair ({t}, {u}) is not inside block {block}"
                )));
            }
        }
        let gamma = ls.gamma_at(block)?;
        let sum_tol = FACTORIZATION_SUM_TOL_REL * self.partition.span();
        let mut checked = 0usize;
        let mut skipped = 0usize;
        let mut max_rel_dev = 0.0f64;
        for a in 0..pairs.len() {
            for b in (a + 1)..pairs.len() {
                let (t1, u1) = pairs[a];
                let (t2, u2) = pairs[b];
                if ((t1 + u1) - (t2 + u2)).abs() > sum_tol {
                    continue;
                }
                let c1 = self.ls_cov(t1, u1)?;
                let c2 = self.ls_cov(t2, u2)?;
                if c1.abs() < FACTORIZATION_DEGENERATE_ABS
                    || c2.abs() < FACTORIZATION_DEGENERATE_ABS
                {
                    skipped += 1;
                    continue;
                }
                let lhs = c1 * gamma.eval(t2 - u2);
                let rhs = c2 * gamma.eval(t1 - u1);
                let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
                let dev = (lhs - rhs).abs() / scale;
                checked += 1;
                max_rel_dev = max_rel_dev.max(dev);
            }
        }
        Ok(SilvermanReport {
            max_rel_dev,
            checked,
            skipped,
        })
    }
}
