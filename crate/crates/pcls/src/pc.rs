//! Periodically correlated block component.
//!
//! A period-`T` covariance sequence `gamma_{jk}` (satisfying
//! `gamma_{j+T,k+T} = gamma_{jk}`) assigns second moments to the per-block
//! aggregates. Each aggregate is spread over its block by a random interval
//! measure whose within-block kernel is the harmonic mean of interval
//! lengths:
//!
//! * same block: `cov(M_j(A), M_j(B)) = 2|A||B| / (a_j (|A|+|B|)) * gamma_{jj}`,
//! * different blocks: `cov(M_j(A), M_k(B)) = |A||B| / (a_j a_k) * gamma_{jk}`.
//!
//! Evaluating at growing intervals `(s_{j-1}, t]` gives the continuous-time
//! covariance of this component. The harmonic-mean kernel is PSD within a
//! block (it is a Gram of exponentials: `2ab/(a+b) = 2 int_0^inf e^{-s/a}
//! e^{-s/b} ds`), but the *cross-block* product form is not automatically
//! PSD jointly with it; `global_psd_check` measures that per model and grid
//! instead of assuming it.

use nalgebra::DMatrix;

use crate::error::{PclsError, Result};
use crate::linalg;
use crate::partition::Partition;

/// Relative PSD tolerance for sequence-construction checks.
pub const SEQ_PSD_TOL_REL: f64 = 1e-10;

/// Relative tolerance for symmetry / periodic-consistency checks on
/// user-supplied base matrices.
pub const BASE_CONSISTENCY_TOL_REL: f64 = 1e-12;

/// Relative alignment tolerance for grid-cell interval endpoints.
pub const ALIGN_TOL_REL: f64 = 1e-9;

/// A period-`T` covariance sequence over block indices `1, 2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum PcSequence {
    /// `gamma_{jk} = sigma_{(j-1) mod T + 1} sigma_{(k-1) mod T + 1} rho^{|j-k|}`.
    /// Provably PSD for `|rho| < 1` (diagonal scaling of an AR(1) Gram).
    Parametric { sigma: Vec<f64>, rho: f64 },
    /// A Hermitian PSD base matrix over `periods * T` consecutive indices,
    /// extended periodically; entries whose index pair cannot be shifted
    /// into the base window are zero (a banded sequence).
    Explicit { base: DMatrix<f64>, periods: usize },
}

impl PcSequence {
    /// Sequence period `T`.
    pub fn period(&self) -> usize {
        match self {
            PcSequence::Parametric { sigma, .. } => sigma.len(),
            PcSequence::Explicit { base, periods } => base.nrows() / periods.max(&1),
        }
    }

    /// Largest magnitude the sequence attains (scale for residual checks).
    pub fn max_abs(&self) -> f64 {
        match self {
            PcSequence::Parametric { sigma, .. } => {
                let m = sigma.iter().cloned().fold(0.0f64, f64::max);
                m * m
            }
            PcSequence::Explicit { base, .. } => {
                base.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()))
            }
        }
    }

    /// Covariance `gamma_{jk}` for 1-based absolute indices.
    pub fn value(&self, j: u64, k: u64) -> f64 {
        match self {
            PcSequence::Parametric { sigma, rho } => {
                let t = sigma.len() as u64;
                let d = j.abs_diff(k);
                if d > i32::MAX as u64 {
                    return 0.0;
                }
                let sj = sigma[((j - 1) % t) as usize];
                let sk = sigma[((k - 1) % t) as usize];
                sj * sk * rho.powi(d as i32)
            }
            PcSequence::Explicit { base, periods: _ } => {
                let w = base.nrows() as u64;
                let t = self.period() as u64;
                if j.abs_diff(k) >= w {
                    return 0.0;
                }
                // Shift both indices by whole periods so the smaller one
                // lands on its residue inside the base window.
                let m = j.min(k);
                let offset = (m - 1) % t;
                let shift = m - 1 - offset;
                let j2 = j - shift;
                let k2 = k - shift;
                if j2 > w || k2 > w {
                    return 0.0;
                }
                base[((j2 - 1) as usize, (k2 - 1) as usize)]
            }
        }
    }

    /// Construction-time validation: parameter ranges, base-matrix
    /// consistency, and a PSD check of the sequence Gram over the first
    /// `4 T` indices.
    pub fn validate(&self) -> Result<()> {
        match self {
            PcSequence::Parametric { sigma, rho } => {
                if sigma.is_empty() {
                    return Err(PclsError::Domain("sigma list must be nonempty".into()));
                }
                for (i, &s) in sigma.iter().enumerate() {
                    if !s.is_finite() || s <= 0.0 {
                        return Err(PclsError::Domain(format!(
                            "sigma #{} must be positive and finite, got {s}",
                            i + 1
                        )));
                    }
                }
                if !rho.is_finite() || rho.abs() >= 1.0 {
                    return Err(PclsError::Domain(format!(
                        "rho must lie in (-1, 1), got {rho}"
                    )));
                }
            }
            PcSequence::Explicit { base, periods } => {
                if *periods == 0 {
                    return Err(PclsError::Domain("periods must be at least 1".into()));
                }
                if base.nrows() != base.ncols() || base.is_empty() {
                    return Err(PclsError::Domain(format!(
                        "base matrix must be square and nonempty, got {}x{}",
                        base.nrows(),
                        base.ncols()
                    )));
                }
                if base.nrows() % periods != 0 {
                    return Err(PclsError::Domain(format!(
                        "base size {} is not a multiple of periods {}",
                        base.nrows(),
                        periods
                    )));
                }
                if base.iter().any(|x| !x.is_finite()) {
                    return Err(PclsError::Domain(
                        "base matrix has non-finite entries".into(),
                    ));
                }
                let scale = self.max_abs().max(f64::MIN_POSITIVE);
                let t = self.period();
                let w = base.nrows();
                for i in 0..w {
                    for k in (i + 1)..w {
                        if (base[(i, k)] - base[(k, i)]).abs() > BASE_CONSISTENCY_TOL_REL * scale {
                            return Err(PclsError::Domain(format!(
                                "base matrix is not symmetric at ({}, {})",
                                i + 1,
                                k + 1
                            )));
                        }
                    }
                }
                for i in 0..w.saturating_sub(t) {
                    for k in 0..w.saturating_sub(t) {
                        if (base[(i, k)] - base[(i + t, k + t)]).abs()
                            > BASE_CONSISTENCY_TOL_REL * scale
                        {
                            return Err(PclsError::Domain(format!(
                                "base matrix is not period-consistent at ({}, {})",
                                i + 1,
                                k + 1
                            )));
                        }
                    }
                }
                let min = linalg::min_eigenvalue(base)?;
                let trace = base.trace();
                if min < -SEQ_PSD_TOL_REL * trace.abs() {
                    return Err(PclsError::NonPsd {
                        min_eigenvalue: min,
                        trace,
                        tol: SEQ_PSD_TOL_REL,
                    });
                }
            }
        }
        // Extended-sequence spot check over the first 4T indices.
        let t = self.period() as u64;
        let n = (4 * t) as usize;
        let gram = DMatrix::from_fn(n, n, |i, k| self.value(i as u64 + 1, k as u64 + 1));
        let min = linalg::min_eigenvalue(&gram)?;
        let trace = gram.trace();
        if min < -SEQ_PSD_TOL_REL * trace.abs() {
            return Err(PclsError::NonPsd {
                min_eigenvalue: min,
                trace,
                tol: SEQ_PSD_TOL_REL,
            });
        }
        Ok(())
    }
}

/// Outcome of a grid PSD verification.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

/// The periodically correlated component: a partition plus a covariance
/// sequence of matching period.
#[derive(Debug, Clone, PartialEq)]
pub struct PcComponent {
    partition: Partition,
    seq: PcSequence,
}

impl PcComponent {
    pub fn new(partition: Partition, seq: PcSequence) -> Result<Self> {
        seq.validate()?;
        if seq.period() != partition.period() {
            return Err(PclsError::Domain(format!(
                "sequence period {} does not match partition period {}",
                seq.period(),
                partition.period()
            )));
        }
        Ok(Self { partition, seq })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn sequence(&self) -> &PcSequence {
        &self.seq
    }

    fn check_interval(&self, j: u64, iv: (f64, f64)) -> Result<f64> {
        let (lo, hi) = iv;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(PclsError::Domain(format!(
                "interval ({lo}, {hi}] is empty or not finite"
            )));
        }
        let tol = self.partition.tie_tol();
        let left = self.partition.endpoint(j - 1);
        let right = self.partition.endpoint(j);
        if lo < left - tol || hi > right + tol {
            return Err(PclsError::Domain(format!(
                "interval ({lo}, {hi}] is not contained in block {j} = ({left}, {right}]"
            )));
        }
        Ok(hi - lo)
    }

    /// Covariance of the interval measure evaluated on `A` (a subinterval of
    /// block `j`) and `B` (a subinterval of block `k`).
    pub fn measure_cov(&self, j: u64, a: (f64, f64), k: u64, b: (f64, f64)) -> Result<f64> {
        let la = self.check_interval(j, a)?;
        let lb = self.check_interval(k, b)?;
        let gjk = self.seq.value(j, k);
        if j == k {
            let aj = self.partition.length_of(j);
            Ok(2.0 * la * lb / (aj * (la + lb)) * gjk)
        } else {
            let aj = self.partition.length_of(j);
            let ak = self.partition.length_of(k);
            Ok(la * lb / (aj * ak) * gjk)
        }
    }

    /// Continuous-time covariance of this component at `(t, u)`.
    pub fn xp_cov(&self, t: f64, u: f64) -> Result<f64> {
        let (m, at) = self.partition.within_block(t)?;
        let (n, au) = self.partition.within_block(u)?;
        let gmn = self.seq.value(m, n);
        if m == n {
            let am = self.partition.length_of(m);
            Ok(2.0 * at * au / (am * (at + au)) * gmn)
        } else {
            let am = self.partition.length_of(m);
            let an = self.partition.length_of(n);
            Ok(at * au / (am * an) * gmn)
        }
    }

    /// Gram matrix of `xp_cov` over a time grid.
    pub fn xp_gram(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                let v = self.xp_cov(grid[i], grid[k])?;
                m[(i, k)] = v;
                m[(k, i)] = v;
            }
        }
        Ok(m)
    }

    /// Assembles the covariance of the component over a grid and reports the
    /// smallest eigenvalue against `-tol * trace`. The cross-block structure
    /// carries no general PSD guarantee, so this is a measurement, not an
    /// assertion.
    pub fn global_psd_check(&self, grid: &[f64], tol: f64) -> Result<PsdReport> {
        if grid.is_empty() {
            return Err(PclsError::Domain("psd check needs a nonempty grid".into()));
        }
        let gram = self.xp_gram(grid)?;
        let min = linalg::min_eigenvalue(&gram)?;
        let trace = gram.trace();
        Ok(PsdReport {
            pass: min >= -tol * trace.abs(),
            min_eigenvalue: min,
            trace,
        })
    }

    /// Gram matrix of the interval measure over `(block, interval)` pairs.
    pub fn measure_gram(&self, intervals: &[(u64, (f64, f64))]) -> Result<DMatrix<f64>> {
        let n = intervals.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i..n {
                let (ji, ivi) = intervals[i];
                let (jk, ivk) = intervals[k];
                let v = self.measure_cov(ji, ivi, jk, ivk)?;
                m[(i, k)] = v;
                m[(k, i)] = v;
            }
        }
        Ok(m)
    }

    /// Covariance of cumulative measure values `M_j((s_{j-1}, s_{j-1}+x])`
    /// at within-block offsets `x` in `(0, a_j]`. First differences of a
    /// Gaussian vector with this covariance represent the measure on a cell
    /// grid.
    pub fn cumulative_gram(&self, block: u64, offsets: &[f64]) -> Result<DMatrix<f64>> {
        let aj = self.partition.length_of(block);
        let tol = self.partition.tie_tol();
        for &x in offsets {
            if !(x > 0.0 && x <= aj + tol) {
                return Err(PclsError::Domain(format!(
                    "offset {x} outside (0, {aj}] for block {block}"
                )));
            }
        }
        let gjj = self.seq.value(block, block);
        let n = offsets.len();
        Ok(DMatrix::from_fn(n, n, |i, k| {
            let (x, y) = (offsets[i], offsets[k]);
            2.0 * x * y / (aj * (x + y)) * gjj
        }))
    }
}

/// A realized interval measure of one block on a cell grid: increments over
/// the cells `(edges[i], edges[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureGrid {
    block: u64,
    edges: Vec<f64>,
    increments: Vec<f64>,
}

impl MeasureGrid {
    pub fn new(block: u64, edges: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || increments.len() + 1 != edges.len() {
            return Err(PclsError::Domain(format!(
                "need n+1 edges for n increments, got {} edges, {} increments",
                edges.len(),
                increments.len()
            )));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PclsError::Domain(
                "edges must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            block,
            edges,
            increments,
        })
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    fn align_tol(&self) -> f64 {
        ALIGN_TOL_REL * (self.edges[self.edges.len() - 1] - self.edges[0])
    }

    fn edge_index(&self, x: f64) -> Result<usize> {
        let tol = self.align_tol();
        self.edges
            .iter()
            .position(|&e| (e - x).abs() <= tol)
            .ok_or_else(|| {
                PclsError::Alignment(format!(
                    "endpoint {x} does not sit on a cell edge of block {}",
                    self.block
                ))
            })
    }

    /// Measure of a grid-aligned interval `(a.0, a.1]`.
    pub fn value(&self, a: (f64, f64)) -> Result<f64> {
        let i0 = self.edge_index(a.0)?;
        let i1 = self.edge_index(a.1)?;
        if i0 >= i1 {
            return Err(PclsError::Domain(format!(
                "interval ({}, {}] is empty on this grid",
                a.0, a.1
            )));
        }
        Ok(self.increments[i0..i1].iter().sum())
    }

    /// Total measure of the represented span.
    pub fn total(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Projection onto a grid-aligned interval: increments outside it are
    /// zeroed. Projecting twice over `A` then `B` equals projecting over
    /// the intersection.
    pub fn project(&self, a: (f64, f64)) -> Result<MeasureGrid> {
        let i0 = self.edge_index(a.0)?;
        let i1 = self.edge_index(a.1)?;
        if i0 > i1 {
            return Err(PclsError::Domain(format!(
                "interval ({}, {}] is reversed on this grid",
                a.0, a.1
            )));
        }
        let mut inc = vec![0.0; self.increments.len()];
        inc[i0..i1].copy_from_slice(&self.increments[i0..i1]);
        Ok(MeasureGrid {
            block: self.block,
            edges: self.edges.clone(),
            increments: inc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn default_pc() -> PcComponent {
        let p = Partition::new(vec![1.0, 2.0]).unwrap();
        let seq = PcSequence::Parametric {
            sigma: vec![1.0, 2.0],
            rho: 0.5,
        };
        PcComponent::new(p, seq).unwrap()
    }

    #[test]
    fn sequence_validation() {
        assert!(PcSequence::Parametric {
            sigma: vec![1.0],
            rho: 1.5
        }
        .validate()
        .is_err());
        assert!(PcSequence::Parametric {
            sigma: vec![-1.0],
            rho: 0.5
        }
        .validate()
        .is_err());
        assert!(PcSequence::Parametric {
            sigma: vec![1.0, 2.0],
            rho: 0.5
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn explicit_sequence_checks_consistency() {
        // Period-2 modulated MA(1) over two periods: symmetric, periodic,
        // PSD, banded.
        let base = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.16, 0.8, 0.0, 0.0, //
                0.8, 4.64, 0.8, 0.0, //
                0.0, 0.8, 1.16, 0.8, //
                0.0, 0.0, 0.8, 4.64,
            ],
        );
        let seq = PcSequence::Explicit {
            base: base.clone(),
            periods: 2,
        };
        assert_eq!(seq.period(), 2);
        seq.validate().unwrap();
        // Period shift is exact; beyond the window the sequence vanishes.
        assert_eq!(seq.value(1, 2), seq.value(3, 4));
        assert_eq!(seq.value(2, 3), seq.value(4, 5));
        assert_eq!(seq.value(1, 2), 0.8);
        assert_eq!(seq.value(1, 6), 0.0);

        let mut asym = base.clone();
        asym[(0, 1)] = 0.9;
        assert!(PcSequence::Explicit {
            base: asym,
            periods: 2
        }
        .validate()
        .is_err());

        let mut aper = base.clone();
        aper[(2, 2)] = 2.0; // breaks base[j+T,k+T] = base[j,k]
        aper[(0, 0)] = 2.0001;
        assert!(PcSequence::Explicit {
            base: aper,
            periods: 2
        }
        .validate()
        .is_err());
    }

    #[test]
    fn parametric_values_and_periodicity() {
        let seq = PcSequence::Parametric {
            sigma: vec![1.0, 2.0],
            rho: 0.5,
        };
        assert_relative_eq!(seq.value(1, 1), 1.0);
        assert_relative_eq!(seq.value(2, 2), 4.0);
        assert_relative_eq!(seq.value(1, 2), 1.0); // 1*2*0.5
                                                   // Exact periodicity, including across many periods.
        for (j, k) in [(1u64, 2u64), (2, 5), (1, 7), (3, 3)] {
            assert_eq!(seq.value(j, k), seq.value(j + 2, k + 2));
            assert_eq!(seq.value(j + 20, k + 20), seq.value(j, k));
        }
    }

    #[test]
    fn xp_cov_examples() {
        let pc = default_pc();
        // Block 2 midpoint against itself.
        assert_relative_eq!(pc.xp_cov(2.0, 2.0).unwrap(), 2.0, max_relative = 1e-14);
        // Across blocks 1 and 2.
        assert_relative_eq!(pc.xp_cov(0.5, 2.0).unwrap(), 0.25, max_relative = 1e-14);
        // At block right endpoints the variance collapses to the sequence.
        for m in 1..=5u64 {
            let s_m = pc.partition().endpoint(m);
            assert_relative_eq!(
                pc.xp_cov(s_m, s_m).unwrap(),
                pc.sequence().value(m, m),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn measure_cov_examples() {
        let p = Partition::new(vec![4.0]).unwrap();
        let pc = PcComponent::new(
            p,
            PcSequence::Parametric {
                sigma: vec![1.0],
                rho: 0.5,
            },
        )
        .unwrap();
        // Whole block against itself returns the sequence variance.
        assert_relative_eq!(
            pc.measure_cov(1, (0.0, 4.0), 1, (0.0, 4.0)).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        // |A| = 1 vs |B| = 4 in one block of length 4: 2*4/(4*5) = 0.4,
        // with implied correlation 0.8.
        let c = pc.measure_cov(1, (0.0, 1.0), 1, (0.0, 4.0)).unwrap();
        assert_relative_eq!(c, 0.4, max_relative = 1e-14);
        let va = pc.measure_cov(1, (0.0, 1.0), 1, (0.0, 1.0)).unwrap();
        let vb = pc.measure_cov(1, (0.0, 4.0), 1, (0.0, 4.0)).unwrap();
        assert_relative_eq!(c / (va * vb).sqrt(), 0.8, max_relative = 1e-14);

        // Cross-block with B = B_k: scales by |A| / a_j.
        let pc = default_pc();
        let c = pc.measure_cov(1, (0.0, 0.5), 2, (1.0, 3.0)).unwrap();
        assert_relative_eq!(c, 0.5 * pc.sequence().value(1, 2), max_relative = 1e-14);

        // Containment is enforced.
        assert!(pc.measure_cov(1, (0.0, 1.5), 1, (0.0, 1.0)).is_err());
        assert!(pc.measure_cov(2, (0.5, 2.0), 2, (1.0, 2.0)).is_err());
        assert!(pc.measure_cov(1, (0.5, 0.5), 1, (0.0, 1.0)).is_err());
    }

    /// The component covariance assembled on the documented uniform grid is
    /// genuinely slightly indefinite: the same-block harmonic kernel is PSD,
    /// but the cross-block product coupling pulls one eigenvalue a little
    /// below zero. The check reports the measured value honestly.
    #[test]
    fn global_check_on_dense_grid_reports_small_negative_eigenvalue() {
        let pc = default_pc();
        let grid: Vec<f64> = (1..=48).map(|i| i as f64 * 0.125).collect();
        let rep = pc.global_psd_check(&grid, 1e-8).unwrap();
        assert!(!rep.pass);
        assert_relative_eq!(rep.min_eigenvalue, -9.135_326e-3, max_relative = 1e-5);
        assert_relative_eq!(rep.trace, 77.0, max_relative = 1e-12);
        // At a tolerance matching the measured defect the check passes.
        let rep = pc.global_psd_check(&grid, 1.2e-4).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn global_check_passes_within_one_block_and_for_diagonal_sequences() {
        let pc = default_pc();
        // Single block: harmonic-mean kernel, PSD up to round-off.
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let rep = pc.global_psd_check(&grid, 1e-10).unwrap();
        assert!(rep.pass, "min eig {}", rep.min_eigenvalue);

        // Diagonal sequence (rho = 0): block-diagonal covariance.
        let p = Partition::new(vec![1.0, 2.0]).unwrap();
        let diag = PcComponent::new(
            p,
            PcSequence::Parametric {
                sigma: vec![1.0, 2.0],
                rho: 0.0,
            },
        )
        .unwrap();
        let grid: Vec<f64> = (1..=48).map(|i| i as f64 * 0.125).collect();
        let rep = diag.global_psd_check(&grid, 1e-10).unwrap();
        assert!(rep.pass, "min eig {}", rep.min_eigenvalue);
    }

    #[test]
    fn projection_algebra() {
        let edges: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
        let m = MeasureGrid::new(1, edges, vec![1.0, 2.0, 3.0, 4.0]).unwrap();

        // Identity on the whole span.
        let whole = m.project((0.0, 1.0)).unwrap();
        assert_eq!(whole.increments(), m.increments());

        // Composition equals intersection: (0, 0.5] then (0.25, 1] = (0.25, 0.5].
        let ab = m.project((0.0, 0.5)).unwrap().project((0.25, 1.0)).unwrap();
        let inter = m.project((0.25, 0.5)).unwrap();
        assert_eq!(ab.increments(), inter.increments());

        // Idempotence.
        let a = m.project((0.0, 0.5)).unwrap();
        assert_eq!(a.project((0.0, 0.5)).unwrap().increments(), a.increments());

        // Additivity over disjoint aligned intervals.
        let left = m.value((0.0, 0.5)).unwrap();
        let right = m.value((0.5, 1.0)).unwrap();
        assert_relative_eq!(left + right, m.total());

        // Misaligned endpoints are rejected.
        assert!(m.project((0.0, 0.3)).is_err());
        assert!(m.value((0.1, 0.5)).is_err());
    }

    proptest! {
        /// Same-block correlation is 2 sqrt(|A||B|) / (|A|+|B|): one exactly
        /// at equal lengths, strictly less otherwise, and decreasing as the
        /// length ratio drifts from one.
        #[test]
        fn measure_correlation_shape(la in 0.01f64..1.0, lb in 0.01f64..1.0) {
            let p = Partition::new(vec![1.0]).unwrap();
            let pc = PcComponent::new(p, PcSequence::Parametric { sigma: vec![1.3], rho: 0.0 }).unwrap();
            let c = pc.measure_cov(1, (0.0, la), 1, (0.0, lb)).unwrap();
            let va = pc.measure_cov(1, (0.0, la), 1, (0.0, la)).unwrap();
            let vb = pc.measure_cov(1, (0.0, lb), 1, (0.0, lb)).unwrap();
            let corr = c / (va * vb).sqrt();
            let want = 2.0 * (la * lb).sqrt() / (la + lb);
            prop_assert!((corr - want).abs() <= 1e-12);
            if (la - lb).abs() <= 1e-12 {
                prop_assert!((corr - 1.0).abs() <= 1e-12);
            } else {
                prop_assert!(corr < 1.0);
            }
        }

        /// Harmonic-mean kernel Grams over random length sets are PSD.
        #[test]
        fn harmonic_kernel_gram_psd(
            lens in proptest::collection::vec(0.01f64..1.0, 2..50),
        ) {
            let n = lens.len();
            let g = DMatrix::from_fn(n, n, |i, k| {
                2.0 * lens[i] * lens[k] / (lens[i] + lens[k])
            });
            let min = crate::linalg::min_eigenvalue(&g).unwrap();
            prop_assert!(min >= -1e-12 * g.trace(), "min {} trace {}", min, g.trace());
        }

        /// The continuous-time covariance is invariant under a whole-period
        /// shift of both arguments.
        #[test]
        fn xp_cov_period_shift(
            t in 0.01f64..5.9,
            u in 0.01f64..5.9,
            k in 1u64..4,
        ) {
            let pc = default_pc();
            let s = pc.partition().span();
            let base = pc.xp_cov(t, u).unwrap();
            let shifted = pc.xp_cov(t + k as f64 * s, u + k as f64 * s).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-12 * base.abs().max(1.0),
                "base {} shifted {}", base, shifted);
        }

        /// Correlation decreases strictly in r + 1/r where r is the length
        /// ratio.
        #[test]
        fn correlation_monotone_in_ratio(r1 in 1.01f64..10.0, r2 in 1.01f64..10.0) {
            prop_assume!((r1 - r2).abs() > 1e-9);
            let corr = |r: f64| 2.0 * r.sqrt() / (1.0 + r);
            let (small, large) = if r1 + 1.0 / r1 < r2 + 1.0 / r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(corr(small) > corr(large));
        }
    }
}
