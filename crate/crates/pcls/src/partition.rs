//! Block partition of the positive half-line.
//!
//! A list of positive lengths `a_1..a_T` tiles `(0, inf)` into half-open
//! blocks `B_j = (s_{j-1}, s_j]` that repeat with period `T`: block `j + T`
//! has the same length as block `j`, and endpoints satisfy
//! `s_{j+T} = s_j + S` with `S = a_1 + .. + a_T`. Block indices are 1-based.
//! A point sitting exactly on an endpoint `s_j` belongs to block `j` (the
//! block ending there), and a relative tie tolerance absorbs float dust
//! around endpoints.

use crate::error::{PclsError, Result};

/// Relative tolerance (times the period span `S`) for deciding whether a
/// point sits on a block endpoint.
pub const ENDPOINT_TIE_REL: f64 = 1e-12;

/// Beyond this many periods the float grid is too coarse to address blocks
/// unambiguously, so lookups are rejected.
const MAX_PERIOD_INDEX: f64 = 4.0e15;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    lengths: Vec<f64>,
    /// cum[i] = a_1 + .. + a_i with cum[0] = 0; cum[T] = S.
    cum: Vec<f64>,
    total: f64,
}

impl Partition {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(PclsError::Domain(
                "partition needs at least one block length".into(),
            ));
        }
        for (i, &a) in lengths.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(PclsError::Domain(format!(
                    "block length #{} must be positive and finite, got {a}",
                    i + 1
                )));
            }
        }
        let mut cum = Vec::with_capacity(lengths.len() + 1);
        cum.push(0.0);
        let mut s = 0.0;
        for &a in &lengths {
            s += a;
            cum.push(s);
        }
        Ok(Self {
            lengths,
            cum,
            total: s,
        })
    }

    /// Number of blocks per period, `T`.
    pub fn period(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Length of one full period, `S`.
    pub fn span(&self) -> f64 {
        self.total
    }

    /// Absolute endpoint-tie tolerance used by lookups.
    pub fn tie_tol(&self) -> f64 {
        ENDPOINT_TIE_REL * self.total
    }

    /// Length of block `j` (1-based; periodic in `j`).
    pub fn length_of(&self, j: u64) -> f64 {
        self.lengths[((j - 1) % self.period() as u64) as usize]
    }

    /// Right endpoint `s_j`; `s_0 = 0`.
    pub fn endpoint(&self, j: u64) -> f64 {
        let t = self.period() as u64;
        let q = j / t;
        let r = j % t;
        q as f64 * self.total + self.cum[r as usize]
    }

    /// Index of the block containing `t`, with endpoint ties resolved to the
    /// block ending at the endpoint.
    pub fn block_of(&self, t: f64) -> Result<u64> {
        if !t.is_finite() || t <= 0.0 {
            return Err(PclsError::Domain(format!(
                "time must be positive and finite, got {t}"
            )));
        }
        let tol = self.tie_tol();
        let mut k = ((t - tol) / self.total).floor();
        if k < 0.0 {
            k = 0.0;
        }
        if k > MAX_PERIOD_INDEX {
            return Err(PclsError::Domain(format!(
                "time {t} too many periods out for exact block addressing"
            )));
        }
        let k = k as u64;
        let r = t - k as f64 * self.total;
        let tp = self.period();
        for i in 1..=tp {
            if r <= self.cum[i] + tol {
                return Ok(k * tp as u64 + i as u64);
            }
        }
        // r can exceed cum[T] only by float dust; assign to the last block.
        Ok((k + 1) * tp as u64)
    }

    /// Block index together with the within-block coordinate `t - s_{j-1}`,
    /// clamped into `(0, a_j]`.
    pub fn within_block(&self, t: f64) -> Result<(u64, f64)> {
        let j = self.block_of(t)?;
        let a_j = self.length_of(j);
        let rel = (t - self.endpoint(j - 1)).min(a_j);
        // block_of guarantees rel > 0 up to the tie tolerance; keep it positive.
        let rel = rel.max(self.tie_tol().min(a_j));
        Ok((j, rel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn part() -> Partition {
        Partition::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![1.0, 0.0]).is_err());
        assert!(Partition::new(vec![1.0, -2.0]).is_err());
        assert!(Partition::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn block_lookup_examples() {
        let p = part();
        assert_eq!(p.block_of(3.0).unwrap(), 2);
        assert_eq!(p.block_of(4.0).unwrap(), 3);
        assert!(p.block_of(0.0).is_err());
        assert!(p.block_of(-1.0).is_err());
    }

    #[test]
    fn within_block_examples() {
        let p = part();
        let (j, rel) = p.within_block(2.5).unwrap();
        assert_eq!(j, 2);
        assert_relative_eq!(rel, 1.5);
        let (j, rel) = p.within_block(1.0).unwrap();
        assert_eq!(j, 1);
        assert_relative_eq!(rel, 1.0);
        let (j, rel) = p.within_block(5.5).unwrap();
        assert_eq!(j, 4);
        assert_relative_eq!(rel, 1.5);
    }

    #[test]
    fn endpoints_belong_to_their_block() {
        let p = part();
        for j in 1..=10u64 {
            let s_j = p.endpoint(j);
            assert_eq!(p.block_of(s_j).unwrap(), j, "s_{j} = {s_j}");
            let (jj, rel) = p.within_block(s_j).unwrap();
            assert_eq!(jj, j);
            assert_relative_eq!(rel, p.length_of(j), max_relative = 1e-12);
        }
    }

    #[test]
    fn endpoint_ties_within_tolerance_resolve_left() {
        let p = part();
        let tol = p.tie_tol();
        // Just past s_1 = 1 but within the tie tolerance: still block 1.
        assert_eq!(p.block_of(1.0 + 0.5 * tol).unwrap(), 1);
        // Clearly past the tolerance: block 2.
        assert_eq!(p.block_of(1.0 + 10.0 * tol).unwrap(), 2);
    }

    #[test]
    fn periodic_structure_of_lengths_and_endpoints() {
        let p = part();
        assert_eq!(p.period(), 2);
        assert_relative_eq!(p.span(), 3.0);
        assert_relative_eq!(p.length_of(1), 1.0);
        assert_relative_eq!(p.length_of(4), 2.0);
        assert_relative_eq!(p.endpoint(0), 0.0);
        assert_relative_eq!(p.endpoint(2), 3.0);
        assert_relative_eq!(p.endpoint(5), 7.0); // 3 + 3 + 1
    }

    proptest! {
        /// Shifting by one period advances the block index by T and leaves
        /// the within-block coordinate unchanged, for points that keep clear
        /// of block endpoints.
        #[test]
        fn period_shift_property(
            lens in proptest::collection::vec(0.1f64..10.0, 1..5),
            frac in 1e-6f64..0.999_999,
            k in 0u64..50,
        ) {
            let p = Partition::new(lens).unwrap();
            let s = p.span();
            let t0 = frac * s + k as f64 * s;
            // Skip draws that land too close to an endpoint for a clean test.
            let j = p.block_of(t0).unwrap();
            let dist = (t0 - p.endpoint(j - 1)).min(p.endpoint(j) - t0).abs();
            prop_assume!(dist > 1e-9 * s);

            let (j0, r0) = p.within_block(t0).unwrap();
            let (j1, r1) = p.within_block(t0 + s).unwrap();
            prop_assert_eq!(j1, j0 + p.period() as u64);
            prop_assert!((r1 - r0).abs() <= 1e-9 * s.max(1.0));
        }

        /// Within-block coordinates always land in (0, a_j].
        #[test]
        fn within_block_range(
            lens in proptest::collection::vec(0.1f64..10.0, 1..5),
            t in 1e-9f64..100.0,
        ) {
            let p = Partition::new(lens).unwrap();
            let (j, rel) = p.within_block(t).unwrap();
            prop_assert!(rel > 0.0);
            prop_assert!(rel <= p.length_of(j) + p.tie_tol());
        }
    }
}
