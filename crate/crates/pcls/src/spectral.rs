//! Frequency-domain counterpart of the covariance: time-varying discrete
//! spectral masses for both components, and a reconstruction oracle that
//! recovers the covariance by summing the masses against the appropriate
//! phases.
//!
//! * The mixture part uses each family's stationary spectral measure `G_f`
//!   (exact atoms or a designed density lattice) scaled by the weight
//!   envelope: the mass list of the pair `(j, k)` holds
//!   `ψ_f(t+u) G_f(dλ)` for the families shared by the two blocks, and the
//!   covariance is `Σ e^{iλ(t−u)} · mass`.
//! * The measure part lifts the period-`T` covariance sequence to a
//!   `T`-variate stationary sequence and takes its discrete Fourier
//!   representation on `R = 2H+1` nodes `ν_r = 2πr/R` of `[0, 2π)`
//!   ([`PcSpectralLift`]). The per-pair masses are the lifted matrix
//!   entries with a residue phase, scaled by the same harmonic-mean or
//!   product factors as the time-domain formulas; the covariance is
//!   `Σ e^{iν(m−n)/T} · mass`.
//!
//! All spectral products conjugate their second argument; for the real
//! models built here both conventions coincide, and reconstructions are
//! checked to be real to [`IM_RESIDUE_ABS_TOL`].

use nalgebra::DMatrix;

use crate::error::{PclsError, Result};
use crate::linalg::{self, Complex64};
use crate::model::PclsModel;
use crate::pc::PcSequence;
use crate::stationary::{SpectralGridParams, SpectralMeasure};

/// Magnitudes of the lifted sequence below this fraction of its peak are
/// treated as converged when choosing the lift horizon.
pub const LIFT_DECAY_FLOOR: f64 = 1e-12;

/// Cap on the number of lift nodes (`R = 2H + 1`).
pub const LIFT_MAX_NODES: usize = 20_001;

/// The lift must reproduce the sequence it was built from to this fraction
/// of the sequence's largest magnitude.
pub const LIFT_RESIDUAL_TOL_REL: f64 = 1e-8;

/// Reconstructed covariances of real models must be real up to this
/// absolute imaginary residue.
pub const IM_RESIDUE_ABS_TOL: f64 = 1e-10;

/// Sign/conjugation convention recorded with every spectral report.
pub const PHASE_CONVENTION: &str =
    "conjugate-second-argument; measure-part phase exp(+i nu (m-n)/T)";

/// Discrete Fourier representation of a period-`T` covariance sequence:
/// Hermitian PSD mass matrices `F(ν_r)` over the block residues, built from
/// the `T`-variate stationary form of the sequence.
///
/// The per-pair masses `θ̃_{jk}(ν) = e^{−iν(p−q)/T} F_{pq}(ν)` (with `p, q`
/// the 1-based residues of `j, k`) satisfy
/// `Σ_r e^{iν_r (j−k)/T} θ̃_{jk}(ν_r) = γ_{jk}` for all block pairs within
/// the horizon, and are exactly period-shift invariant.
#[derive(Debug, Clone)]
pub struct PcSpectralLift {
    period: usize,
    /// Largest period separation the representation is valid for.
    horizon: usize,
    nodes: Vec<f64>,
    mats: Vec<DMatrix<Complex64>>,
    max_abs: f64,
    min_node_eigenvalue: f64,
    residual: f64,
}

impl PcSpectralLift {
    /// Builds the lift with a horizon covering `n_periods` of reconstruction
    /// plus the decay (parametric) or band width (explicit) of the sequence.
    pub fn build(seq: &PcSequence, n_periods: usize) -> Result<Self> {
        seq.validate()?;
        let t = seq.period();
        let decay_h = match seq {
            PcSequence::Parametric { rho, .. } => {
                if rho.abs() < f64::MIN_POSITIVE {
                    1
                } else {
                    (LIFT_DECAY_FLOOR.ln() / (t as f64 * rho.abs().ln())).ceil() as usize
                }
            }
            PcSequence::Explicit { periods, .. } => *periods,
        };
        let horizon = decay_h.max(n_periods.saturating_sub(1)).max(1);
        let r_nodes = 2 * horizon + 1;
        if r_nodes > LIFT_MAX_NODES {
            return Err(PclsError::Domain(format!(
                "lift needs {r_nodes} nodes (horizon {horizon}), cap is {LIFT_MAX_NODES}"
            )));
        }

        // Block-lag matrices M(h)[p-1, q-1] = gamma_{p + hT, q}, p,q = 1..T.
        // Negative lags are transposes: gamma_{p-hT, q} = gamma_{p, q+hT}.
        let lag_mat = |h: usize| -> DMatrix<f64> {
            DMatrix::from_fn(t, t, |p, q| {
                seq.value((p + 1 + h * t) as u64, (q + 1) as u64)
            })
        };
        let lags: Vec<DMatrix<f64>> = (0..=horizon).map(lag_mat).collect();

        let rf = r_nodes as f64;
        let nodes: Vec<f64> = (0..r_nodes)
            .map(|r| 2.0 * std::f64::consts::PI * r as f64 / rf)
            .collect();
        let mut mats = Vec::with_capacity(r_nodes);
        let mut min_node_eigenvalue = f64::INFINITY;
        for &nu in &nodes {
            let mut f = DMatrix::from_element(t, t, Complex64::new(0.0, 0.0));
            for (p, q) in itertools_square(t) {
                f[(p, q)] += Complex64::new(lags[0][(p, q)] / rf, 0.0);
            }
            for (h, m) in lags.iter().enumerate().skip(1) {
                let ang = nu * h as f64;
                let (s, c) = ang.sin_cos();
                let fwd = Complex64::new(c / rf, -s / rf);
                let bwd = Complex64::new(c / rf, s / rf);
                for (p, q) in itertools_square(t) {
                    // M(h) e^{-i nu h} + M(h)^T e^{+i nu h}
                    f[(p, q)] += fwd * m[(p, q)] + bwd * m[(q, p)];
                }
            }
            // Enforce Hermitian form, then clip to the PSD cone.
            let herm = DMatrix::from_fn(t, t, |p, q| (f[(p, q)] + f[(q, p)].conj()) * 0.5);
            let (clipped, min) = linalg::herm_clip_to_psd(&herm)?;
            min_node_eigenvalue = min_node_eigenvalue.min(min);
            mats.push(clipped);
        }

        let lift = Self {
            period: t,
            horizon,
            nodes,
            mats,
            max_abs: seq.max_abs(),
            min_node_eigenvalue,
            residual: 0.0,
        };

        // Verify the representation against the sequence it came from.
        let window = n_periods.max(2) * t;
        let mut residual = 0.0f64;
        for j in 1..=window as u64 {
            for k in 1..=window as u64 {
                let rec = lift.reconstruct_complex(j, k)?;
                let target = seq.value(j, k);
                residual = residual.max((rec - Complex64::new(target, 0.0)).norm());
            }
        }
        if residual > LIFT_RESIDUAL_TOL_REL * lift.max_abs {
            return Err(PclsError::Numeric(format!(
                "spectral lift residual {residual} exceeds {:e} of the sequence peak {}",
                LIFT_RESIDUAL_TOL_REL, lift.max_abs
            )));
        }
        Ok(Self { residual, ..lift })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Smallest per-node eigenvalue before clipping (diagnostic).
    pub fn min_node_eigenvalue(&self) -> f64 {
        self.min_node_eigenvalue
    }

    /// Measured round-trip residual of the construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Largest magnitude of the represented sequence.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    fn check_horizon(&self, j: u64, k: u64) -> Result<()> {
        if j == 0 || k == 0 {
            return Err(PclsError::Domain("block indices are 1-based".into()));
        }
        let qj = (j - 1) / self.period as u64;
        let qk = (k - 1) / self.period as u64;
        if qj.abs_diff(qk) > self.horizon as u64 {
            return Err(PclsError::Domain(format!(
                "block pair ({j}, {k}) is {} periods apart, past the lift horizon {}",
                qj.abs_diff(qk),
                self.horizon
            )));
        }
        Ok(())
    }

    /// Mass `θ̃_{jk}(ν_r)` for 1-based block indices within the horizon.
    pub fn theta(&self, j: u64, k: u64, r: usize) -> Result<Complex64> {
        self.check_horizon(j, k)?;
        let t = self.period as u64;
        let p = ((j - 1) % t) as usize;
        let q = ((k - 1) % t) as usize;
        let ang = self.nodes[r] * (p as f64 - q as f64) / t as f64;
        let (s, c) = ang.sin_cos();
        Ok(Complex64::new(c, -s) * self.mats[r][(p, q)])
    }

    fn reconstruct_complex(&self, j: u64, k: u64) -> Result<Complex64> {
        self.check_horizon(j, k)?;
        let t = self.period as f64;
        let diff = (j as f64 - k as f64) / t;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.nodes.len() {
            let ang = self.nodes[r] * diff;
            let (s, c) = ang.sin_cos();
            acc += Complex64::new(c, s) * self.theta(j, k, r)?;
        }
        Ok(acc)
    }

    /// Recovers `γ_{jk}` from the masses; errors past the horizon or when
    /// the result is not real.
    pub fn reconstruct_seq(&self, j: u64, k: u64) -> Result<f64> {
        let acc = self.reconstruct_complex(j, k)?;
        if acc.im.abs() > IM_RESIDUE_ABS_TOL * (1.0 + self.max_abs) {
            return Err(PclsError::Numeric(format!(
                "sequence reconstruction at ({j}, {k}) has imaginary residue {}",
                acc.im
            )));
        }
        Ok(acc.re)
    }
}

fn itertools_square(t: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..t).flat_map(move |p| (0..t).map(move |q| (p, q)))
}

/// Frequency-domain view of a model: one stationary spectral measure per
/// mixture family slot plus the lift of the measure-part sequence, sized to
/// cover evaluations up to a stated time.
pub struct SpectralContext<'a> {
    model: &'a PclsModel,
    measures: Vec<SpectralMeasure>,
    lift: Option<PcSpectralLift>,
}

impl<'a> SpectralContext<'a> {
    /// Discretizes the model's spectra so that pairs with `t, u ≤ max_time`
    /// reconstruct within the design budgets of `params`.
    pub fn new(model: &'a PclsModel, params: &SpectralGridParams, max_time: f64) -> Result<Self> {
        if !(max_time.is_finite() && max_time > 0.0) {
            return Err(PclsError::Domain(format!(
                "max_time must be positive and finite, got {max_time}"
            )));
        }
        let mut params_eff = *params;
        params_eff.tau_max = params.tau_max.max(max_time);
        let mut measures = Vec::new();
        if let Some(ls) = model.ls() {
            for g in ls.gamma() {
                measures.push(g.default_spectral_measure(&params_eff)?);
            }
        }
        let lift = match model.pc() {
            Some(pc) => {
                let n_periods = ((max_time / model.partition().span()).ceil() as usize).max(1);
                Some(PcSpectralLift::build(pc.sequence(), n_periods)?)
            }
            None => None,
        };
        Ok(Self {
            model,
            measures,
            lift,
        })
    }

    pub fn model(&self) -> &PclsModel {
        self.model
    }

    pub fn lift(&self) -> Option<&PcSpectralLift> {
        self.lift.as_ref()
    }

    /// Spectral measure backing mixture family `f`.
    pub fn family_measure(&self, f: u64) -> Result<&SpectralMeasure> {
        let ls = self
            .model
            .ls()
            .ok_or_else(|| PclsError::Domain("model has no locally stationary component".into()))?;
        Ok(&self.measures[ls.family_slot(f)?])
    }

    fn check_block(&self, label: &str, point: f64, block: u64) -> Result<()> {
        let actual = self.model.partition().block_of(point)?;
        if actual != block {
            return Err(PclsError::Domain(format!(
                "{label} = {point} lies in block {actual}, not the declared block {block}"
            )));
        }
        Ok(())
    }

    /// Mixture-part masses of the block pair `(j, k)` at `(t, u)`: pairs
    /// `(λ, mass)` with `mass = ψ_f(t+u) G_f(λ)` for every family shared by
    /// the two blocks. Empty off the band `|j−k| ≤ 1` and for models
    /// without a mixture part. `Σ e^{iλ(t−u)} mass` is the mixture
    /// covariance.
    pub fn f_kernel(&self, j: u64, k: u64, t: f64, u: f64) -> Result<Vec<(f64, Complex64)>> {
        self.check_block("t", t, j)?;
        self.check_block("u", u, k)?;
        let Some(ls) = self.model.ls() else {
            return Ok(Vec::new());
        };
        if j.abs_diff(k) >= 2 {
            return Ok(Vec::new());
        }
        let families: Vec<u64> = if j == k {
            if j >= 2 {
                vec![j - 1, j]
            } else {
                vec![j]
            }
        } else {
            vec![j.min(k)]
        };
        let v = t + u;
        let mut out = Vec::new();
        for f in families {
            let weight = ls.psi_at(f)?.eval(v)?;
            let measure = &self.measures[ls.family_slot(f)?];
            out.reserve(measure.len());
            for (lam, mass) in measure.nodes().iter().zip(measure.masses()) {
                out.push((*lam, Complex64::new(weight * mass, 0.0)));
            }
        }
        Ok(out)
    }

    /// Measure-part masses of the block pair `(j, k)` at `(t, u)`: pairs
    /// `(ν_r, mass)` with the lifted sequence masses scaled by the
    /// harmonic-mean factor (same block) or the product factor (different
    /// blocks). `Σ e^{iν(j−k)/T} mass` is the measure-part covariance.
    pub fn theta_kernel(&self, j: u64, k: u64, t: f64, u: f64) -> Result<Vec<(f64, Complex64)>> {
        let Some(lift) = &self.lift else {
            self.check_block("t", t, j)?;
            self.check_block("u", u, k)?;
            return Ok(Vec::new());
        };
        let partition = self.model.partition();
        let (jt, at) = partition.within_block(t)?;
        let (ku, au) = partition.within_block(u)?;
        if jt != j {
            return Err(PclsError::Domain(format!(
                "t = {t} lies in block {jt}, not the declared block {j}"
            )));
        }
        if ku != k {
            return Err(PclsError::Domain(format!(
                "u = {u} lies in block {ku}, not the declared block {k}"
            )));
        }
        let scale = if j == k {
            let aj = partition.length_of(j);
            2.0 * at * au / (aj * (at + au))
        } else {
            at * au / (partition.length_of(j) * partition.length_of(k))
        };
        let mut out = Vec::with_capacity(lift.nodes().len());
        for r in 0..lift.nodes().len() {
            out.push((lift.nodes()[r], lift.theta(j, k, r)? * scale));
        }
        Ok(out)
    }

    /// Recovers the model covariance at `(t, u)` from the spectral masses:
    /// `Σ_λ e^{iλ(t−u)} F-mass + Σ_ν e^{iν(m−n)/T} Θ-mass` with
    /// `m = block(t)`, `n = block(u)`. Errors when the result fails to be
    /// real to [`IM_RESIDUE_ABS_TOL`].
    pub fn reconstruct_cov(&self, t: f64, u: f64) -> Result<f64> {
        let m = self.model.partition().block_of(t)?;
        let n = self.model.partition().block_of(u)?;
        let mut acc = Complex64::new(0.0, 0.0);
        if self.model.ls().is_some() {
            for (lam, mass) in self.f_kernel(m, n, t, u)? {
                let ang = lam * (t - u);
                let (s, c) = ang.sin_cos();
                acc += Complex64::new(c, s) * mass;
            }
        }
        if self.lift.is_some() {
            let diff = (m as f64 - n as f64) / self.lift.as_ref().unwrap().period() as f64;
            for (nu, mass) in self.theta_kernel(m, n, t, u)? {
                let ang = nu * diff;
                let (s, c) = ang.sin_cos();
                acc += Complex64::new(c, s) * mass;
            }
        }
        if acc.im.abs() > IM_RESIDUE_ABS_TOL {
            return Err(PclsError::Numeric(format!(
                "reconstruction at ({t}, {u}) has imaginary residue {}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// Writes the masses of one block pair as CSV
    /// (`j,k,lambda,mass_re,mass_im,kind`).
    pub fn dump_csv<W: std::io::Write>(
        &self,
        w: &mut W,
        j: u64,
        k: u64,
        t: f64,
        u: f64,
    ) -> Result<()> {
        writeln!(w, "j,k,lambda,mass_re,mass_im,kind")?;
        for (lam, mass) in self.f_kernel(j, k, t, u)? {
            writeln!(w, "{j},{k},{lam},{},{},F", mass.re, mass.im)?;
        }
        for (nu, mass) in self.theta_kernel(j, k, t, u)? {
            writeln!(w, "{j},{k},{nu},{},{},Theta", mass.re, mass.im)?;
        }
        Ok(())
    }
}
