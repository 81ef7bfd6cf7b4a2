//! Declarative model specification files.
//!
//! A spec is a small JSON document describing the partition, the
//! locally-stationary families, the interval-measure sequence, and optional
//! run defaults. [`ModelSpec::validate`] collects *all* problems with
//! JSON-path locations instead of stopping at the first, so a user fixes a
//! file in one round trip; [`ModelSpec::build`] turns a clean spec into a
//! [`PclsModel`].
//!
//! The [`ModelSpec::fingerprint`] is a SHA-256 over a canonical rendering of
//! the model sections only (run defaults stripped, keys sorted), so two
//! specs describing the same law share a fingerprint even if their files
//! differ in formatting or in run defaults.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PclsError, Result};
use crate::excov::{ClosedFormPsi, ExpConvexCov, LaplaceMixture};
use crate::model::{LsComponent, PclsModel, MAX_GRID_POINTS};
use crate::montecarlo::SimMethod;
use crate::partition::Partition;
use crate::pc::PcSequence;
use crate::stationary::StationaryCov;

/// Spec schema versions this build understands.
pub const SUPPORTED_SCHEMAS: &[u32] = &[1];

/// Points used for the construction-time Gram spot-check of each weight
/// covariance.
const PSI_SPOT_CHECK_POINTS: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];

/// Relative PSD tolerance for that spot check.
const PSI_SPOT_CHECK_TOL_REL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub schema: u32,
    pub partition: PartitionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ls: Option<LsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pc: Option<PcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<RunDefaults>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub period: usize,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsSpec {
    pub psi: Vec<PsiSpec>,
    pub gamma: Vec<GammaSpec>,
    #[serde(default)]
    pub aperiodic: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PsiSpec {
    LaplaceMixture { weights: Vec<f64>, rates: Vec<f64> },
    ClosedForm { name: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GammaSpec {
    Exponential {
        theta: f64,
        sigma2: f64,
    },
    SquaredExponential {
        ell: f64,
        sigma2: f64,
    },
    CosineMixture {
        masses: Vec<f64>,
        frequencies: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PcSpec {
    Parametric {
        sigma: Vec<f64>,
        rho: f64,
    },
    Explicit {
        base_matrix: Vec<Vec<f64>>,
        periods: usize,
    },
}

/// Optional run defaults a spec may carry; flags override every field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunDefaults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_psd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_spec_atomic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_spec_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

/// A uniform time grid `start, start+step, …` up to `stop` (inclusive
/// within a small tie tolerance).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.start > 0.0
            && self.step > 0.0
            && self.stop >= self.start;
        if !ok {
            return Err(PclsError::Domain(format!(
                "grid needs 0 < start <= stop and step > 0, got start={}, stop={}, step={}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > MAX_GRID_POINTS {
            return Err(PclsError::Domain(format!(
                "grid has {n} points, more than the supported {MAX_GRID_POINTS}"
            )));
        }
        Ok((0..n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// One validation problem, located by a JSON path into the spec document.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl ModelSpec {
    /// Parses a spec from JSON text.
    pub fn parse_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PclsError::InvalidSpec {
            path: "(parse)".into(),
            message: e.to_string(),
        })
    }

    /// Reads and parses a spec file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Collects every validation problem in the document. An empty result
    /// means [`ModelSpec::build`] will succeed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();

        if !SUPPORTED_SCHEMAS.contains(&self.schema) {
            out.push(Diagnostic::new(
                "schema",
                format!(
                    "unsupported schema version {} (supported: {:?})",
                    self.schema, SUPPORTED_SCHEMAS
                ),
            ));
        }

        // Partition.
        let period = self.partition.period;
        if self.partition.lengths.is_empty() {
            out.push(Diagnostic::new(
                "partition.lengths",
                "at least one block length is required",
            ));
        }
        for (i, &a) in self.partition.lengths.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                out.push(Diagnostic::new(
                    format!("partition.lengths[{i}]"),
                    format!("block lengths must be positive and finite, got {a}"),
                ));
            }
        }
        if period != self.partition.lengths.len() {
            out.push(Diagnostic::new(
                "partition.period",
                format!(
                    "period {} does not match the {} block lengths",
                    period,
                    self.partition.lengths.len()
                ),
            ));
        }

        if self.ls.is_none() && self.pc.is_none() {
            out.push(Diagnostic::new(
                "(root)",
                "at least one of 'ls' or 'pc' is required",
            ));
        }

        if let Some(ls) = &self.ls {
            self.validate_ls(ls, period, &mut out);
        }
        if let Some(pc) = &self.pc {
            self.validate_pc(pc, period, &mut out);
        }
        if let Some(d) = &self.defaults {
            validate_defaults(d, &mut out);
        }
        out
    }

    fn validate_ls(&self, ls: &LsSpec, period: usize, out: &mut Vec<Diagnostic>) {
        if ls.psi.is_empty() {
            out.push(Diagnostic::new("ls.psi", "at least one family is required"));
        }
        if ls.psi.len() != ls.gamma.len() {
            out.push(Diagnostic::new(
                "ls",
                format!(
                    "psi and gamma lists must have equal length, got {} and {}",
                    ls.psi.len(),
                    ls.gamma.len()
                ),
            ));
        }
        if !ls.aperiodic && period > 0 && ls.psi.len() != period {
            out.push(Diagnostic::new(
                "ls.psi",
                format!(
                    "periodic family list must have exactly {} entries (one per block of the period), got {}",
                    period,
                    ls.psi.len()
                ),
            ));
        }
        for (i, psi) in ls.psi.iter().enumerate() {
            match psi {
                PsiSpec::LaplaceMixture { weights, rates } => {
                    if weights.is_empty() || weights.len() != rates.len() {
                        out.push(Diagnostic::new(
                            format!("ls.psi[{i}]"),
                            format!(
                                "weights and rates must be matching nonempty lists, got {} and {}",
                                weights.len(),
                                rates.len()
                            ),
                        ));
                        continue;
                    }
                    let mut clean = true;
                    for (m, &w) in weights.iter().enumerate() {
                        if !w.is_finite() || w <= 0.0 {
                            out.push(Diagnostic::new(
                                format!("ls.psi[{i}].weights"),
                                format!("weight #{} must be positive and finite, got {w}", m + 1),
                            ));
                            clean = false;
                        }
                    }
                    for (m, &r) in rates.iter().enumerate() {
                        if !r.is_finite() {
                            out.push(Diagnostic::new(
                                format!("ls.psi[{i}].rates"),
                                format!("rate #{} must be finite, got {r}", m + 1),
                            ));
                            clean = false;
                        }
                    }
                    if clean {
                        // Construction-time spot check: the Gram of the
                        // weight covariance on a small point set.
                        match LaplaceMixture::new(weights.clone(), rates.clone()) {
                            Ok(mx) => {
                                let cov = ExpConvexCov::Mixture(mx);
                                match cov.gram_check(&PSI_SPOT_CHECK_POINTS, PSI_SPOT_CHECK_TOL_REL) {
                                    Ok(check) if !check.pass => out.push(Diagnostic::new(
                                        format!("ls.psi[{i}]"),
                                        format!(
                                            "weight covariance Gram check failed (min eigenvalue {:e})",
                                            check.min_eigenvalue
                                        ),
                                    )),
                                    Ok(_) => {}
                                    Err(e) => out.push(Diagnostic::new(
                                        format!("ls.psi[{i}]"),
                                        e.to_string(),
                                    )),
                                }
                            }
                            Err(e) => {
                                out.push(Diagnostic::new(format!("ls.psi[{i}]"), e.to_string()))
                            }
                        }
                    }
                }
                PsiSpec::ClosedForm { name } => {
                    if ClosedFormPsi::from_name(name).is_none() {
                        out.push(Diagnostic::new(
                            format!("ls.psi[{i}].name"),
                            format!("unknown closed-form weight covariance '{name}'"),
                        ));
                    }
                }
            }
        }
        for (i, gamma) in ls.gamma.iter().enumerate() {
            if let Err(e) = gamma.build().validate() {
                out.push(Diagnostic::new(format!("ls.gamma[{i}]"), e.to_string()));
            }
        }
    }

    fn validate_pc(&self, pc: &PcSpec, period: usize, out: &mut Vec<Diagnostic>) {
        match pc {
            PcSpec::Parametric { sigma, rho } => {
                let mut clean = true;
                if sigma.is_empty() {
                    out.push(Diagnostic::new("pc.sigma", "sigma list must be nonempty"));
                    clean = false;
                }
                for (i, &s) in sigma.iter().enumerate() {
                    if !s.is_finite() || s <= 0.0 {
                        out.push(Diagnostic::new(
                            format!("pc.sigma[{i}]"),
                            format!("sigma must be positive and finite, got {s}"),
                        ));
                        clean = false;
                    }
                }
                if period > 0 && !sigma.is_empty() && sigma.len() != period {
                    out.push(Diagnostic::new(
                        "pc.sigma",
                        format!(
                            "sigma needs one entry per block of the period ({period}), got {}",
                            sigma.len()
                        ),
                    ));
                    clean = false;
                }
                if !rho.is_finite() || rho.abs() >= 1.0 {
                    out.push(Diagnostic::new(
                        "pc.rho",
                        format!("rho must lie in (-1, 1), got {rho}"),
                    ));
                    clean = false;
                }
                if clean {
                    if let Err(e) = pc.build().and_then(|seq| seq.validate()) {
                        out.push(Diagnostic::new("pc", e.to_string()));
                    }
                }
            }
            PcSpec::Explicit {
                base_matrix,
                periods,
            } => {
                let mut clean = true;
                let w = base_matrix.len();
                if w == 0 || base_matrix.iter().any(|row| row.len() != w) {
                    out.push(Diagnostic::new(
                        "pc.base_matrix",
                        "base matrix must be square and nonempty",
                    ));
                    clean = false;
                }
                if base_matrix
                    .iter()
                    .any(|row| row.iter().any(|x| !x.is_finite()))
                {
                    out.push(Diagnostic::new(
                        "pc.base_matrix",
                        "base matrix has non-finite entries",
                    ));
                    clean = false;
                }
                if *periods == 0 {
                    out.push(Diagnostic::new("pc.periods", "periods must be at least 1"));
                    clean = false;
                } else if w > 0 && w % periods != 0 {
                    out.push(Diagnostic::new(
                        "pc.periods",
                        format!("base size {w} is not a multiple of periods {periods}"),
                    ));
                    clean = false;
                } else if w > 0 && period > 0 && w / periods != period {
                    out.push(Diagnostic::new(
                        "pc.periods",
                        format!(
                            "base window covers a period of {} but the partition period is {period}",
                            w / periods
                        ),
                    ));
                    clean = false;
                }
                if clean {
                    if let Err(e) = pc.build().and_then(|seq| seq.validate()) {
                        out.push(Diagnostic::new("pc", e.to_string()));
                    }
                }
            }
        }
    }

    /// Builds the model, or reports the first diagnostic as an error.
    pub fn build(&self) -> Result<PclsModel> {
        let diagnostics = self.validate();
        if let Some(d) = diagnostics.first() {
            return Err(PclsError::InvalidSpec {
                path: d.path.clone(),
                message: d.message.clone(),
            });
        }
        let partition = Partition::new(self.partition.lengths.clone())?;
        let ls = match &self.ls {
            Some(ls) => {
                let psi: Vec<ExpConvexCov> =
                    ls.psi.iter().map(|p| p.build()).collect::<Result<_>>()?;
                let gamma: Vec<StationaryCov> = ls.gamma.iter().map(|g| g.build()).collect();
                Some(LsComponent::new(psi, gamma, ls.aperiodic)?)
            }
            None => None,
        };
        let pc = self.pc.as_ref().map(|p| p.build()).transpose()?;
        PclsModel::new(partition, ls, pc)
    }

    /// Run defaults, or an empty set when the spec carries none.
    pub fn run_defaults(&self) -> RunDefaults {
        self.defaults.clone().unwrap_or_default()
    }

    /// Canonical rendering of the model law: run defaults stripped, keys
    /// sorted, shortest-round-trip floats.
    pub fn canonical_json(&self) -> String {
        let mut stripped = self.clone();
        stripped.defaults = None;
        let value = serde_json::to_value(&stripped).expect("spec serializes");
        value.to_string()
    }

    /// SHA-256 hex digest of [`ModelSpec::canonical_json`].
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

impl PsiSpec {
    pub fn build(&self) -> Result<ExpConvexCov> {
        match self {
            PsiSpec::LaplaceMixture { weights, rates } => Ok(ExpConvexCov::Mixture(
                LaplaceMixture::new(weights.clone(), rates.clone())?,
            )),
            PsiSpec::ClosedForm { name } => ClosedFormPsi::from_name(name)
                .map(ExpConvexCov::ClosedForm)
                .ok_or_else(|| PclsError::InvalidSpec {
                    path: "ls.psi".into(),
                    message: format!("unknown closed-form weight covariance '{name}'"),
                }),
        }
    }
}

impl GammaSpec {
    pub fn build(&self) -> StationaryCov {
        match self {
            GammaSpec::Exponential { theta, sigma2 } => StationaryCov::Exponential {
                theta: *theta,
                sigma2: *sigma2,
            },
            GammaSpec::SquaredExponential { ell, sigma2 } => StationaryCov::SquaredExponential {
                ell: *ell,
                sigma2: *sigma2,
            },
            GammaSpec::CosineMixture {
                masses,
                frequencies,
            } => StationaryCov::CosineMixture {
                masses: masses.clone(),
                frequencies: frequencies.clone(),
            },
        }
    }
}

impl PcSpec {
    pub fn build(&self) -> Result<PcSequence> {
        match self {
            PcSpec::Parametric { sigma, rho } => Ok(PcSequence::Parametric {
                sigma: sigma.clone(),
                rho: *rho,
            }),
            PcSpec::Explicit {
                base_matrix,
                periods,
            } => {
                let w = base_matrix.len();
                if w == 0 || base_matrix.iter().any(|row| row.len() != w) {
                    return Err(PclsError::InvalidSpec {
                        path: "pc.base_matrix".into(),
                        message: "base matrix must be square and nonempty".into(),
                    });
                }
                let base = DMatrix::from_fn(w, w, |i, k| base_matrix[i][k]);
                Ok(PcSequence::Explicit {
                    base,
                    periods: *periods,
                })
            }
        }
    }
}

fn validate_defaults(d: &RunDefaults, out: &mut Vec<Diagnostic>) {
    if let Some(grid) = &d.grid {
        if let Err(e) = grid.expand() {
            out.push(Diagnostic::new("defaults.grid", e.to_string()));
        }
    }
    if let Some(paths) = d.paths {
        if paths == 0 {
            out.push(Diagnostic::new(
                "defaults.paths",
                "paths must be at least 1",
            ));
        }
    }
    if let Some(z) = d.z {
        if !z.is_finite() || z <= 0.0 {
            out.push(Diagnostic::new(
                "defaults.z",
                format!("z must be positive and finite, got {z}"),
            ));
        }
    }
    for (name, tol) in [
        ("tol_psd", d.tol_psd),
        ("tol_spec_atomic", d.tol_spec_atomic),
        ("tol_spec_density", d.tol_spec_density),
    ] {
        if let Some(tol) = tol {
            if !tol.is_finite() || tol < 0.0 {
                out.push(Diagnostic::new(
                    format!("defaults.{name}"),
                    format!("tolerance must be nonnegative and finite, got {tol}"),
                ));
            }
        }
    }
    if let Some(method) = &d.method {
        if let Err(e) = SimMethod::from_name(method) {
            out.push(Diagnostic::new("defaults.method", e.to_string()));
        }
    }
}
