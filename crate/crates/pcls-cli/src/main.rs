//! Command-line front end: validate model specs, evaluate covariance
//! matrices, simulate path ensembles, and run the spectral and Monte-Carlo
//! consistency checks.
//!
//! Exit codes: 0 success, 2 usage or spec problem, 3 covariance not
//! positive semidefinite, 4 unsupported simulation method, 5 numeric
//! failure or a failed check.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use pcls::modelspec::{GridSpec, ModelSpec, RunDefaults};
use pcls::montecarlo::{self, SimMethod};
use pcls::spectral::{SpectralContext, PHASE_CONVENTION};
use pcls::stationary::SpectralGridParams;
use pcls::{PclsError, PclsModel, Result};

const DEFAULT_TOL_PSD: f64 = 1e-8;
const DEFAULT_TOL_SPEC_ATOMIC: f64 = 1e-8;
const DEFAULT_TOL_SPEC_DENSITY: f64 = 1e-4;
const DEFAULT_Z: f64 = 4.0;

#[derive(Parser)]
#[command(
    name = "pcls",
    version,
    about = "Periodically correlated locally stationary Gaussian models: \
             covariance evaluation, spectral checks, and ensemble simulation",
    after_help = "Exit codes: 0 ok, 2 usage/spec, 3 non-PSD, 4 unsupported method, \
                  5 numeric failure or failed check.\n\
                  Env: PCLS_THREADS caps the worker threads used by matrix and \
                  simulation kernels."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model spec file; prints a JSON diagnostic report.
    Validate {
        /// Path to the model spec (JSON).
        spec: PathBuf,
    },
    /// Evaluate the covariance matrix on a time grid and write it to a file.
    Cov {
        /// Path to the model spec (JSON).
        spec: PathBuf,
        /// Uniform grid as start:stop:step (all > 0).
        #[arg(long, value_parser = parse_grid_flag, conflicts_with = "points")]
        grid: Option<GridSpec>,
        /// File of grid points (whitespace/comma separated).
        #[arg(long)]
        points: Option<PathBuf>,
        /// Clip small negative eigenvalues instead of failing.
        #[arg(long)]
        repair: bool,
        /// PSD tolerance relative to the trace (default from spec, else 1e-8).
        #[arg(long)]
        tol: Option<f64>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
    },
    /// Simulate a Gaussian path ensemble and write it to a file.
    Simulate {
        /// Path to the model spec (JSON).
        spec: PathBuf,
        /// Number of paths (default from spec defaults.paths).
        #[arg(long)]
        paths: Option<usize>,
        /// Master seed (default from spec, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// joint_factorization or component_wise (default from spec, else
        /// joint_factorization).
        #[arg(long)]
        method: Option<String>,
        /// Uniform grid as start:stop:step (all > 0).
        #[arg(long, value_parser = parse_grid_flag, conflicts_with = "points")]
        grid: Option<GridSpec>,
        /// File of grid points (whitespace/comma separated).
        #[arg(long)]
        points: Option<PathBuf>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = EnsembleFormat::Csv)]
        format: EnsembleFormat,
    },
    /// Compare the spectral reconstruction of the covariance to the exact
    /// formula on random time pairs; prints a JSON report.
    SpectralCheck {
        /// Path to the model spec (JSON).
        spec: PathBuf,
        /// Number of random (t, u) pairs.
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        /// Seed for the pair sampler (default from spec, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Relative deviation tolerance (default 1e-8 for purely atomic
        /// spectra, 1e-4 when a spectral density is involved).
        #[arg(long)]
        tol: Option<f64>,
        /// Largest time coordinate sampled (default: the spec's default
        /// grid stop, else twice the partition span).
        #[arg(long)]
        max_time: Option<f64>,
        /// Dump the spectral masses of the worst pair's block pair as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Simulate and compare empirical covariances to the exact ones;
    /// prints a JSON report.
    McCheck {
        /// Path to the model spec (JSON).
        spec: PathBuf,
        /// Number of paths (default from spec defaults.paths).
        #[arg(long)]
        paths: Option<usize>,
        /// Master seed (default from spec, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// z-score threshold per pair (default from spec, else 4).
        #[arg(long)]
        z: Option<f64>,
        /// joint_factorization or component_wise (default from spec, else
        /// joint_factorization).
        #[arg(long)]
        method: Option<String>,
        /// Uniform grid as start:stop:step (all > 0).
        #[arg(long, value_parser = parse_grid_flag, conflicts_with = "points")]
        grid: Option<GridSpec>,
        /// File of grid points (whitespace/comma separated).
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleFormat {
    Csv,
    Binary,
}

fn parse_grid_flag(s: &str) -> std::result::Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:step, got '{s}'"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| format!("bad number '{p}': {e}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(GridSpec {
        start: nums[0],
        stop: nums[1],
        step: nums[2],
    })
}

fn exit_code(e: &PclsError) -> i32 {
    match e {
        PclsError::InvalidSpec { .. }
        | PclsError::Domain(_)
        | PclsError::Alignment(_)
        | PclsError::Coverage { .. }
        | PclsError::Io(_) => 2,
        PclsError::NonPsd { .. } => 3,
        PclsError::UnsupportedMethod(_) => 4,
        PclsError::Numeric(_) | PclsError::Overflow { .. } => 5,
    }
}

fn main() {
    if let Ok(raw) = std::env::var("PCLS_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring PCLS_THREADS='{raw}' (want a positive integer)"),
        }
    }
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let PclsError::Coverage { .. } = e {
                eprintln!(
                    "hint: the spectral density's tail exceeds the grid budget; \
                     raise tail_tol, shorten max_time, or use a lighter-tailed family"
                );
            }
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Cov {
            spec,
            grid,
            points,
            repair,
            tol,
            out,
            format,
        } => cmd_cov(&spec, grid, points, repair, tol, &out, format),
        Command::Simulate {
            spec,
            paths,
            seed,
            method,
            grid,
            points,
            out,
            format,
        } => cmd_simulate(&spec, paths, seed, method, grid, points, &out, format),
        Command::SpectralCheck {
            spec,
            pairs,
            seed,
            tol,
            max_time,
            dump,
        } => cmd_spectral_check(&spec, pairs, seed, tol, max_time, dump),
        Command::McCheck {
            spec,
            paths,
            seed,
            z,
            method,
            grid,
            points,
        } => cmd_mc_check(&spec, paths, seed, z, method, grid, points),
    }
}

fn load_spec(path: &PathBuf) -> Result<ModelSpec> {
    ModelSpec::load(path)
}

/// Reports are plain trees of strings and numbers; rendering them cannot
/// fail.
fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Grid precedence: --grid flag, --points file, then the spec's defaults.
fn resolve_grid(
    grid: Option<GridSpec>,
    points: Option<PathBuf>,
    defaults: &RunDefaults,
) -> Result<Vec<f64>> {
    if let Some(g) = grid {
        return g.expand();
    }
    if let Some(path) = points {
        let text = std::fs::read_to_string(&path)?;
        let mut out = Vec::new();
        for token in text.split(|c: char| c.is_whitespace() || c == ',') {
            if token.is_empty() {
                continue;
            }
            let v: f64 = token.parse().map_err(|e| {
                PclsError::Domain(format!(
                    "bad grid point '{token}' in {}: {e}",
                    path.display()
                ))
            })?;
            out.push(v);
        }
        if out.is_empty() {
            return Err(PclsError::Domain(format!(
                "points file {} holds no numbers",
                path.display()
            )));
        }
        return Ok(out);
    }
    if let Some(g) = &defaults.grid {
        return g.expand();
    }
    Err(PclsError::Domain(
        "no grid given: pass --grid start:stop:step, --points file, \
         or set defaults.grid in the spec"
            .into(),
    ))
}

fn cmd_validate(path: &PathBuf) -> Result<i32> {
    let report = match load_spec(path) {
        Ok(spec) => {
            let diagnostics = spec.validate();
            json!({
                "valid": diagnostics.is_empty(),
                "fingerprint": spec.fingerprint(),
                "diagnostics": diagnostics,
            })
        }
        Err(PclsError::InvalidSpec { path, message }) => json!({
            "valid": false,
            "diagnostics": [{ "path": path, "message": message }],
        }),
        Err(other) => return Err(other),
    };
    println!("{}", pretty(&report));
    Ok(if report["valid"].as_bool() == Some(true) {
        0
    } else {
        2
    })
}

fn cmd_cov(
    path: &PathBuf,
    grid: Option<GridSpec>,
    points: Option<PathBuf>,
    repair: bool,
    tol: Option<f64>,
    out: &PathBuf,
    format: MatrixFormat,
) -> Result<i32> {
    let spec = load_spec(path)?;
    let model = spec.build()?;
    let defaults = spec.run_defaults();
    let grid = resolve_grid(grid, points, &defaults)?;
    let tol = tol.or(defaults.tol_psd).unwrap_or(DEFAULT_TOL_PSD);
    let cov = model.cov_matrix(&grid, repair, tol)?;
    let mut w = BufWriter::new(File::create(out)?);
    match format {
        MatrixFormat::Csv => cov.write_csv(&mut w)?,
        MatrixFormat::Json => writeln!(w, "{}", pretty(&cov.to_json()))?,
    }
    w.flush()?;
    eprintln!(
        "covariance {n}x{n}: min eigenvalue {:e}, repaired {}, wrote {}",
        cov.min_eigenvalue(),
        cov.repaired(),
        out.display(),
        n = cov.len()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &PathBuf,
    paths: Option<usize>,
    seed: Option<u64>,
    method: Option<String>,
    grid: Option<GridSpec>,
    points: Option<PathBuf>,
    out: &PathBuf,
    format: EnsembleFormat,
) -> Result<i32> {
    let spec = load_spec(path)?;
    let model = spec.build()?;
    let defaults = spec.run_defaults();
    let n_paths = paths.or(defaults.paths).ok_or_else(|| {
        PclsError::Domain("pass --paths or set defaults.paths in the spec".into())
    })?;
    let seed = seed.or(defaults.seed).unwrap_or(0);
    let method_name = method
        .or(defaults.method.clone())
        .unwrap_or_else(|| SimMethod::JointFactorization.as_str().to_string());
    let method = SimMethod::from_name(&method_name)?;
    let grid = resolve_grid(grid, points, &defaults)?;
    let fingerprint = spec.fingerprint();
    let ensemble = montecarlo::simulate(&model, &grid, n_paths, seed, method, &fingerprint)?;
    let mut w = BufWriter::new(File::create(out)?);
    match format {
        EnsembleFormat::Csv => ensemble.write_csv(&mut w)?,
        EnsembleFormat::Binary => ensemble.write_binary(&mut w)?,
    }
    w.flush()?;
    println!("{fingerprint}");
    eprintln!(
        "wrote {} paths x {} points ({}) to {}",
        ensemble.n_paths(),
        ensemble.grid().len(),
        method.as_str(),
        out.display()
    );
    Ok(0)
}

fn cmd_spectral_check(
    path: &PathBuf,
    pairs: usize,
    seed: Option<u64>,
    tol: Option<f64>,
    max_time: Option<f64>,
    dump: Option<PathBuf>,
) -> Result<i32> {
    if pairs == 0 {
        return Err(PclsError::Domain("--pairs must be at least 1".into()));
    }
    let spec = load_spec(path)?;
    let model = spec.build()?;
    let defaults = spec.run_defaults();
    let seed = seed.or(defaults.seed).unwrap_or(0);
    let density = model.has_density_spectrum();
    let tol = tol
        .or(if density {
            defaults.tol_spec_density
        } else {
            defaults.tol_spec_atomic
        })
        .unwrap_or(if density {
            DEFAULT_TOL_SPEC_DENSITY
        } else {
            DEFAULT_TOL_SPEC_ATOMIC
        });
    let max_time = max_time
        .or(defaults.grid.as_ref().map(|g| g.stop))
        .unwrap_or_else(|| 2.0 * model.partition().span());
    let ctx = SpectralContext::new(&model, &SpectralGridParams::default(), max_time)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation = -1.0f64;
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let t = max_time * (1.0 - rng.random::<f64>());
        let u = max_time * (1.0 - rng.random::<f64>());
        let reconstructed = ctx.reconstruct_cov(t, u)?;
        let exact = model.total_cov(t, u)?;
        let deviation = (reconstructed - exact).abs() / (1.0 + exact.abs());
        if deviation > max_deviation {
            max_deviation = deviation;
            worst = (t, u, reconstructed, exact);
        }
    }
    let pass = max_deviation <= tol;

    if let Some(dump_path) = dump {
        let (t, u, _, _) = worst;
        let j = model.partition().block_of(t)?;
        let k = model.partition().block_of(u)?;
        let mut w = BufWriter::new(File::create(&dump_path)?);
        ctx.dump_csv(&mut w, j, k, t, u)?;
        w.flush()?;
        eprintln!(
            "dumped block pair ({j}, {k}) masses to {}",
            dump_path.display()
        );
    }

    let report = json!({
        "pairs": pairs,
        "seed": seed,
        "max_time": max_time,
        "spectrum": if density { "density" } else { "atomic" },
        "tol": tol,
        "max_deviation": max_deviation,
        "worst": {
            "t": worst.0,
            "u": worst.1,
            "reconstructed": worst.2,
            "exact": worst.3,
        },
        "phase_convention": PHASE_CONVENTION,
        "pass": pass,
    });
    println!("{}", pretty(&report));
    Ok(if pass { 0 } else { 5 })
}

fn cmd_mc_check(
    path: &PathBuf,
    paths: Option<usize>,
    seed: Option<u64>,
    z: Option<f64>,
    method: Option<String>,
    grid: Option<GridSpec>,
    points: Option<PathBuf>,
) -> Result<i32> {
    let spec = load_spec(path)?;
    let model: PclsModel = spec.build()?;
    let defaults = spec.run_defaults();
    let n_paths = paths.or(defaults.paths).ok_or_else(|| {
        PclsError::Domain("pass --paths or set defaults.paths in the spec".into())
    })?;
    let seed = seed.or(defaults.seed).unwrap_or(0);
    let z = z.or(defaults.z).unwrap_or(DEFAULT_Z);
    let method_name = method
        .or(defaults.method.clone())
        .unwrap_or_else(|| SimMethod::JointFactorization.as_str().to_string());
    let method = SimMethod::from_name(&method_name)?;
    let grid = resolve_grid(grid, points, &defaults)?;
    let report = montecarlo::mc_check(&model, &grid, n_paths, seed, z, method)?;
    println!("{}", pretty(&report));
    eprintln!(
        "checked {} pairs with {} paths: max |z| = {:.3}, {}",
        report.pairs_checked,
        report.n_paths,
        report.max_abs_z,
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { 0 } else { 5 })
}
