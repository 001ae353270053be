//! Datasets, file ingestion, trial sweeps and CSV reporting.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::diagnostics::coherence_nu;
use crate::dualbasis::{universe_size, SampleSet};
use crate::error::{EdgError, Result};
use crate::geometry::{procrustes_align, PointConfig};
use crate::init::{init_one_step, init_resampled, ResampleConfig};
use crate::linalg::gaussian_matrix;
use crate::manifold::LowRankFactor;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::sampling::{measure_points, sample_structured, sample_uniform_replacement, StructuredSpec};
use crate::solvers::{run_solver, run_to_points, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// Fibonacci lattice on the unit 2-sphere.
    Sphere,
    /// Jittered grid on a rolled-up rectangle in 3-D.
    SwissRoll,
    /// Cow mesh vertices, read as an XYZ file.
    Cow(Option<PathBuf>),
    /// City coordinates, read as an XYZ file.
    Cities(Option<PathBuf>),
    /// I.i.d. standard normal coordinates in `ambient_dim` dimensions.
    RandomGaussian,
    XyzFile(PathBuf),
    PdbFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingScheme {
    /// `round(γL)` uniform draws with replacement.
    UniformRate(f64),
    Structured(StructuredSpec),
    /// Every pair once.
    Full,
    /// The same sample set in every trial.
    Fixed(SampleSet),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    OneStep,
    /// Resampled initialization; `nu = None` uses the coherence of the truth.
    Resampled { partitions: usize, nu: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dataset: Dataset,
    pub n: usize,
    pub ambient_dim: usize,
    pub solver: SolverConfig,
    pub sampling: SamplingScheme,
    pub init: InitScheme,
    pub trials: usize,
    pub base_seed: u64,
    /// Records wall-clock time per trial. Off by default so that repeated
    /// sweeps write identical bytes.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(EdgError::invalid("trials must be at least 1"));
        }
        if let SamplingScheme::UniformRate(g) = self.sampling {
            if !(g > 0.0 && g <= 1.0) {
                return Err(EdgError::invalid(format!("sampling rate γ = {g} outside (0, 1]")));
            }
        }
        if self.ambient_dim == 0 {
            return Err(EdgError::invalid("ambient dimension must be at least 1"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub rel_gram_error: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub status: String,
    pub wall_ms: u64,
}

/// Builds the (centered) ground-truth configuration of `spec`.
pub fn generate_dataset(spec: &ExperimentSpec) -> Result<PointConfig> {
    let seed = derive_seed(spec.base_seed, stream::DATASET, 0);
    let n = spec.n;
    let need_n = || {
        if n == 0 {
            Err(EdgError::invalid("synthetic datasets need n ≥ 1"))
        } else {
            Ok(())
        }
    };
    let points = match &spec.dataset {
        Dataset::Sphere => {
            need_n()?;
            fibonacci_sphere(n)?
        }
        Dataset::SwissRoll => {
            need_n()?;
            swiss_roll(n, seed)?
        }
        Dataset::RandomGaussian => {
            need_n()?;
            PointConfig::new(gaussian_matrix(spec.ambient_dim, n, seed))?
        }
        Dataset::Cow(path) | Dataset::Cities(path) => {
            let path = path
                .as_ref()
                .ok_or_else(|| EdgError::invalid("this dataset is file-backed; supply a coordinate file"))?;
            ingest_xyz(path)?
        }
        Dataset::XyzFile(path) => ingest_xyz(path)?,
        Dataset::PdbFile(path) => ingest_pdb(path)?,
    };
    Ok(points.centered())
}

/// `n` points of the Fibonacci lattice on the unit sphere (not centered).
pub fn fibonacci_sphere(n: usize) -> Result<PointConfig> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let nf = n as f64;
    let coords = DMatrix::from_fn(3, n, |c, k| {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / nf;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * k as f64;
        match c {
            0 => rho * phi.cos(),
            1 => rho * phi.sin(),
            _ => z,
        }
    });
    PointConfig::new(coords)
}

/// `(t cos t, h, t sin t)` with `t ∈ [1.5π, 4.5π]`, `h ∈ [0, 21]`, one
/// uniformly jittered sample per cell of a near-square grid (not centered).
pub fn swiss_roll(n: usize, seed: u64) -> Result<PointConfig> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let mut rng = rng_from_seed(seed);
    let mut coords = DMatrix::zeros(3, n);
    for k in 0..n {
        let (a, b) = (k % cols, k / cols);
        let u = (a as f64 + rng.gen::<f64>()) / cols as f64;
        let v = (b as f64 + rng.gen::<f64>()) / rows as f64;
        let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * u);
        coords[(0, k)] = t * t.cos();
        coords[(1, k)] = 21.0 * v;
        coords[(2, k)] = t * t.sin();
    }
    PointConfig::new(coords)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| EdgError::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| EdgError::io(path, e))
}

/// Whitespace-separated coordinates, one point per line. Blank lines and
/// lines starting with `#` are skipped. The result is centered.
pub fn ingest_xyz(path: &Path) -> Result<PointConfig> {
    let source = path.display().to_string();
    let points = parse_xyz(&read_lines(path)?, &source)?;
    Ok(PointConfig::from_points(&points)?.centered())
}

fn parse_xyz(lines: &[String], source: &str) -> Result<Vec<Vec<f64>>> {
    let err = |line: usize, msg: String| EdgError::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let row = text
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| err(k + 1, format!("cannot parse {tok:?} as a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(err(k + 1, "non-finite coordinate".into()));
        }
        if let Some(first) = points.first() {
            if first.len() != row.len() {
                return Err(err(k + 1, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(err(0, "no points".into()));
    }
    Ok(points)
}

/// Writes one point per line with 17 significant digits.
pub fn write_xyz(points: &PointConfig, path: &Path) -> Result<()> {
    let c = points.coords();
    let mut s = String::new();
    for i in 0..c.ncols() {
        let row: Vec<String> = c.column(i).iter().map(|x| format!("{x:.16e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| EdgError::io(path, e))
}

/// Coordinates of the `ATOM` records of a PDB file (columns 31–54), up to
/// the end of the first model. The result is centered.
pub fn ingest_pdb(path: &Path) -> Result<PointConfig> {
    let source = path.display().to_string();
    let points = parse_pdb(&read_lines(path)?, &source)?;
    Ok(PointConfig::from_points(&points)?.centered())
}

fn parse_pdb(lines: &[String], source: &str) -> Result<Vec<Vec<f64>>> {
    let mut points = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        if line.starts_with("ENDMDL") && !points.is_empty() {
            break;
        }
        if !line.starts_with("ATOM  ") && !line.starts_with("ATOM ") {
            continue;
        }
        let field = |lo: usize, hi: usize, name: &str| -> Result<f64> {
            line.get(lo..hi)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| EdgError::Parse {
                    path: source.to_string(),
                    line: k + 1,
                    msg: format!("ATOM record {}: malformed {name} coordinate", points.len() + 1),
                })
        };
        points.push(vec![field(30, 38, "x")?, field(38, 46, "y")?, field(46, 54, "z")?]);
    }
    if points.is_empty() {
        return Err(EdgError::Parse {
            path: source.to_string(),
            line: 0,
            msg: "no ATOM records".into(),
        });
    }
    Ok(points)
}

/// Runs every trial of `spec` on the rayon pool. Records come back in trial
/// order and do not depend on the number of threads.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    let (truth, factor) = prepare(spec)?;
    Ok((0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &truth, &factor, t))
        .collect())
}

/// [`run_experiment`] on the calling thread.
pub fn run_experiment_serial(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    let (truth, factor) = prepare(spec)?;
    Ok((0..spec.trials).map(|t| run_trial(spec, &truth, &factor, t)).collect())
}

fn prepare(spec: &ExperimentSpec) -> Result<(PointConfig, LowRankFactor)> {
    spec.validate()?;
    let truth = generate_dataset(spec)?;
    if truth.count() < 2 {
        return Err(EdgError::invalid("need at least two points"));
    }
    let factor = LowRankFactor::from_points(&truth)?;
    if factor.frob_norm() == 0.0 {
        return Err(EdgError::ZeroNorm);
    }
    Ok((truth, factor))
}

/// Seed recorded for trial `t` of a sweep; all randomness of the trial
/// derives from it.
pub fn trial_seed(base_seed: u64, t: usize) -> u64 {
    derive_seed(base_seed, stream::SAMPLING, t as u64)
}

/// Sample set drawn for trial `t`.
pub fn trial_samples(spec: &ExperimentSpec, n: usize, t: usize) -> Result<SampleSet> {
    let seed = trial_seed(spec.base_seed, t);
    match &spec.sampling {
        SamplingScheme::UniformRate(g) => {
            let m = ((g * universe_size(n) as f64).round() as usize).max(1);
            sample_uniform_replacement(n, m, seed)
        }
        SamplingScheme::Structured(s) => sample_structured(n, s, seed),
        SamplingScheme::Full => SampleSet::full(n),
        SamplingScheme::Fixed(set) => {
            if set.n() != n {
                return Err(EdgError::DimensionMismatch(format!(
                    "sample set is over n = {}, dataset has n = {n}",
                    set.n()
                )));
            }
            Ok(set.clone())
        }
    }
}

fn run_trial(spec: &ExperimentSpec, truth: &PointConfig, factor: &LowRankFactor, t: usize) -> TrialRecord {
    let seed = trial_seed(spec.base_seed, t);
    let start = Instant::now();
    let outcome = solve_trial(spec, truth, factor, t);
    let wall_ms = if spec.record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    match outcome {
        Ok((rel, rmse, iterations, status)) => TrialRecord {
            trial: t,
            seed,
            rel_gram_error: rel,
            rmse,
            iterations,
            status,
            wall_ms,
        },
        Err(e) => TrialRecord {
            trial: t,
            seed,
            rel_gram_error: f64::NAN,
            rmse: f64::NAN,
            iterations: 0,
            status: format!("error: {e}").replace([',', '\n'], ";"),
            wall_ms,
        },
    }
}

fn solve_trial(
    spec: &ExperimentSpec,
    truth: &PointConfig,
    factor: &LowRankFactor,
    t: usize,
) -> Result<(f64, f64, usize, String)> {
    let n = truth.count();
    let omega = trial_samples(spec, n, t)?;
    let obs = measure_points(truth, &omega)?;
    let rank = spec.solver.rank;
    let x0 = match &spec.init {
        InitScheme::OneStep => init_one_step(&omega, &obs, rank)?,
        InitScheme::Resampled { partitions, nu } => {
            let nu = nu.unwrap_or_else(|| coherence_nu(factor));
            init_resampled(&omega, &obs, &ResampleConfig { partitions: *partitions, nu, rank })?
        }
    };
    let (result, report) = run_solver(&omega, &obs, &spec.solver, &x0)?;
    let rel = result.relative_error(factor)?;
    let (points, _) = run_to_points(&result, truth.dim())?;
    let (_, rmse) = procrustes_align(&points, truth)?;
    Ok((rel, rmse, report.iterations, report.status.to_string()))
}

/// `%.6g`-style formatting: 6 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const CSV_HEADER: &str = "trial,seed,rel_gram_error,rmse,iterations,status,wall_ms";

/// CSV text: header, one row per record and a final `mean` row averaging
/// the numeric columns.
pub fn csv_string(records: &[TrialRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(EdgError::invalid("no records to write"));
    }
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            format_g6(r.rel_gram_error),
            format_g6(r.rmse),
            r.iterations,
            r.status,
            r.wall_ms
        );
    }
    let k = records.len() as f64;
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / k;
    let _ = writeln!(
        s,
        "mean,,{},{},{},,{}",
        format_g6(mean(&|r| r.rel_gram_error)),
        format_g6(mean(&|r| r.rmse)),
        format_g6(mean(&|r| r.iterations as f64)),
        format_g6(mean(&|r| r.wall_ms as f64))
    );
    Ok(s)
}

pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let text = csv_string(records)?;
    fs::write(path, text).map_err(|e| EdgError::io(path, e))
}
