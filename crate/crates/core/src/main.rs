use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edg::diagnostics::diagnose;
use edg::dualbasis::SampleSet;
use edg::error::{EdgError, Result};
use edg::experiment::{
    csv_string, generate_dataset, run_experiment, run_experiment_serial, trial_samples, Dataset, ExperimentSpec,
    InitScheme, SamplingScheme,
};
use edg::manifold::LowRankFactor;
use edg::rng::{derive_seed, stream};
use edg::sampling::StructuredSpec;
use edg::solvers::{SolverConfig, Variant};

/// Point configurations from partial squared distances.
#[derive(Parser, Debug)]
#[command(name = "edg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a trial sweep and write per-trial CSV records.
    #[command(args_override_self = true)]
    Run(RunArgs),
    /// Check the dual-basis identities and operator properties.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Report coherence, flatness, condition number and RIP deviation.
    #[command(args_override_self = true)]
    Diag(DiagArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DatasetArg {
    Sphere,
    #[value(alias = "swissroll")]
    SwissRoll,
    Cow,
    Cities,
    #[value(alias = "gaussian")]
    Random,
    Xyz,
    Pdb,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SamplingArg {
    Uniform,
    Structured,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgArg {
    Frame,
    Pseudo,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InitArg {
    Onestep,
    #[value(alias = "resampled")]
    Resample,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// key=value file supplying any of these flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sphere")]
    dataset: DatasetArg,
    /// Coordinate file for cow, cities, xyz and pdb datasets.
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
    /// Number of points of a synthetic dataset.
    #[arg(long, default_value_t = 1002)]
    n: usize,
    /// Ambient dimension of the random dataset.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    sampling: SamplingArg,
    /// Fraction of the n(n-1)/2 pairs drawn (with replacement).
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Pseudoanchor count for structured sampling.
    #[arg(long, default_value_t = 20)]
    anchors: usize,
    /// Pseudoanchor partners per mobile node.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Bernoulli rate inside the pseudoanchor block.
    #[arg(long, default_value_t = 0.3)]
    e_rate: f64,
    /// Fully observed node (1-based); defaults to the median free index.
    #[arg(long)]
    central: Option<usize>,
    /// Fixed sample set file ("i j count" lines), used in every trial.
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, value_enum, default_value = "frame")]
    alg: AlgArg,
    #[arg(long, value_enum, default_value = "onestep")]
    init: InitArg,
    /// Refinement rounds S of the resampled initialization.
    #[arg(long, default_value_t = 6)]
    partitions: usize,
    /// Trimming level; defaults to the coherence of the ground truth.
    #[arg(long)]
    nu: Option<f64>,
    /// Defaults to 1000, or 10000 for structured sampling.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    rel_tol: f64,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    /// CSV destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Record wall-clock milliseconds per trial.
    #[arg(long)]
    timing: bool,
    /// Run trials on the calling thread only.
    #[arg(long)]
    serial: bool,
    /// Write the sample set of trial 0 to this file.
    #[arg(long, value_name = "FILE")]
    write_samples: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest n of the exhaustive checks.
    #[arg(long, default_value_t = 10)]
    max_n: usize,
}

#[derive(Args, Debug)]
struct DiagArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Trial whose sample set is diagnosed.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    #[arg(long, default_value_t = 100)]
    power_iters: usize,
    /// Report destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match expand_config(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("edg: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Diag(a) => cmd_diag(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("edg: {e}");
            ExitCode::from(1)
        }
    }
}

/// Splices the flags of a `--config` file in right after the subcommand, so
/// flags given on the command line override them.
fn expand_config(raw: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (k, a) in raw.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if a == "--config" {
            path = raw.get(k + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else { return Ok(raw) };
    let text = fs::read_to_string(&path).map_err(|e| EdgError::io(&path, e))?;
    let mut extra = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| EdgError::Parse {
            path: path.display().to_string(),
            line: k + 1,
            msg: "expected key=value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            continue;
        }
        match value {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => {
                extra.push(format!("--{key}"));
                extra.push(value.to_string());
            }
        }
    }
    let sub = raw.iter().skip(1).position(|a| !a.starts_with('-')).map_or(raw.len(), |p| p + 2);
    let mut out = raw[..sub.min(raw.len())].to_vec();
    out.extend(extra);
    out.extend(raw[sub.min(raw.len())..].iter().cloned());
    Ok(out)
}

fn dataset(p: &ProblemArgs) -> Result<Dataset> {
    let file = || {
        p.file
            .clone()
            .ok_or_else(|| EdgError::invalid("this dataset needs --file"))
    };
    Ok(match p.dataset {
        DatasetArg::Sphere => Dataset::Sphere,
        DatasetArg::SwissRoll => Dataset::SwissRoll,
        DatasetArg::Random => Dataset::RandomGaussian,
        DatasetArg::Cow => Dataset::Cow(p.file.clone()),
        DatasetArg::Cities => Dataset::Cities(p.file.clone()),
        DatasetArg::Xyz => Dataset::XyzFile(file()?),
        DatasetArg::Pdb => Dataset::PdbFile(file()?),
    })
}

fn read_samples(path: &Path) -> Result<SampleSet> {
    let f = fs::File::open(path).map_err(|e| EdgError::io(path, e))?;
    SampleSet::read_from(BufReader::new(f), &path.display().to_string())
}

fn sampling(p: &ProblemArgs) -> Result<SamplingScheme> {
    if let Some(path) = &p.samples {
        return Ok(SamplingScheme::Fixed(read_samples(path)?));
    }
    Ok(match p.sampling {
        SamplingArg::Uniform => SamplingScheme::UniformRate(p.gamma),
        SamplingArg::Full => SamplingScheme::Full,
        SamplingArg::Structured => {
            let central = match p.central {
                Some(0) => return Err(EdgError::invalid("--central is 1-based")),
                Some(c) => Some(c - 1),
                None => None,
            };
            SamplingScheme::Structured(StructuredSpec {
                anchors: p.anchors,
                central,
                e_rate: p.e_rate,
                k: p.k,
            })
        }
    })
}

fn build_spec(p: &ProblemArgs, solver: SolverConfig, init: InitScheme, trials: usize) -> Result<ExperimentSpec> {
    Ok(ExperimentSpec {
        dataset: dataset(p)?,
        n: p.n,
        ambient_dim: p.dim,
        solver,
        sampling: sampling(p)?,
        init,
        trials,
        base_seed: p.seed,
        record_timing: false,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| EdgError::io(path, e)),
        None => match io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(EdgError::io("<stdout>", e)),
            _ => Ok(()),
        },
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let variant = match a.alg {
        AlgArg::Frame => Variant::FrameDescent,
        AlgArg::Pseudo => Variant::PseudoGradient,
    };
    let mut solver = SolverConfig::new(a.rank, variant);
    solver.rel_tol = a.rel_tol;
    solver.max_iters = a.max_iters.unwrap_or(match a.problem.sampling {
        SamplingArg::Structured => 10_000,
        _ => SolverConfig::DEFAULT_MAX_ITERS,
    });
    let init = match a.init {
        InitArg::Onestep => InitScheme::OneStep,
        InitArg::Resample => InitScheme::Resampled {
            partitions: a.partitions,
            nu: a.nu,
        },
    };
    let mut spec = build_spec(&a.problem, solver, init, a.trials)?;
    spec.record_timing = a.timing;

    if let Some(path) = &a.write_samples {
        let n = generate_dataset(&spec)?.count();
        let set = trial_samples(&spec, n, 0)?;
        let mut buf = Vec::new();
        set.write_to(&mut buf).map_err(|e| EdgError::io(path, e))?;
        fs::write(path, buf).map_err(|e| EdgError::io(path, e))?;
    }

    let records = if a.serial {
        run_experiment_serial(&spec)?
    } else {
        run_experiment(&spec)?
    };
    let text = csv_string(&records)?;
    emit(&text, a.out.as_deref())?;
    let failed = records.iter().filter(|r| r.status.starts_with("error")).count();
    if let Some(mean) = text.lines().last() {
        eprintln!("{} trials, {failed} failed; {mean}", records.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let checks = edg::verify::run_suite(a.max_n);
    let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
    emit(&text, None)?;
    let all = checks.iter().all(|c| c.passed);
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_diag(a: DiagArgs) -> Result<ExitCode> {
    let spec = build_spec(&a.problem, SolverConfig::new(1, Variant::FrameDescent), InitScheme::OneStep, a.trial + 1)?;
    let points = generate_dataset(&spec)?;
    let truth = LowRankFactor::from_points(&points)?;
    let omega = trial_samples(&spec, points.count(), a.trial)?;
    let seed = derive_seed(spec.base_seed, stream::POWER, a.trial as u64);
    let report = diagnose(&truth, &omega, a.power_iters, seed)?;
    let mut text = format!(
        "# n={} r={} m={} trial={}\n",
        points.count(),
        truth.rank(),
        omega.len(),
        a.trial
    );
    text.push_str(&report.to_kv());
    emit(&text, a.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}
