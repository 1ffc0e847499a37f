//! Batch front end for the polarsk toolkit.
//!
//! Every subcommand resolves its flags (on top of an optional `--config` JSON
//! file) into a plain configuration, writes CSV/JSON outputs into the output
//! directory, and records a `<subcommand>.manifest.json` that `replay` can
//! rerun and verify byte for byte.

pub mod commands;
pub mod manifest;
pub mod parse;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polarsk::ErrorClass;
use serde_json::{json, Map, Value};

use commands::{AnalyzeJob, CompareJob, ComplexityJob, ConstellationJob, IngestJob, Job, OptimizeJob, SimulateJob};
use manifest::{Outputs, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

pub const OUT_DIR_ENV: &str = "POLARSK_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] polarsk::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Convergence => EXIT_CONVERGENCE,
            },
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::Check(_) | CliError::Io(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "polarsk",
    version,
    about = "Polarization shift keying: constellations, bounds, detectors, simulation"
)]
pub struct Cli {
    /// Output directory [default: $POLARSK_OUT_DIR, else the current directory]
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export a constellation as CSV
    Constellation(ConstellationArgs),
    /// Union bounds and their high-SNR asymptote versus SNR
    Analyze(AnalyzeArgs),
    /// Optimal latitude spacing
    Optimize(OptimizeArgs),
    /// Monte Carlo bit error rate
    Simulate(SimulateArgs),
    /// Detector flop counts across receive-antenna counts
    Complexity(ComplexityArgs),
    /// Normalize a measured channel sweep and estimate the cross-polar ratio
    Ingest(IngestArgs),
    /// SNR gap between two detectors at a target BER
    Compare(CompareArgs),
    /// Rerun a manifest and check that every output is reproduced exactly
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Default)]
pub struct ConstellationFlags {
    /// Number of latitude circles K
    #[arg(long)]
    pub k: Option<usize>,
    /// PSK order M
    #[arg(long)]
    pub m: Option<usize>,
    /// Latitude half-spacing in radians [default: optimum for --x]
    #[arg(long)]
    pub delta_eps: Option<f64>,
    /// Dual-polarized spatial modulation instead of latitude circles
    #[arg(long)]
    pub dpsm: bool,
}

#[derive(Debug, Args)]
pub struct ConstellationArgs {
    /// JSON configuration; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub c: ConstellationFlags,
    /// Cross-polar ratio, e.g. -4.5665dB or 0.35lin
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_linear)]
    pub x: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub c: ConstellationFlags,
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_linear)]
    pub x: Option<f64>,
    /// Receive antennas
    #[arg(long)]
    pub n_r: Option<u32>,
    /// SNR grid, `start:step:stop` or a comma list, with a unit suffix (e.g. 0:2:40dB)
    #[arg(long, allow_hyphen_values = true, value_parser = parse::grid)]
    pub snr: Option<parse::Grid>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_linear)]
    pub x: Option<f64>,
    /// Newton iteration budget
    #[arg(long)]
    pub iters: Option<usize>,
    /// Cross-check against a brute-force grid of this many points
    #[arg(long, num_args = 0..=1, default_missing_value = "10000")]
    pub grid_verify: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimFlags {
    #[command(flatten)]
    pub c: ConstellationFlags,
    #[arg(long)]
    pub n_r: Option<usize>,
    /// Cross-polar ratio of the Rayleigh model
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_linear)]
    pub x: Option<f64>,
    /// Replay a measured sweep (CSV) instead of the Rayleigh model
    #[arg(long, conflicts_with = "x")]
    pub measured: Option<PathBuf>,
    /// JSON sidecar for --measured
    #[arg(long, requires = "measured")]
    pub sidecar: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse::grid)]
    pub snr: Option<parse::Grid>,
    /// Detector: ml, qr_ml, sic or sd [default: sd]
    #[arg(long)]
    pub detector: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop a point after this many bit errors
    #[arg(long)]
    pub min_errors: Option<u64>,
    /// Hard cap on symbols per point
    #[arg(long)]
    pub max_symbols: Option<u64>,
    /// Run exactly this many symbols per point
    #[arg(long, conflicts_with_all = ["min_errors", "max_symbols"])]
    pub symbols: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimFlags,
    /// Exit with status 3 if the BER exceeds the tightened union bound
    #[arg(long)]
    pub check_bound: bool,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub c: ConstellationFlags,
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_linear)]
    pub x: Option<f64>,
    /// Receive-antenna counts, e.g. 1,2,4
    #[arg(long, value_parser = parse::counts)]
    pub n_r: Option<parse::Counts>,
    /// Operating SNR, e.g. 20dB
    #[arg(long, allow_hyphen_values = true, value_parser = parse::level_db)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Comma-separated detector names
    #[arg(long, value_delimiter = ',')]
    pub detectors: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measured sweep CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON sidecar with bandwidth and tone count
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimFlags,
    /// Second detector
    #[arg(long)]
    pub versus: Option<String>,
    /// Target BER, e.g. 1e-4
    #[arg(long)]
    pub target_ber: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn load_base(path: Option<&Path>) -> Result<Value, CliError> {
    match path {
        None => Ok(json!({})),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if v.is_object() {
                // A run manifest works as a config too: take its resolved configuration.
                match v.get("subcommand").zip(v.get("config")) {
                    Some((_, cfg)) if cfg.is_object() => Ok(cfg.clone()),
                    _ => Ok(v),
                }
            } else {
                Err(CliError::Config(format!("{}: expected a JSON object", p.display())))
            }
        }
    }
}

fn obj(v: &mut Value) -> &mut Map<String, Value> {
    if !v.is_object() {
        *v = json!({});
    }
    v.as_object_mut().expect("object")
}

fn set<T: serde::Serialize>(v: &mut Value, key: &str, x: Option<T>) {
    if let Some(x) = x {
        obj(v).insert(key.into(), json!(x));
    }
}

fn child<'a>(v: &'a mut Value, key: &str) -> &'a mut Value {
    obj(v).entry(key.to_string()).or_insert_with(|| json!({}))
}

impl ConstellationFlags {
    fn overlay(&self, v: &mut Value) {
        let touched = self.dpsm || self.k.is_some() || self.m.is_some() || self.delta_eps.is_some();
        if !touched && v.get("constellation").is_some() {
            return;
        }
        let c = obj(child(v, "constellation"));
        if self.dpsm {
            c.insert("kind".into(), json!("dpsm"));
            c.remove("k");
            c.remove("delta_eps");
        } else if self.k.is_some() || self.delta_eps.is_some() || !c.contains_key("kind") {
            c.insert("kind".into(), json!("latitude"));
        }
        if c.get("kind") == Some(&json!("latitude")) && !c.contains_key("k") && self.k.is_none() {
            c.insert("k".into(), json!(1));
        }
        if let Some(k) = self.k {
            c.insert("k".into(), json!(k));
        }
        if let Some(m) = self.m {
            c.insert("m".into(), json!(m));
        }
        if let Some(d) = self.delta_eps {
            c.insert("delta_eps".into(), json!(d));
        }
    }
}

impl SimFlags {
    fn overlay(&self, v: &mut Value) {
        self.c.overlay(v);
        set(v, "n_r", self.n_r);
        if let Some(x) = self.x {
            obj(v).insert("channel".into(), json!({"model": "rayleigh", "x_linear": x}));
        }
        if let Some(csv) = &self.measured {
            let mut ch = json!({"model": "measured", "csv": csv});
            set(&mut ch, "sidecar", self.sidecar.as_ref());
            obj(v).insert("channel".into(), ch);
        }
        set(v, "snr_grid_db", self.snr.as_ref().map(|g| &g.0));
        set(v, "detector", self.detector.as_ref());
        set(v, "master_seed", self.seed);
        set(v, "workers", self.workers);
        if let Some(n) = self.symbols {
            obj(v).insert("stop".into(), json!({"min_bit_errors": u64::MAX, "max_symbols": n}));
        }
        if self.min_errors.is_some() || self.max_symbols.is_some() {
            let stop = child(v, "stop");
            set(stop, "min_bit_errors", self.min_errors);
            set(stop, "max_symbols", self.max_symbols);
        }
    }
}

fn resolve<J: Job>(v: Value) -> Result<J, CliError> {
    let mut job: J = serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: {e}", J::NAME)))?;
    job.absolutize()?;
    Ok(job)
}

/// Outcome of one executed job.
#[derive(Debug)]
pub struct Execution {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub summary: String,
    pub violation: Option<String>,
}

/// Runs a resolved job into `dir` and writes its manifest.
pub fn execute<J: Job>(job: &J, dir: &Path) -> Result<Execution, CliError> {
    let mut out = Outputs::new(dir)?;
    let report = job.run(&mut out)?;
    let config = serde_json::to_value(job).map_err(|e| CliError::Data(e.to_string()))?;
    let manifest = RunManifest::new(J::NAME, job.master_seed(), config, out.into_files());
    let manifest_path = dir.join(RunManifest::file_name(J::NAME));
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    Ok(Execution {
        manifest,
        manifest_path,
        summary: report.summary,
        violation: report.violation,
    })
}

fn replay(m: &RunManifest, dir: &Path) -> Result<Execution, CliError> {
    let cfg = m.config.clone();
    let exec = match m.subcommand.as_str() {
        ConstellationJob::NAME => execute(&resolve::<ConstellationJob>(cfg)?, dir)?,
        AnalyzeJob::NAME => execute(&resolve::<AnalyzeJob>(cfg)?, dir)?,
        OptimizeJob::NAME => execute(&resolve::<OptimizeJob>(cfg)?, dir)?,
        SimulateJob::NAME => execute(&resolve::<SimulateJob>(cfg)?, dir)?,
        ComplexityJob::NAME => execute(&resolve::<ComplexityJob>(cfg)?, dir)?,
        IngestJob::NAME => execute(&resolve::<IngestJob>(cfg)?, dir)?,
        CompareJob::NAME => execute(&resolve::<CompareJob>(cfg)?, dir)?,
        other => return Err(CliError::Data(format!("manifest names unknown subcommand `{other}`"))),
    };
    let mismatched: Vec<&str> = m
        .outputs
        .iter()
        .filter(|o| !exec.manifest.outputs.contains(o))
        .map(|o| o.file.as_str())
        .collect();
    if !mismatched.is_empty() || exec.manifest.outputs.len() != m.outputs.len() {
        return Err(CliError::Check(format!("replay did not reproduce {mismatched:?}")));
    }
    Ok(Execution {
        summary: format!("replayed `{}`: {} outputs reproduced", m.subcommand, m.outputs.len()),
        ..exec
    })
}

fn dispatch(cli: Cli) -> Result<Execution, CliError> {
    let dir = cli.out_dir.unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Constellation(a) => {
            let mut v = load_base(a.config.as_deref())?;
            a.c.overlay(&mut v);
            set(&mut v, "x_linear", a.x);
            execute(&resolve::<ConstellationJob>(v)?, &dir)
        }
        Command::Analyze(a) => {
            let mut v = load_base(a.config.as_deref())?;
            a.c.overlay(&mut v);
            set(&mut v, "x_linear", a.x);
            set(&mut v, "n_r", a.n_r);
            set(&mut v, "snr_grid_db", a.snr.as_ref().map(|g| &g.0));
            execute(&resolve::<AnalyzeJob>(v)?, &dir)
        }
        Command::Optimize(a) => {
            let mut v = load_base(a.config.as_deref())?;
            set(&mut v, "k", a.k);
            set(&mut v, "m", a.m);
            set(&mut v, "x_linear", a.x);
            set(&mut v, "iters", a.iters);
            set(&mut v, "grid_verify", a.grid_verify);
            execute(&resolve::<OptimizeJob>(v)?, &dir)
        }
        Command::Simulate(a) => {
            let mut v = load_base(a.config.as_deref())?;
            a.sim.overlay(child(&mut v, "sim"));
            if a.check_bound {
                obj(&mut v).insert("check_bound".into(), json!(true));
            }
            execute(&resolve::<SimulateJob>(v)?, &dir)
        }
        Command::Complexity(a) => {
            let mut v = load_base(a.config.as_deref())?;
            a.c.overlay(&mut v);
            set(&mut v, "x_linear", a.x);
            set(&mut v, "n_r", a.n_r.as_ref().map(|c| &c.0));
            set(&mut v, "snr_db", a.snr);
            set(&mut v, "trials", a.trials);
            set(&mut v, "detectors", a.detectors.as_ref());
            set(&mut v, "master_seed", a.seed);
            set(&mut v, "workers", a.workers);
            execute(&resolve::<ComplexityJob>(v)?, &dir)
        }
        Command::Ingest(a) => {
            let mut v = load_base(a.config.as_deref())?;
            set(&mut v, "csv", a.csv.as_ref());
            set(&mut v, "sidecar", a.sidecar.as_ref());
            execute(&resolve::<IngestJob>(v)?, &dir)
        }
        Command::Compare(a) => {
            let mut v = load_base(a.config.as_deref())?;
            a.sim.overlay(child(&mut v, "sim"));
            set(&mut v, "versus", a.versus.as_ref());
            set(&mut v, "target_ber", a.target_ber);
            execute(&resolve::<CompareJob>(v)?, &dir)
        }
        Command::Replay(a) => {
            let m = RunManifest::load(&a.manifest)?;
            replay(&m, &dir)
        }
    }
}

/// Runs the parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(exec) => {
            if !exec.summary.is_empty() {
                println!("{}", exec.summary);
            }
            println!("manifest: {}", exec.manifest_path.display());
            match exec.violation {
                Some(msg) => {
                    eprintln!("error: check failed: {msg}");
                    EXIT_DATA
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
