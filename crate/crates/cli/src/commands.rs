//! Resolved subcommand configurations and their execution.
//!
//! Each job is plain data: the manifest stores it verbatim and replay
//! deserializes it back into the same type.

use std::fmt::Write as _;
use std::path::PathBuf;

use polarsk::analytic::{abep_union_bound, bound_table, db_to_linear};
use polarsk::channel::MeasuredChannelSet;
use polarsk::constellation::Constellation;
use polarsk::detect::FlopCosts;
use polarsk::optimizer::{grid_verify_optimum, optimize_delta_eps, GridReport, OptimizerInput, OptimizerReport};
use polarsk::sim::{
    compare_detectors, measure_avg_flops, run_ber_sweep, ChannelConfig, ConstellationConfig, SimConfig, StopRule,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::manifest::Outputs;
use crate::CliError;

/// What a job reports back besides its files.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: String,
    /// A requested check failed; outputs are still written.
    pub violation: Option<String>,
}

pub trait Job: Serialize + DeserializeOwned {
    const NAME: &'static str;

    fn master_seed(&self) -> Option<u64> {
        None
    }

    /// Turns relative input paths into absolute ones so manifests replay from anywhere.
    fn absolutize(&mut self) -> Result<(), CliError> {
        Ok(())
    }

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError>;
}

fn absolute(p: &mut PathBuf) -> Result<(), CliError> {
    *p = std::fs::canonicalize(&*p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    Ok(())
}

fn absolutize_channel(c: &mut ChannelConfig) -> Result<(), CliError> {
    if let ChannelConfig::Measured { csv, sidecar } = c {
        absolute(csv)?;
        if let Some(s) = sidecar {
            absolute(s)?;
        }
    }
    Ok(())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn build_constellation(c: &ConstellationConfig, x_linear: Option<f64>) -> Result<Constellation, CliError> {
    let needs_x = matches!(c, ConstellationConfig::Latitude { k, delta_eps: None, .. } if *k >= 2);
    match x_linear {
        Some(x) => Ok(c.build(x)?),
        None if needs_x => Err(CliError::Config(
            "either delta_eps or the leakage ratio (--x) is needed to place the circles".into(),
        )),
        None => Ok(c.build(0.0)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationJob {
    pub constellation: ConstellationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_linear: Option<f64>,
}

impl Job for ConstellationJob {
    const NAME: &'static str = "constellation";

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        let c = build_constellation(&self.constellation, self.x_linear)?;
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        out.write("constellation.csv", &buf)?;
        let mut summary = format!("{} states, {} bits per symbol", c.len(), c.bits_per_symbol());
        if let Some(eps) = c.eps_list() {
            write!(summary, ", eps = {eps:?}").ok();
        }
        Ok(Report {
            summary,
            violation: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeJob {
    pub constellation: ConstellationConfig,
    pub x_linear: f64,
    #[serde(default = "one")]
    pub n_r: u32,
    pub snr_grid_db: Vec<f64>,
}

fn one<T: From<u8>>() -> T {
    T::from(1)
}

pub const ANALYZE_CSV_HEADER: &str = "rho_db,bound_tightened,bound_full,bound_asymptotic,coding_gain,diversity_order";

impl Job for AnalyzeJob {
    const NAME: &'static str = "analyze";

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        if self.snr_grid_db.is_empty() {
            return Err(CliError::Config("snr_grid_db is empty".into()));
        }
        let c = build_constellation(&self.constellation, Some(self.x_linear))?;
        let rows = bound_table(&c, self.x_linear, self.n_r, &self.snr_grid_db)?;
        let mut text = format!("{ANALYZE_CSV_HEADER}\n");
        for r in &rows {
            writeln!(
                text,
                "{},{},{},{},{},{}",
                r.rho_db,
                r.bound_tightened,
                r.bound_full,
                csv_opt(r.bound_asymptotic),
                csv_opt(r.coding_gain),
                r.diversity_order
            )
            .ok();
        }
        out.write("analyze.csv", text.as_bytes())?;
        let last = rows.last().expect("nonempty grid");
        Ok(Report {
            summary: format!(
                "{} SNR points; tightened bound {:.3e} at {} dB, diversity order {}",
                rows.len(),
                last.bound_tightened,
                last.rho_db,
                last.diversity_order
            ),
            violation: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeJob {
    pub k: usize,
    pub m: usize,
    pub x_linear: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Grid size for the brute-force cross-check; omitted to skip it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_verify: Option<usize>,
}

fn default_iters() -> usize {
    50
}

#[derive(Debug, Serialize)]
struct OptimizeOutput<'a> {
    input: &'a OptimizeJob,
    report: OptimizerReport,
    eps_list: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridReport>,
}

impl Job for OptimizeJob {
    const NAME: &'static str = "optimize";

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        let input = OptimizerInput {
            k_circles: self.k,
            m_psk: self.m,
            x_linear: self.x_linear,
            n_iters: self.iters,
        };
        let report = optimize_delta_eps(&input)?;
        let c = Constellation::latitude(self.k, self.m, report.delta_eps)?;
        let eps_list = c.eps_list().map(<[f64]>::to_vec).unwrap_or_default();
        let grid = self.grid_verify.map(|n| grid_verify_optimum(&input, n)).transpose()?;
        let mut summary = format!(
            "delta_eps_opt = {} rad ({:?}, {} iterations, residual {:.1e})\neps = {:?}",
            report.delta_eps, report.method, report.iterations, report.residual, eps_list
        );
        let mut violation = None;
        if let Some(g) = &grid {
            write!(
                summary,
                "\ngrid ({} points): argmax {} vs root {}: {}",
                g.grid_points,
                g.argmax,
                g.delta_eps_opt,
                if g.agrees { "agree" } else { "DISAGREE" }
            )
            .ok();
            if !g.agrees {
                violation = Some(format!(
                    "grid maximizer {} differs from the root {} by more than one step",
                    g.argmax, g.delta_eps_opt
                ));
            }
        }
        out.write_json(
            "optimize.json",
            &OptimizeOutput {
                input: self,
                report,
                eps_list,
                grid,
            },
        )?;
        Ok(Report { summary, violation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub sim: SimConfig,
    /// Fail (exit 3) if any point with BER < 1e-2 exceeds the tightened union bound by more than two CI half-widths.
    #[serde(default)]
    pub check_bound: bool,
}

pub const BOUND_CHECK_HEADER: &str = "snr_db,ber,ci_half_width,bound_tightened,within";

impl Job for SimulateJob {
    const NAME: &'static str = "simulate";

    fn master_seed(&self) -> Option<u64> {
        Some(self.sim.master_seed)
    }

    fn absolutize(&mut self) -> Result<(), CliError> {
        absolutize_channel(&mut self.sim.channel)
    }

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        let x = match &self.sim.channel {
            ChannelConfig::Rayleigh { x_linear } => Some(*x_linear),
            ChannelConfig::Measured { .. } => None,
        };
        let bound_setup = if self.check_bound {
            let x = x.ok_or_else(|| CliError::Config("--check-bound needs the Rayleigh channel model".into()))?;
            let c = self.sim.constellation.build(x)?;
            if !c.is_latitude() {
                return Err(CliError::Config("--check-bound needs a latitude constellation".into()));
            }
            Some((c, x))
        } else {
            None
        };

        let curve = run_ber_sweep(&self.sim)?;
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        out.write("ber.csv", &buf)?;

        let mut summary = String::new();
        for p in &curve.points {
            writeln!(
                summary,
                "{:>8} dB  ber {:.3e}  ({} errors / {} symbols)",
                p.snr_db, p.ber, p.bit_errors, p.symbols
            )
            .ok();
        }
        let mut violation = None;
        if let Some((c, x)) = bound_setup {
            let mut text = format!("{BOUND_CHECK_HEADER}\n");
            let mut bad = Vec::new();
            for p in &curve.points {
                let bound = abep_union_bound(&c, x, db_to_linear(p.snr_db), self.sim.n_r as u32, true)?;
                let half = 0.5 * (p.ci_hi - p.ci_lo);
                let within = !(p.ber < 1e-2) || p.ber <= bound + 2.0 * half;
                if !within {
                    bad.push(p.snr_db);
                }
                writeln!(text, "{},{},{},{},{}", p.snr_db, p.ber, half, bound, within).ok();
            }
            out.write("bound_check.csv", text.as_bytes())?;
            if !bad.is_empty() {
                violation = Some(format!("simulated BER exceeds the tightened bound at {bad:?} dB"));
            }
        }
        Ok(Report {
            summary: summary.trim_end().to_string(),
            violation,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityJob {
    pub constellation: ConstellationConfig,
    pub x_linear: f64,
    pub n_r: Vec<usize>,
    pub snr_db: f64,
    pub trials: u64,
    #[serde(default = "all_detectors")]
    pub detectors: Vec<String>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub flop_costs: FlopCosts,
}

fn all_detectors() -> Vec<String> {
    ["sic", "sd", "qr_ml", "ml"].map(String::from).to_vec()
}

pub const COMPLEXITY_CSV_HEADER: &str = "n_r,detector,trials,mean_flops,qr_flops,min_flops,max_flops,mean_nodes";
pub const COMPLEXITY_CDF_HEADER: &str = "n_r,detector,flops,cdf";

impl Job for ComplexityJob {
    const NAME: &'static str = "complexity";

    fn master_seed(&self) -> Option<u64> {
        Some(self.master_seed)
    }

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        if self.n_r.is_empty() || self.detectors.is_empty() {
            return Err(CliError::Config("need at least one n_r and one detector".into()));
        }
        let names: Vec<&str> = self.detectors.iter().map(String::as_str).collect();
        let mut table = format!("{COMPLEXITY_CSV_HEADER}\n");
        let mut cdf = format!("{COMPLEXITY_CDF_HEADER}\n");
        let mut summary = String::new();
        for &n_r in &self.n_r {
            let cfg = SimConfig {
                constellation: self.constellation.clone(),
                n_r,
                channel: ChannelConfig::Rayleigh {
                    x_linear: self.x_linear,
                },
                snr_grid_db: vec![self.snr_db],
                detector: names[0].into(),
                master_seed: self.master_seed,
                stop: StopRule::default(),
                workers: self.workers,
                flop_costs: self.flop_costs,
            };
            for s in measure_avg_flops(&cfg, &names, self.snr_db, self.trials)? {
                writeln!(
                    table,
                    "{},{},{},{},{},{},{},{}",
                    n_r, s.detector, s.trials, s.mean, s.qr_mean, s.min, s.max, s.mean_nodes
                )
                .ok();
                for (f, p) in &s.cdf {
                    writeln!(cdf, "{},{},{},{}", n_r, s.detector, f, p).ok();
                }
                writeln!(summary, "N_R={n_r:<2} {:<6} {:>10.1} flops", s.detector, s.mean).ok();
            }
        }
        out.write("complexity.csv", table.as_bytes())?;
        out.write("complexity_cdf.csv", cdf.as_bytes())?;
        Ok(Report {
            summary: summary.trim_end().to_string(),
            violation: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestJob {
    pub csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct IngestReport {
    xpi_linear: f64,
    xpi_db: f64,
    tones: usize,
    points: usize,
    mean_copolar_power: f64,
}

impl Job for IngestJob {
    const NAME: &'static str = "ingest";

    fn absolutize(&mut self) -> Result<(), CliError> {
        absolute(&mut self.csv)?;
        if let Some(s) = &mut self.sidecar {
            absolute(s)?;
        }
        Ok(())
    }

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        let set = MeasuredChannelSet::ingest(&self.csv, self.sidecar.as_deref())?;
        let mut buf = Vec::new();
        set.write_csv(&mut buf, true)?;
        out.write("channel_normalized.csv", &buf)?;
        let x = set.estimate_xpi()?;
        let report = IngestReport {
            xpi_linear: x.linear,
            xpi_db: x.db,
            tones: set.tones().len(),
            points: set.points().len(),
            mean_copolar_power: set.mean_copolar_power(),
        };
        out.write_json("xpi.json", &report)?;
        Ok(Report {
            summary: format!(
                "{} points x {} tones, X = {} ({} dB)",
                report.points, report.tones, x.linear, x.db
            ),
            violation: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareJob {
    /// `sim.detector` is the first curve.
    pub sim: SimConfig,
    pub versus: String,
    pub target_ber: f64,
}

#[derive(Debug, Serialize)]
struct GapSummary<'a> {
    target_ber: f64,
    detector_a: &'a str,
    detector_b: &'a str,
    snr_a_db: f64,
    snr_b_db: f64,
    gap_db: f64,
}

impl Job for CompareJob {
    const NAME: &'static str = "compare";

    fn master_seed(&self) -> Option<u64> {
        Some(self.sim.master_seed)
    }

    fn absolutize(&mut self) -> Result<(), CliError> {
        absolutize_channel(&mut self.sim.channel)
    }

    fn run(&self, out: &mut Outputs) -> Result<Report, CliError> {
        if !(self.target_ber > 0.0 && self.target_ber < 0.5) {
            return Err(CliError::Config(format!(
                "target BER {} outside (0, 0.5)",
                self.target_ber
            )));
        }
        let g = compare_detectors(&self.sim, &self.sim.detector, &self.versus, self.target_ber)?;
        let mut text = String::from("snr_db,detector,symbols,bit_errors,ber\n");
        for curve in [&g.curve_a, &g.curve_b] {
            for p in &curve.points {
                writeln!(
                    text,
                    "{},{},{},{},{}",
                    p.snr_db, curve.detector, p.symbols, p.bit_errors, p.ber
                )
                .ok();
            }
        }
        out.write("compare.csv", text.as_bytes())?;
        out.write_json(
            "gap.json",
            &GapSummary {
                target_ber: g.target_ber,
                detector_a: &g.detector_a,
                detector_b: &g.detector_b,
                snr_a_db: g.snr_a_db,
                snr_b_db: g.snr_b_db,
                gap_db: g.gap_db,
            },
        )?;
        Ok(Report {
            summary: format!(
                "{} reaches BER {:e} at {:.3} dB, {} at {:.3} dB: gap {:.3} dB",
                g.detector_a, g.target_ber, g.snr_a_db, g.detector_b, g.snr_b_db, g.gap_db
            ),
            violation: None,
        })
    }
}
