//! Monte Carlo bit-error-rate engine.
//!
//! Trial `t` at SNR index `s` draws everything from its own generator seeded
//! by `(master_seed, s, t)`. Trials run in fixed-size blocks and the stopping
//! rule is checked only between blocks, so results do not depend on how many
//! worker threads share a block.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::db_to_linear;
use crate::channel::{sample_rayleigh_channel, transmit, ChannelRealization, MeasuredChannelSet};
use crate::constellation::Constellation;
use crate::detect::{Detector, DetectorRegistry, FlopCosts, FlopLedger};
use crate::error::{Error, Result};
use crate::optimizer::{optimize_delta_eps, OptimizerInput};
use crate::rng::trial_rng;

pub const DEFAULT_MIN_BIT_ERRORS: u64 = 200;
pub const DEFAULT_MAX_SYMBOLS: u64 = 2_000_000;
pub const BLOCK_SYMBOLS: u64 = 4096;
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstellationConfig {
    /// C_K; a missing `delta_eps` with `k >= 2` selects the optimum for the run's `X`.
    Latitude {
        k: usize,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_eps: Option<f64>,
    },
    /// Dual-polarized spatial modulation.
    Dpsm { m: usize },
}

impl ConstellationConfig {
    pub fn build(&self, x_linear: f64) -> Result<Constellation> {
        match *self {
            ConstellationConfig::Latitude { k, m, delta_eps } => {
                let de = match delta_eps {
                    Some(d) => d,
                    None if k >= 2 => {
                        optimize_delta_eps(&OptimizerInput {
                            k_circles: k,
                            m_psk: m,
                            x_linear,
                            n_iters: 50,
                        })?
                        .delta_eps
                    }
                    None => 0.0,
                };
                Constellation::latitude(k, m, de)
            }
            ConstellationConfig::Dpsm { m } => Constellation::dual_pol_sm(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    #[serde(default = "default_max_symbols")]
    pub max_symbols: u64,
}

fn default_min_bit_errors() -> u64 {
    DEFAULT_MIN_BIT_ERRORS
}

fn default_max_symbols() -> u64 {
    DEFAULT_MAX_SYMBOLS
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_bit_errors: DEFAULT_MIN_BIT_ERRORS,
            max_symbols: DEFAULT_MAX_SYMBOLS,
        }
    }
}

impl StopRule {
    /// Runs exactly `n` symbols.
    pub fn fixed(n: u64) -> Self {
        Self {
            min_bit_errors: u64::MAX,
            max_symbols: n,
        }
    }
}

/// Where channel realizations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Rayleigh {
        x_linear: f64,
    },
    /// Replay of a measured sweep; one receive antenna.
    Measured {
        csv: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sidecar: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub constellation: ConstellationConfig,
    #[serde(default = "one")]
    pub n_r: usize,
    pub channel: ChannelConfig,
    pub snr_grid_db: Vec<f64>,
    /// Registry name; the sphere decoder unless stated.
    #[serde(default = "default_detector")]
    pub detector: String,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub flop_costs: FlopCosts,
}

fn one() -> usize {
    1
}

fn default_detector() -> String {
    "sd".into()
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db is empty".into()));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("snr_grid_db has a non-finite entry".into()));
        }
        if self.stop.max_symbols < 1000 {
            return Err(Error::Config("stop.max_symbols must be at least 1000".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.n_r == 0 {
            return Err(Error::Config("n_r must be at least 1".into()));
        }
        match &self.channel {
            ChannelConfig::Rayleigh { x_linear } if !(*x_linear >= 0.0 && x_linear.is_finite()) => {
                Err(Error::Config(format!("x_linear = {x_linear} must be finite and >= 0")))
            }
            ChannelConfig::Measured { .. } if self.n_r != 1 => {
                Err(Error::Config("measured replay supports n_r = 1 only".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Per-SNR outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub symbols: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub avg_flops: f64,
    pub avg_nodes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub detector: String,
    pub bits_per_symbol: u32,
    pub points: Vec<BerPoint>,
}

pub const BER_CSV_HEADER: &str = "snr_db,symbols,bit_errors,ber,ci_lo,ci_hi,avg_flops,avg_nodes";

impl BerCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{BER_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.snr_db, p.symbols, p.bit_errors, p.ber, p.ci_lo, p.ci_hi, p.avg_flops, p.avg_nodes
            )?;
        }
        Ok(())
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

enum ChannelSource {
    Rayleigh { n_r: usize, x: f64 },
    Measured(Arc<MeasuredChannelSet>),
}

impl ChannelSource {
    fn from_config(cfg: &SimConfig) -> Result<Self> {
        Ok(match &cfg.channel {
            ChannelConfig::Rayleigh { x_linear } => ChannelSource::Rayleigh {
                n_r: cfg.n_r,
                x: *x_linear,
            },
            ChannelConfig::Measured { csv, sidecar } => {
                ChannelSource::Measured(Arc::new(MeasuredChannelSet::ingest(csv, sidecar.as_deref())?))
            }
        })
    }

    fn x_linear(&self) -> Result<f64> {
        match self {
            ChannelSource::Rayleigh { x, .. } => Ok(*x),
            ChannelSource::Measured(set) => Ok(set.estimate_xpi()?.linear),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization> {
        match self {
            ChannelSource::Rayleigh { n_r, x } => sample_rayleigh_channel(*n_r, *x, rng),
            ChannelSource::Measured(set) => set.draw_random(rng),
        }
    }
}

/// Everything a trial needs, shared read-only across workers.
struct TrialContext {
    constellation: Constellation,
    detector: Arc<dyn Detector>,
    source: ChannelSource,
    seed: u64,
    label_mask: u32,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    symbols: u64,
    bit_errors: u64,
    ledger: FlopLedger,
    nodes: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            symbols: self.symbols + o.symbols,
            bit_errors: self.bit_errors + o.bit_errors,
            ledger: self.ledger + o.ledger,
            nodes: self.nodes + o.nodes,
        }
    }
}

struct TrialOutcome {
    bit_errors: u32,
    ledger: FlopLedger,
    qr_ledger: FlopLedger,
    nodes: u64,
}

impl TrialContext {
    fn new(cfg: &SimConfig, registry: &DetectorRegistry, detector: &str) -> Result<Self> {
        let source = ChannelSource::from_config(cfg)?;
        let constellation = cfg.constellation.build(source.x_linear()?)?;
        let detector = registry.get(detector)?;
        detector.check(&constellation)?;
        let label_mask = (1u32 << constellation.bits_per_symbol()) - 1;
        Ok(Self {
            constellation,
            detector,
            source,
            seed: cfg.master_seed,
            label_mask,
        })
    }

    fn trial(&self, stream: u64, t: u64, rho: f64) -> Result<TrialOutcome> {
        let mut rng = trial_rng(self.seed, stream, t);
        let h = self.source.draw(&mut rng)?;
        let label = rng.random::<u32>() & self.label_mask;
        let sent = self.constellation.index_of_label(label)?;
        let rx = transmit(&h, self.constellation.state(sent), rho, &mut rng)?;
        let d = self.detector.detect(&h, &rx.y, &self.constellation)?;
        Ok(TrialOutcome {
            bit_errors: self.constellation.hamming(sent, d.index),
            ledger: d.ledger,
            qr_ledger: d.qr_ledger,
            nodes: d.nodes_visited,
        })
    }

    fn block(&self, stream: u64, start: u64, end: u64, rho: f64) -> Result<Tally> {
        (start..end)
            .into_par_iter()
            .map(|t| {
                self.trial(stream, t, rho).map(|o| Tally {
                    symbols: 1,
                    bit_errors: o.bit_errors as u64,
                    ledger: o.ledger,
                    nodes: o.nodes,
                })
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Runs the sweep with the standard detector set.
pub fn run_ber_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    run_ber_sweep_with(cfg, &DetectorRegistry::standard())
}

/// Runs the sweep, resolving the detector name in `registry`.
pub fn run_ber_sweep_with(cfg: &SimConfig, registry: &DetectorRegistry) -> Result<BerCurve> {
    cfg.validate()?;
    let ctx = TrialContext::new(cfg, registry, &cfg.detector)?;
    let bits = ctx.constellation.bits_per_symbol();
    let pool = pool(cfg.workers)?;
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for (s, &db) in cfg.snr_grid_db.iter().enumerate() {
        let rho = db_to_linear(db);
        let mut tally = Tally::default();
        while tally.symbols < cfg.stop.max_symbols && tally.bit_errors < cfg.stop.min_bit_errors {
            let end = (tally.symbols + BLOCK_SYMBOLS).min(cfg.stop.max_symbols);
            let block = pool.install(|| ctx.block(s as u64, tally.symbols, end, rho))?;
            tally = tally.merge(block);
        }
        let n_bits = tally.symbols * bits as u64;
        let (ci_lo, ci_hi) = wilson_interval(tally.bit_errors, n_bits);
        points.push(BerPoint {
            snr_db: db,
            symbols: tally.symbols,
            bit_errors: tally.bit_errors,
            ber: tally.bit_errors as f64 / n_bits as f64,
            ci_lo,
            ci_hi,
            avg_flops: tally.ledger.total(&cfg.flop_costs) as f64 / tally.symbols as f64,
            avg_nodes: tally.nodes as f64 / tally.symbols as f64,
        });
    }
    Ok(BerCurve {
        detector: cfg.detector.clone(),
        bits_per_symbol: bits,
        points,
    })
}

/// Negated least-squares slope of `log10(y)` against `x_db / 10`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(format!("{} points, need 2", points.len())));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 / 10.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints("all points share one SNR".into()));
    }
    Ok(-sxy / sxx)
}

/// Diversity order from the points with `1e-6 < BER < 1e-2` and at least one error.
pub fn estimate_diversity_order(curve: &BerCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.bit_errors > 0 && p.ber > 1e-6 && p.ber < 1e-2)
        .map(|p| (p.snr_db, p.ber))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints(format!(
            "{} points with BER in (1e-6, 1e-2), need 3",
            pts.len()
        )));
    }
    fit_log_slope(&pts)
}

/// SNR (dB) where the curve first falls to `target`, interpolating `log10 BER` linearly in dB.
pub fn snr_at_ber(curve: &BerCurve, target: f64) -> Result<f64> {
    let pts: Vec<&BerPoint> = curve.points.iter().collect();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.ber >= target && b.ber <= target {
            if a.ber == b.ber {
                return Ok(a.snr_db);
            }
            if b.ber <= 0.0 {
                return Err(Error::Range(format!(
                    "BER drops to zero at {} dB before a point at the target {target:e}",
                    b.snr_db
                )));
            }
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            return Ok(a.snr_db + (b.snr_db - a.snr_db) * (la - lt) / (la - lb));
        }
    }
    Err(Error::Range(format!(
        "curve `{}` never crosses BER {target:e}",
        curve.detector
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub target_ber: f64,
    pub detector_a: String,
    pub detector_b: String,
    pub snr_a_db: f64,
    pub snr_b_db: f64,
    /// `snr_a − snr_b`.
    pub gap_db: f64,
    pub curve_a: BerCurve,
    pub curve_b: BerCurve,
}

/// Runs two detectors on identical trials and measures their SNR offset at `target_ber`.
pub fn compare_detectors(cfg: &SimConfig, detector_a: &str, detector_b: &str, target_ber: f64) -> Result<GapReport> {
    let mut a = cfg.clone();
    a.detector = detector_a.to_string();
    let mut b = cfg.clone();
    b.detector = detector_b.to_string();
    let curve_a = run_ber_sweep(&a)?;
    let curve_b = run_ber_sweep(&b)?;
    let snr_a = snr_at_ber(&curve_a, target_ber)?;
    let snr_b = snr_at_ber(&curve_b, target_ber)?;
    Ok(GapReport {
        target_ber,
        detector_a: detector_a.into(),
        detector_b: detector_b.into(),
        snr_a_db: snr_a,
        snr_b_db: snr_b,
        gap_db: snr_a - snr_b,
        curve_a,
        curve_b,
    })
}

/// Flop statistics of one detector over many realizations at a fixed SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopStats {
    pub detector: String,
    pub n_r: usize,
    pub trials: u64,
    pub mean: f64,
    /// Mean of the factorization and rotation share.
    pub qr_mean: f64,
    pub min: u64,
    pub max: u64,
    pub mean_nodes: f64,
    /// `(flops, fraction of trials with at most that many flops)`.
    pub cdf: Vec<(u64, f64)>,
}

/// Runs each detector on the same `trials` realizations of `cfg` at `snr_db`.
pub fn measure_avg_flops(cfg: &SimConfig, detectors: &[&str], snr_db: f64, trials: u64) -> Result<Vec<FlopStats>> {
    let mut probe = cfg.clone();
    probe.snr_grid_db = vec![snr_db];
    probe.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let registry = DetectorRegistry::standard();
    let pool = pool(cfg.workers)?;
    let rho = db_to_linear(snr_db);
    detectors
        .iter()
        .map(|&name| {
            let ctx = TrialContext::new(&probe, &registry, name)?;
            let outcomes: Vec<(u64, u64, u64)> = pool.install(|| {
                (0..trials)
                    .into_par_iter()
                    .map(|t| {
                        ctx.trial(0, t, rho).map(|o| {
                            (
                                o.ledger.total(&cfg.flop_costs),
                                o.qr_ledger.total(&cfg.flop_costs),
                                o.nodes,
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut flops: Vec<u64> = outcomes.iter().map(|o| o.0).collect();
            let total: u64 = flops.iter().sum();
            let qr_total: u64 = outcomes.iter().map(|o| o.1).sum();
            let nodes: u64 = outcomes.iter().map(|o| o.2).sum();
            flops.sort_unstable();
            let mut cdf: Vec<(u64, f64)> = Vec::new();
            for (i, &f) in flops.iter().enumerate() {
                let frac = (i + 1) as f64 / trials as f64;
                match cdf.last_mut() {
                    Some(last) if last.0 == f => last.1 = frac,
                    _ => cdf.push((f, frac)),
                }
            }
            Ok(FlopStats {
                detector: name.to_string(),
                n_r: cfg.n_r,
                trials,
                mean: total as f64 / trials as f64,
                qr_mean: qr_total as f64 / trials as f64,
                min: flops[0],
                max: *flops.last().expect("nonempty"),
                mean_nodes: nodes as f64 / trials as f64,
                cdf,
            })
        })
        .collect()
}
