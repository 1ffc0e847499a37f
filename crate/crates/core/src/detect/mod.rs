//! Receivers for the dual-polarized single-antenna link.
//!
//! Four detectors share the [`Detector`] trait and are looked up by name in a
//! [`DetectorRegistry`]: exhaustive ML over `‖y − Hx‖²`, QR-aided ML, the
//! successive-interference-cancellation receiver, and the sphere decoder.
//! Every detector breaks metric ties toward the smallest flat index.

pub mod flops;
mod ml;
pub mod qr;
mod qr_ml;
mod sd;
mod sic;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::constellation::{Constellation, SymbolIndex};
use crate::error::{Error, Result};
pub use flops::{FlopCosts, FlopLedger};
pub use ml::{ml_decide, MlDetector};
pub use qr::{qr_decompose, QrFactors, RotatedSystem};
pub use qr_ml::{qr_ml_decide, QrMlDetector};
pub use sd::{sd_decide, SdDetector};
pub use sic::{sic_decide, SicDetector};

/// Outcome of a low-level decision routine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub index: usize,
    /// Objective the routine minimized (the rotated metric for QR-based receivers).
    pub metric: f64,
    pub ledger: FlopLedger,
    pub nodes_visited: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Flat index into the constellation.
    pub index: usize,
    /// `(k, q_v, q_h)` for C_K constellations.
    pub symbol: Option<SymbolIndex>,
    /// `‖y − H·x̂‖²`.
    pub metric: f64,
    /// All operations, QR included.
    pub ledger: FlopLedger,
    /// The factorization and rotation share of `ledger`.
    pub qr_ledger: FlopLedger,
    pub nodes_visited: u64,
}

impl DetectionResult {
    pub fn flops(&self, costs: &FlopCosts) -> u64 {
        self.ledger.total(costs)
    }
}

/// A receiver that maps `(H, y)` to a constellation point.
pub trait Detector: Send + Sync {
    fn name(&self) -> &'static str;

    /// Rejects constellations the receiver cannot search.
    fn check(&self, _c: &Constellation) -> Result<()> {
        Ok(())
    }

    fn detect(&self, h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<DetectionResult>;
}

/// Detectors addressable by name.
#[derive(Clone, Default)]
pub struct DetectorRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Detector>>,
}

impl DetectorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `ml`, `qr_ml`, `sic` and `sd`.
    pub fn standard() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(MlDetector));
        r.register(Arc::new(QrMlDetector));
        r.register(Arc::new(SicDetector));
        r.register(Arc::new(SdDetector));
        r
    }

    pub fn register(&mut self, d: Arc<dyn Detector>) {
        self.entries.insert(d.name(), d);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Detector>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown detector `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl std::fmt::Debug for DetectorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

/// Running minimum with the lexicographic tie-break.
#[derive(Debug, Clone, Copy)]
struct Best {
    index: usize,
    metric: f64,
}

impl Best {
    fn empty() -> Self {
        Self {
            index: usize::MAX,
            metric: f64::INFINITY,
        }
    }

    fn offer(&mut self, index: usize, metric: f64) -> bool {
        if metric < self.metric || (metric == self.metric && index < self.index) {
            self.index = index;
            self.metric = metric;
            true
        } else {
            false
        }
    }
}

/// The rotated two-layer system with per-circle coefficients precomputed.
struct Layers<'a> {
    sys: &'a RotatedSystem,
    c: &'a Constellation,
    m: usize,
    /// `r₁·cos ε_k`.
    a: Vec<f64>,
    /// `r₁₂·sin ε_k`.
    b: Vec<Complex64>,
    /// `r₂·sin ε_k`.
    d: Vec<f64>,
}

impl<'a> Layers<'a> {
    fn new(sys: &'a RotatedSystem, c: &'a Constellation) -> Result<Self> {
        if !c.is_latitude() {
            return Err(Error::Config(
                "QR-based detectors need a latitude constellation; use ml for DP-SM".into(),
            ));
        }
        let k = c.circles();
        Ok(Self {
            sys,
            c,
            m: c.m_psk(),
            a: (0..k).map(|i| sys.r1 * c.lat_cos(i)).collect(),
            b: (0..k).map(|i| sys.r12 * c.lat_sin(i)).collect(),
            d: (0..k).map(|i| sys.r2 * c.lat_sin(i)).collect(),
        })
    }

    fn circles(&self) -> usize {
        self.a.len()
    }

    /// `|ỹ₁ − r₁cos ε_k·e^{jq_V} − r₁₂sin ε_k·e^{jq_H}|²`.
    fn upper(&self, k: usize, q_v: usize, q_h: usize) -> f64 {
        (self.sys.y1 - self.c.phasor(q_v) * self.a[k] - self.b[k] * self.c.phasor(q_h)).norm_sqr()
    }

    /// `|ỹ₂ − r₂sin ε_k·e^{jq_H}|²`.
    fn lower(&self, k: usize, q_h: usize) -> f64 {
        (self.sys.y2 - self.c.phasor(q_h) * self.d[k]).norm_sqr()
    }

    fn metric(&self, k: usize, q_v: usize, q_h: usize) -> f64 {
        self.upper(k, q_v, q_h) + self.lower(k, q_h)
    }

    /// `ỹ₁ − r₁₂sin ε_k·e^{jq_H}`.
    fn cancelled(&self, k: usize, q_h: usize) -> Complex64 {
        self.sys.y1 - self.b[k] * self.c.phasor(q_h)
    }

    fn index(&self, k: usize, q_v: usize, q_h: usize) -> usize {
        (k * self.m + q_v) * self.m + q_h
    }

    /// `M·[π·u(−r) + ∠z] / 2π`.
    fn angle_index(&self, r: f64, z: Complex64) -> f64 {
        let flip = if r < 0.0 { PI } else { 0.0 };
        self.m as f64 * (flip + z.arg()) / TAU
    }

    /// `mod(⌈α⌋, M)` with ties to even.
    fn nearest(&self, alpha: f64) -> usize {
        (alpha.round_ties_even() as i64).rem_euclid(self.m as i64) as usize
    }
}

/// `+1` when `⌊α⌋ == ⌈α⌋`, otherwise `−1`.
fn zigzag_direction(alpha: f64) -> i64 {
    if alpha.floor() == alpha.round_ties_even() {
        1
    } else {
        -1
    }
}

/// `mod(q + C·(−1)^{i+1}·i, M)`.
fn zigzag_step(q: usize, direction: i64, i: usize, m: usize) -> usize {
    let sign = if i % 2 == 0 { -1 } else { 1 };
    (q as i64 + direction * sign * i as i64).rem_euclid(m as i64) as usize
}

/// Factors `H`, rotates `y` and runs a decision routine on the rotated system.
fn detect_via_qr(
    h: &ChannelRealization,
    y: &[Complex64],
    c: &Constellation,
    decide: fn(&RotatedSystem, &Constellation) -> Result<Decision>,
) -> Result<DetectionResult> {
    let factors = qr_decompose(h)?;
    let mut qr_ledger = factors.ledger;
    let sys = factors.bind(y, &mut qr_ledger)?;
    let d = decide(&sys, c)?;
    Ok(finish(h, y, c, d, qr_ledger))
}

fn finish(
    h: &ChannelRealization,
    y: &[Complex64],
    c: &Constellation,
    d: Decision,
    qr_ledger: FlopLedger,
) -> DetectionResult {
    DetectionResult {
        index: d.index,
        symbol: c.symbol(d.index),
        metric: h.residual_energy(y, &c.state(d.index).jones),
        ledger: d.ledger + qr_ledger,
        qr_ledger,
        nodes_visited: d.nodes_visited,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_visits_every_phase_by_distance() {
        for m in [4usize, 8, 16] {
            for &alpha in &[2.2, 2.7, -0.3, 7.49, 0.0] {
                let start = (f64::round_ties_even(alpha) as i64).rem_euclid(m as i64) as usize;
                let dir = zigzag_direction(alpha);
                let mut q = start;
                let mut seen = Vec::new();
                let mut last = -1.0;
                for i in 0..m {
                    q = zigzag_step(q, dir, i, m);
                    let raw = (q as f64 - alpha).rem_euclid(m as f64);
                    let dist = raw.min(m as f64 - raw);
                    assert!(dist >= last - 1e-12, "m={m} alpha={alpha}");
                    last = dist;
                    seen.push(q);
                }
                seen.sort();
                assert_eq!(seen, (0..m).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let r = DetectorRegistry::standard();
        assert_eq!(r.names(), vec!["ml", "qr_ml", "sd", "sic"]);
        assert_eq!(r.get("sd").unwrap().name(), "sd");
        assert!(matches!(r.get("mrc"), Err(Error::Config(_))));
    }
}
