use num_complex::Complex64;

use super::flops::{FlopLedger, ANGLE_INDEX, CANCEL_ANGLE_INDEX, COMPARE, QR_METRIC, ROUND_MOD};
use super::qr_ml::check_latitude;
use super::{detect_via_qr, Best, Decision, DetectionResult, Detector, Layers, RotatedSystem};
use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::error::Result;

/// Detects `q_H` from the phase of `ỹ₂`, then for each circle cancels it from
/// `ỹ₁`, slices `q_V` from the residue and keeps the circle with the smallest metric.
pub fn sic_decide(sys: &RotatedSystem, c: &Constellation) -> Result<Decision> {
    let layers = Layers::new(sys, c)?;
    let mut ledger = FlopLedger::ZERO;

    let q_h = layers.nearest(layers.angle_index(sys.r2, sys.y2));
    ledger += ANGLE_INDEX + ROUND_MOD;

    let mut best = Best::empty();
    for k in 0..layers.circles() {
        let beta = layers.angle_index(sys.r1, layers.cancelled(k, q_h));
        let q_v = layers.nearest(beta);
        best.offer(layers.index(k, q_v, q_h), layers.metric(k, q_v, q_h));
    }
    ledger += (CANCEL_ANGLE_INDEX + ROUND_MOD + QR_METRIC + COMPARE) * layers.circles() as u64;

    Ok(Decision {
        index: best.index,
        metric: best.metric,
        ledger,
        nodes_visited: layers.circles() as u64,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SicDetector;

impl Detector for SicDetector {
    fn name(&self) -> &'static str {
        "sic"
    }

    fn check(&self, c: &Constellation) -> Result<()> {
        check_latitude(c)
    }

    fn detect(&self, h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<DetectionResult> {
        detect_via_qr(h, y, c, sic_decide)
    }
}
