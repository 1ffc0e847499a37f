use num_complex::Complex64;

use super::flops::{COMPARE, QR_METRIC};
use super::{detect_via_qr, Best, Decision, DetectionResult, Detector, Layers, RotatedSystem};
use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::error::Result;

/// Full search of the rotated metric over `(k, q_H, q_V)`.
pub fn qr_ml_decide(sys: &RotatedSystem, c: &Constellation) -> Result<Decision> {
    let layers = Layers::new(sys, c)?;
    let m = layers.m;
    let mut best = Best::empty();
    for k in 0..layers.circles() {
        for q_h in 0..m {
            let lower = layers.lower(k, q_h);
            for q_v in 0..m {
                best.offer(layers.index(k, q_v, q_h), layers.upper(k, q_v, q_h) + lower);
            }
        }
    }
    let n = c.len() as u64;
    Ok(Decision {
        index: best.index,
        metric: best.metric,
        ledger: (QR_METRIC + COMPARE) * n,
        nodes_visited: n,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QrMlDetector;

impl Detector for QrMlDetector {
    fn name(&self) -> &'static str {
        "qr_ml"
    }

    fn check(&self, c: &Constellation) -> Result<()> {
        check_latitude(c)
    }

    fn detect(&self, h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<DetectionResult> {
        detect_via_qr(h, y, c, qr_ml_decide)
    }
}

pub(super) fn check_latitude(c: &Constellation) -> Result<()> {
    if c.is_latitude() {
        Ok(())
    } else {
        Err(crate::error::Error::Config(
            "QR-based detectors need a latitude constellation; use ml for DP-SM".into(),
        ))
    }
}
