use num_complex::Complex64;

use super::flops::{
    ANGLE_INDEX, CANCEL_ANGLE_INDEX, COMPARE, DIRECTION_TEST, PARTIAL_METRIC, QR_METRIC, ROUND_MOD, ZIGZAG_STEP,
};
use super::qr_ml::check_latitude;
use super::{
    detect_via_qr, sic_decide, zigzag_direction, zigzag_step, Best, Decision, DetectionResult, Detector, Layers,
    RotatedSystem,
};
use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::error::Result;

/// Sphere decoding seeded with the SIC solution.
///
/// The radius starts at the SIC metric and shrinks to every improved metric.
/// For each circle, `q_H` is enumerated outward from the phase of `ỹ₂` and the
/// search stops once the lower-layer term alone exceeds the radius; for each
/// surviving `q_H`, `q_V` is enumerated outward from the cancelled residue and
/// stops once the full metric exceeds the radius. `nodes_visited` counts
/// full-metric evaluations.
pub fn sd_decide(sys: &RotatedSystem, c: &Constellation) -> Result<Decision> {
    let sic = sic_decide(sys, c)?;
    let layers = Layers::new(sys, c)?;
    let m = layers.m;
    let mut ledger = sic.ledger;

    let sym = c.symbol(sic.index).expect("latitude constellation");
    let mut best = Best::empty();
    best.offer(sic.index, layers.metric(sym.k, sym.q_v, sym.q_h));
    ledger += QR_METRIC;

    let alpha_h = layers.angle_index(sys.r2, sys.y2);
    let dir_h = zigzag_direction(alpha_h);
    ledger += ANGLE_INDEX + DIRECTION_TEST;

    let mut nodes = 0u64;
    for k in 0..layers.circles() {
        let mut q_h = sym.q_h;
        for i in 0..m {
            q_h = zigzag_step(q_h, dir_h, i, m);
            let lower = layers.lower(k, q_h);
            ledger += ZIGZAG_STEP + PARTIAL_METRIC + COMPARE;
            if lower > best.metric {
                break;
            }

            let alpha_v = layers.angle_index(sys.r1, layers.cancelled(k, q_h));
            let dir_v = zigzag_direction(alpha_v);
            let mut q_v = layers.nearest(alpha_v);
            ledger += CANCEL_ANGLE_INDEX + DIRECTION_TEST + ROUND_MOD;
            for j in 0..m {
                q_v = zigzag_step(q_v, dir_v, j, m);
                let metric = layers.upper(k, q_v, q_h) + lower;
                nodes += 1;
                if metric > best.metric {
                    break;
                }
                best.offer(layers.index(k, q_v, q_h), metric);
            }
        }
    }
    ledger += (ZIGZAG_STEP + QR_METRIC + COMPARE) * nodes;

    Ok(Decision {
        index: best.index,
        metric: best.metric,
        ledger,
        nodes_visited: nodes,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SdDetector;

impl Detector for SdDetector {
    fn name(&self) -> &'static str {
        "sd"
    }

    fn check(&self, c: &Constellation) -> Result<()> {
        check_latitude(c)
    }

    fn detect(&self, h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<DetectionResult> {
        detect_via_qr(h, y, c, sd_decide)
    }
}
