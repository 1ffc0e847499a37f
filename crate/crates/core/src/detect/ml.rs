use num_complex::Complex64;

use super::flops::{FlopLedger, COMPARE, JONES_SYNTHESIS, ML_ROW};
use super::{finish, Best, Decision, DetectionResult, Detector};
use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::error::{Error, Result};

/// Exhaustive minimization of `‖y − H·x‖²` over every state of `c`.
///
/// Each candidate is charged for synthesizing its Jones vector and for one
/// `H·x` product, so the count grows with the number of receive rows.
pub fn ml_decide(h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<Decision> {
    if y.len() != h.rows().len() {
        return Err(Error::Domain(format!(
            "received vector has {} entries, channel has {} rows",
            y.len(),
            h.rows().len()
        )));
    }
    let mut best = Best::empty();
    for (i, s) in c.states().iter().enumerate() {
        best.offer(i, h.residual_energy(y, &s.jones));
    }
    let per_candidate = JONES_SYNTHESIS + ML_ROW * h.rows().len() as u64 + COMPARE;
    Ok(Decision {
        index: best.index,
        metric: best.metric,
        ledger: per_candidate * c.len() as u64,
        nodes_visited: c.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MlDetector;

impl Detector for MlDetector {
    fn name(&self) -> &'static str {
        "ml"
    }

    fn detect(&self, h: &ChannelRealization, y: &[Complex64], c: &Constellation) -> Result<DetectionResult> {
        let d = ml_decide(h, y, c)?;
        Ok(finish(h, y, c, d, FlopLedger::ZERO))
    }
}
