//! Operation counting.
//!
//! Detectors tally primitive operations into a [`FlopLedger`]; a [`FlopCosts`]
//! table turns the tallies into a flop total. Complex additions cost 2 and
//! complex multiplications 6; every other primitive is configurable.

use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

pub const COMPLEX_ADD_FLOPS: u64 = 2;
pub const COMPLEX_MUL_FLOPS: u64 = 6;

/// Counts of each primitive operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopLedger {
    pub complex_add: u64,
    pub complex_mul: u64,
    /// Real add, subtract, multiply or divide.
    pub real_op: u64,
    pub compare: u64,
    /// `|z|²`.
    pub abs2: u64,
    /// `arg(z)`.
    pub arg: u64,
    /// `sin`, `cos` or `exp` of a real argument.
    pub trig: u64,
    /// Rounding, floor, or modular reduction.
    pub round: u64,
    pub sqrt: u64,
}

impl FlopLedger {
    pub const ZERO: FlopLedger = FlopLedger {
        complex_add: 0,
        complex_mul: 0,
        real_op: 0,
        compare: 0,
        abs2: 0,
        arg: 0,
        trig: 0,
        round: 0,
        sqrt: 0,
    };

    pub fn total(&self, costs: &FlopCosts) -> u64 {
        self.complex_add * COMPLEX_ADD_FLOPS
            + self.complex_mul * COMPLEX_MUL_FLOPS
            + self.real_op * costs.real_op
            + self.compare * costs.compare
            + self.abs2 * costs.abs2
            + self.arg * costs.arg
            + self.trig * costs.trig
            + self.round * costs.round
            + self.sqrt * costs.sqrt
    }

    pub fn charge(&mut self, ops: FlopLedger) {
        *self += ops;
    }

    pub fn charge_n(&mut self, ops: FlopLedger, n: u64) {
        *self += ops * n;
    }
}

impl Add for FlopLedger {
    type Output = FlopLedger;

    fn add(self, o: FlopLedger) -> FlopLedger {
        FlopLedger {
            complex_add: self.complex_add + o.complex_add,
            complex_mul: self.complex_mul + o.complex_mul,
            real_op: self.real_op + o.real_op,
            compare: self.compare + o.compare,
            abs2: self.abs2 + o.abs2,
            arg: self.arg + o.arg,
            trig: self.trig + o.trig,
            round: self.round + o.round,
            sqrt: self.sqrt + o.sqrt,
        }
    }
}

impl AddAssign for FlopLedger {
    fn add_assign(&mut self, o: FlopLedger) {
        *self = *self + o;
    }
}

impl Mul<u64> for FlopLedger {
    type Output = FlopLedger;

    fn mul(self, n: u64) -> FlopLedger {
        FlopLedger {
            complex_add: self.complex_add * n,
            complex_mul: self.complex_mul * n,
            real_op: self.real_op * n,
            compare: self.compare * n,
            abs2: self.abs2 * n,
            arg: self.arg * n,
            trig: self.trig * n,
            round: self.round * n,
            sqrt: self.sqrt * n,
        }
    }
}

impl std::iter::Sum for FlopLedger {
    fn sum<I: Iterator<Item = FlopLedger>>(iter: I) -> FlopLedger {
        iter.fold(FlopLedger::ZERO, Add::add)
    }
}

/// Flop cost of each configurable primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlopCosts {
    pub real_op: u64,
    pub compare: u64,
    pub abs2: u64,
    pub arg: u64,
    pub trig: u64,
    pub round: u64,
    pub sqrt: u64,
}

impl Default for FlopCosts {
    fn default() -> Self {
        Self {
            real_op: 1,
            compare: 1,
            abs2: 3,
            arg: 10,
            trig: 10,
            round: 1,
            sqrt: 10,
        }
    }
}

const fn ops(
    complex_add: u64,
    complex_mul: u64,
    real_op: u64,
    compare: u64,
    abs2: u64,
    arg: u64,
    trig: u64,
    round: u64,
) -> FlopLedger {
    FlopLedger {
        complex_add,
        complex_mul,
        real_op,
        compare,
        abs2,
        arg,
        trig,
        round,
        sqrt: 0,
    }
}

const fn sum(a: FlopLedger, b: FlopLedger) -> FlopLedger {
    FlopLedger {
        complex_add: a.complex_add + b.complex_add,
        complex_mul: a.complex_mul + b.complex_mul,
        real_op: a.real_op + b.real_op,
        compare: a.compare + b.compare,
        abs2: a.abs2 + b.abs2,
        arg: a.arg + b.arg,
        trig: a.trig + b.trig,
        round: a.round + b.round,
        sqrt: a.sqrt + b.sqrt,
    }
}

// Costs of the recurring expressions, charged as written: each expression
// evaluates its own sines, cosines and phasors.

pub const COMPARE: FlopLedger = ops(0, 0, 0, 1, 0, 0, 0, 0);

/// `e^{j2πq/M}`: the argument (two real ops) plus cosine and sine.
pub const PHASOR: FlopLedger = ops(0, 0, 2, 0, 0, 0, 2, 0);

/// `|ỹ₂ − r₂·sin ε·e^{jq_H}|²`.
pub const PARTIAL_METRIC: FlopLedger = sum(PHASOR, ops(1, 1, 1, 0, 1, 0, 1, 0));

/// `|ỹ₁ − r₁cos ε·e^{jq_V} − r₁₂sin ε·e^{jq_H}|² + |ỹ₂ − r₂sin ε·e^{jq_H}|²`.
pub const QR_METRIC: FlopLedger = sum(sum(PHASOR, PHASOR), ops(3, 4, 3, 0, 2, 0, 2, 0));

/// `M·[π·u(−r) + ∠z] / 2π` for a given `z`.
pub const ANGLE_INDEX: FlopLedger = ops(0, 0, 3, 1, 0, 1, 0, 0);

/// `M·{π·u(−r₁) + ∠[ỹ₁ − r₁₂·sin ε·e^{jq_H}]} / 2π`.
pub const CANCEL_ANGLE_INDEX: FlopLedger = sum(sum(PHASOR, ANGLE_INDEX), ops(1, 2, 0, 0, 0, 0, 1, 0));

/// `mod(⌈α⌋, M)`.
pub const ROUND_MOD: FlopLedger = ops(0, 0, 0, 0, 0, 0, 0, 2);

/// `⌊α⌋ == ⌈α⌋`.
pub const DIRECTION_TEST: FlopLedger = ops(0, 0, 0, 1, 0, 0, 0, 2);

/// `mod(q + C·(−1)^{i+1}·i, M)`.
pub const ZIGZAG_STEP: FlopLedger = ops(0, 0, 3, 0, 0, 0, 0, 1);

/// `x = (cos ε·e^{jq_V}, sin ε·e^{jq_H})`.
pub const JONES_SYNTHESIS: FlopLedger = sum(sum(PHASOR, PHASOR), ops(0, 2, 0, 0, 0, 0, 2, 0));

/// One receive row of `‖y − Hx‖²`: two products, their sum, the residual,
/// its power, and the accumulation.
pub const ML_ROW: FlopLedger = ops(2, 2, 1, 0, 1, 0, 0, 0);
