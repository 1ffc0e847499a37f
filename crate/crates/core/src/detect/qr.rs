//! Thin Householder QR of a `2N_R × 2` channel.
//!
//! Reflectors follow the LAPACK convention `H = I − τ·v·vᴴ` with `v₀ = 1`, so
//! the diagonal of `R` is real but carries either sign.

use num_complex::Complex64;

use super::flops::FlopLedger;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Reflector {
    /// Row where the reflector starts; entries above it are untouched.
    offset: usize,
    /// Tail of `v` (the leading 1 is implicit).
    tail: Vec<Complex64>,
    tau: Complex64,
}

impl Reflector {
    /// Builds the reflector with `Hᴴ·x = (β, 0, …, 0)` and returns `β`.
    fn annihilate(x: &[Complex64], offset: usize, ledger: &mut FlopLedger) -> (Self, f64) {
        let len = x.len() as u64;
        ledger.charge(FlopLedger {
            abs2: len + 1,
            real_op: len + 4,
            sqrt: 1,
            compare: 1,
            complex_add: 2,
            complex_mul: len - 1,
            ..FlopLedger::ZERO
        });

        let alpha = x[0];
        let tail_sq: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail_sq == 0.0 && alpha.im == 0.0 {
            let r = Self {
                offset,
                tail: vec![ZERO; x.len() - 1],
                tau: ZERO,
            };
            return (r, alpha.re);
        }
        let norm = (alpha.norm_sqr() + tail_sq).sqrt();
        let beta = if alpha.re >= 0.0 { -norm } else { norm };
        let tau = (Complex64::new(beta, 0.0) - alpha) / beta;
        let scale = ONE / (alpha - beta);
        let tail = x[1..].iter().map(|&z| z * scale).collect();
        (Self { offset, tail, tau }, beta)
    }

    /// `z ← Hᴴ·z` on the rows from `offset` down.
    fn apply_adjoint(&self, z: &mut [Complex64], ledger: &mut FlopLedger) {
        let len = (z.len() - self.offset) as u64;
        ledger.charge(FlopLedger {
            complex_mul: 2 * len - 1,
            complex_add: 2 * len - 1,
            ..FlopLedger::ZERO
        });
        self.apply(z, self.tau.conj());
    }

    fn apply(&self, z: &mut [Complex64], tau: Complex64) {
        let z = &mut z[self.offset..];
        let w = z[0]
            + self
                .tail
                .iter()
                .zip(&z[1..])
                .map(|(v, zi)| v.conj() * zi)
                .sum::<Complex64>();
        let t = tau * w;
        z[0] -= t;
        for (zi, v) in z[1..].iter_mut().zip(&self.tail) {
            *zi -= v * t;
        }
    }
}

/// Factors of `H = Q·R` for the two-column channel.
#[derive(Debug, Clone)]
pub struct QrFactors {
    reflectors: [Reflector; 2],
    rows: usize,
    pub r1: f64,
    pub r12: Complex64,
    pub r2: f64,
    /// Operations spent on the factorization itself.
    pub ledger: FlopLedger,
}

/// The triangular system rotated onto a received vector: `ỹ = Qᴴ·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedSystem {
    pub r1: f64,
    pub r12: Complex64,
    pub r2: f64,
    pub y1: Complex64,
    pub y2: Complex64,
}

/// Householder QR of the channel. Fails when the columns are (numerically) dependent.
pub fn qr_decompose(h: &ChannelRealization) -> Result<QrFactors> {
    let mut ledger = FlopLedger::ZERO;
    let rows = h.rows().len();
    let scale = h
        .rows()
        .iter()
        .flat_map(|r| r.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Decomposition("channel is zero or non-finite".into()));
    }
    let col0 = h.column(0);
    let mut col1 = h.column(1);

    let (first, r1) = Reflector::annihilate(&col0, 0, &mut ledger);
    if r1.abs() <= RANK_TOL * scale {
        return Err(Error::Decomposition("first column is zero".into()));
    }
    first.apply_adjoint(&mut col1, &mut ledger);
    let r12 = col1[0];
    let (second, r2) = Reflector::annihilate(&col1[1..], 1, &mut ledger);
    if r2.abs() <= RANK_TOL * scale {
        return Err(Error::Decomposition("columns are linearly dependent".into()));
    }
    Ok(QrFactors {
        reflectors: [first, second],
        rows,
        r1,
        r12,
        r2,
        ledger,
    })
}

impl QrFactors {
    /// Rotates `y` by `Qᴴ` and keeps the two leading entries.
    pub fn bind(&self, y: &[Complex64], ledger: &mut FlopLedger) -> Result<RotatedSystem> {
        if y.len() != self.rows {
            return Err(Error::Domain(format!(
                "received vector has {} entries, channel has {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut z = y.to_vec();
        for r in &self.reflectors {
            r.apply_adjoint(&mut z, ledger);
        }
        Ok(RotatedSystem {
            r1: self.r1,
            r12: self.r12,
            r2: self.r2,
            y1: z[0],
            y2: z[1],
        })
    }

    /// Column `c` of the thin `Q` (not charged).
    pub fn q_column(&self, c: usize) -> Vec<Complex64> {
        let mut e = vec![ZERO; self.rows];
        e[c] = ONE;
        for r in self.reflectors.iter().rev() {
            r.apply(&mut e, r.tau);
        }
        e
    }

    /// Row vectors `q₁ = Q(:,1)ᴴ`, `q₂ = Q(:,2)ᴴ`.
    pub fn q_rows(&self) -> [Vec<Complex64>; 2] {
        [0, 1].map(|c| self.q_column(c).iter().map(|z| z.conj()).collect())
    }

    /// `R` as a 2×2 upper-triangular matrix.
    pub fn r_matrix(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.r1, 0.0), self.r12],
            [ZERO, Complex64::new(self.r2, 0.0)],
        ]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Flops of the factorization plus rotating one received vector, for `n` rows
/// under the default costing.
pub fn qr_flops_default(n: usize) -> u64 {
    let n = n as u64;
    68 * n - 18
}
