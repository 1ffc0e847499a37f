//! Pairwise error probabilities and union bounds on the bit error rate of
//! optimum detection over i.i.d. Rayleigh fading.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use crate::constellation::{Constellation, PolarizationState};
use crate::error::{Error, Result};
use crate::special::{appell_f1, beta, integrate};

/// Inputs of one pairwise error probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PepParams {
    pub lambda_v: f64,
    pub lambda_h: f64,
    /// Linear SNR.
    pub rho: f64,
    pub n_r: u32,
}

impl PepParams {
    pub fn new(lambda_v: f64, lambda_h: f64, rho: f64, n_r: u32) -> Result<Self> {
        if !(lambda_v >= 0.0 && lambda_h >= 0.0 && lambda_v.is_finite() && lambda_h.is_finite()) {
            return Err(Error::Domain("lambda values must be finite and >= 0".into()));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho = {rho} must be finite and >= 0")));
        }
        if n_r == 0 {
            return Err(Error::Domain("n_r must be at least 1".into()));
        }
        Ok(Self {
            lambda_v,
            lambda_h,
            rho,
            n_r,
        })
    }
}

/// `(Λ_V, Λ_H)` for the pair `a → b` with cross-polar ratio `x`:
/// `Λ_V = |Δx_V|² + X|Δx_H|²`, `Λ_H = X|Δx_V|² + |Δx_H|²`.
pub fn lambda_pair(a: &PolarizationState, b: &PolarizationState, x: f64) -> (f64, f64) {
    let dv = (a.jones[0] - b.jones[0]).norm_sqr();
    let dh = (a.jones[1] - b.jones[1]).norm_sqr();
    (dv + x * dh, x * dv + dh)
}

fn pep_beta(n: f64) -> f64 {
    beta(0.5, 2.0 * n + 0.5)
}

/// Exact PEP through the Appell function:
/// `[(1 + ρΛ_V/4)(1 + ρΛ_H/4)]^{−N}·B(1/2, 2N + 1/2)·F1(1/2, N, N, 2N + 1; 1/(1 + ρΛ_V/4), 1/(1 + ρΛ_H/4)) / 2π`.
pub fn pep_closed_form(p: &PepParams) -> Result<f64> {
    let n = p.n_r as f64;
    let gv = 1.0 + p.rho * p.lambda_v / 4.0;
    let gh = 1.0 + p.rho * p.lambda_h / 4.0;
    let f1 = appell_f1(0.5, n, n, 2.0 * n + 1.0, 1.0 / gv, 1.0 / gh)?;
    Ok((gv * gh).powf(-n) * pep_beta(n) * f1 / TAU)
}

/// The same probability by direct quadrature of
/// `(1/π)∫₀^{π/2} [sin⁴θ / ((sin²θ + ρΛ_V/4)(sin²θ + ρΛ_H/4))]^N dθ`.
pub fn pep_numeric(p: &PepParams) -> Result<f64> {
    let n = p.n_r as i32;
    let av = p.rho * p.lambda_v / 4.0;
    let ah = p.rho * p.lambda_h / 4.0;
    let f = |t: f64| {
        let s2 = t.sin().powi(2);
        if s2 == 0.0 {
            return if av == 0.0 && ah == 0.0 { 1.0 } else { 0.0 };
        }
        ((s2 / (s2 + av)) * (s2 / (s2 + ah))).powi(n)
    };
    Ok(integrate(f, 0.0, FRAC_PI_2, f64::MIN_POSITIVE, 1e-12)? / PI)
}

/// High-SNR form `B(1/2, 2N + 1/2)·(ρ²Λ_VΛ_H/16)^{−N} / 2π`.
pub fn pep_asymptotic(p: &PepParams) -> f64 {
    let n = p.n_r as f64;
    pep_beta(n) * (p.rho * p.rho * p.lambda_v * p.lambda_h / 16.0).powf(-n) / TAU
}

/// Candidate phase indices kept by the Gray-tightened bound, zero-based:
/// the neighbour at `q = 1` and every even index. Odd indices above one are
/// dominated by their neighbours and dropped.
pub fn tightened_phases(m: usize) -> Vec<usize> {
    (0..m).filter(|&q| q == 1 || q % 2 == 0).collect()
}

/// One pairwise term of the union bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionTerm {
    pub from: usize,
    pub to: usize,
    pub hamming: u32,
    pub lambda_v: f64,
    pub lambda_h: f64,
}

/// Pairwise terms from each reference `(k, q_V = 1, q_H = 1)` to every
/// candidate (restricted to [`tightened_phases`] when `tightened`).
pub fn union_terms(c: &Constellation, x: f64, tightened: bool) -> Result<Vec<UnionTerm>> {
    if !c.is_latitude() {
        return Err(Error::Config(
            "union bounds are defined for latitude constellations".into(),
        ));
    }
    let m = c.m_psk();
    let phases: Vec<usize> = if tightened {
        tightened_phases(m)
    } else {
        (0..m).collect()
    };
    let reference_phase = 1 % m;
    let mut terms = Vec::new();
    for k in 0..c.circles() {
        let from = c.index_of(crate::constellation::SymbolIndex::new(
            k,
            reference_phase,
            reference_phase,
        ));
        for k_hat in 0..c.circles() {
            for &q_v in &phases {
                for &q_h in &phases {
                    let to = c.index_of(crate::constellation::SymbolIndex::new(k_hat, q_v, q_h));
                    if to == from {
                        continue;
                    }
                    let (lambda_v, lambda_h) = lambda_pair(c.state(from), c.state(to), x);
                    terms.push(UnionTerm {
                        from,
                        to,
                        hamming: c.hamming(from, to),
                        lambda_v,
                        lambda_h,
                    });
                }
            }
        }
    }
    Ok(terms)
}

fn bound_from_terms(c: &Constellation, terms: &[UnionTerm], rho: f64, n_r: u32) -> Result<f64> {
    let mut sum = 0.0;
    for t in terms {
        if t.hamming == 0 {
            continue;
        }
        let p = PepParams::new(t.lambda_v, t.lambda_h, rho, n_r)?;
        sum += t.hamming as f64 * pep_closed_form(&p)?;
    }
    Ok(sum / (c.circles() as f64 * c.data_rate()))
}

/// Union bound on the bit error probability (raw, not clamped).
pub fn abep_union_bound(c: &Constellation, x: f64, rho: f64, n_r: u32, tightened: bool) -> Result<f64> {
    let terms = union_terms(c, x, tightened)?;
    bound_from_terms(c, &terms, rho, n_r)
}

/// Presentation clamp: a bound above one half carries no information.
pub fn clamp_probability(p: f64) -> f64 {
    p.min(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticReport {
    /// `(1/K) Σ N·(Λ_VΛ_H)^{−N}` over the tightened terms.
    pub g_factor: f64,
    /// `𝒞` with `bound ≈ (𝒞ρ)^{−2N}`.
    pub coding_gain: f64,
    pub diversity_order: u32,
    pub bound: f64,
}

/// High-SNR form of the tightened bound, `16^N·B(1/2, 2N + 1/2)·𝒢 / (2π·log₂P·ρ^{2N})`.
pub fn abep_asymptotic(c: &Constellation, x: f64, rho: f64, n_r: u32) -> Result<AsymptoticReport> {
    if n_r == 0 {
        return Err(Error::Domain("n_r must be at least 1".into()));
    }
    let terms = union_terms(c, x, true)?;
    let n = n_r as f64;
    let mut g = 0.0;
    for t in terms.iter().filter(|t| t.hamming > 0) {
        let prod = t.lambda_v * t.lambda_h;
        if !(prod > 1e-24) {
            return Err(Error::AsymptoteUndefined(format!(
                "pair {} -> {} has Lambda_V * Lambda_H = {prod:e}",
                t.from, t.to
            )));
        }
        g += t.hamming as f64 * prod.powf(-n);
    }
    g /= c.circles() as f64;
    let b = pep_beta(n);
    let log_p = c.data_rate();
    let bound = 16f64.powf(n) * b * g / (TAU * log_p * rho.powf(2.0 * n));
    let coding_gain = 0.25 * (TAU * log_p / (b * g)).powf(1.0 / (2.0 * n));
    Ok(AsymptoticReport {
        g_factor: g,
        coding_gain,
        diversity_order: 2 * n_r,
        bound,
    })
}

/// One row of a bound-versus-SNR table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub rho_db: f64,
    pub bound_tightened: f64,
    pub bound_full: f64,
    /// `None` when the asymptote is undefined (e.g. `X = 0`).
    pub bound_asymptotic: Option<f64>,
    pub coding_gain: Option<f64>,
    pub diversity_order: u32,
}

/// Evaluates all bounds on an SNR grid in dB. Values are raw; clamp for display.
pub fn bound_table(c: &Constellation, x: f64, n_r: u32, rho_db: &[f64]) -> Result<Vec<BoundRow>> {
    let tight = union_terms(c, x, true)?;
    let full = union_terms(c, x, false)?;
    rho_db
        .iter()
        .map(|&db| {
            let rho = db_to_linear(db);
            let asym = match abep_asymptotic(c, x, rho, n_r) {
                Ok(r) => Some(r),
                Err(Error::AsymptoteUndefined(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(BoundRow {
                rho_db: db,
                bound_tightened: bound_from_terms(c, &tight, rho, n_r)?,
                bound_full: bound_from_terms(c, &full, rho, n_r)?,
                bound_asymptotic: asym.map(|a| a.bound),
                coding_gain: asym.map(|a| a.coding_gain),
                diversity_order: 2 * n_r,
            })
        })
        .collect()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
