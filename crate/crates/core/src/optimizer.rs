//! Latitude spacing that maximizes the smallest `Λ_V·Λ_H` product, which
//! governs the high-SNR union bound.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::analytic::lambda_pair;
use crate::constellation::{max_delta_eps, Constellation};
use crate::error::{Error, Result};

pub const RESIDUAL_TOL: f64 = 1e-10;
const DERIVATIVE_FLOOR: f64 = 1e-14;
const SCAN_STEPS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerInput {
    pub k_circles: usize,
    pub m_psk: usize,
    /// Linear cross-polar ratio.
    pub x_linear: f64,
    /// Newton iteration budget.
    pub n_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    Newton,
    Bisection,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerReport {
    pub delta_eps: f64,
    pub theta: f64,
    pub method: RootMethod,
    pub iterations: usize,
    pub residual: f64,
    /// `|g(x)|` after each Newton step.
    pub residual_history: Vec<f64>,
}

/// `Θ = [X(1 − cos 2π/M)² / (4(1 + X)²)]^{1/4}`.
pub fn theta(m_psk: usize, x_linear: f64) -> Result<f64> {
    if m_psk < 2 {
        return Err(Error::Domain("M must be at least 2".into()));
    }
    if !(x_linear >= 0.0 && x_linear.is_finite()) {
        return Err(Error::Domain(format!("X = {x_linear} must be finite and >= 0")));
    }
    let c = 1.0 - (TAU / m_psk as f64).cos();
    Ok((x_linear * c * c / (4.0 * (1.0 + x_linear).powi(2))).powf(0.25))
}

/// `g(x) = Θ{cos[(K−1)x] − sin[(K−1)x]} − sin x`; its root equates the
/// same-circle and cross-circle minima of `Λ_V·Λ_H`.
fn root_fn(theta: f64, k: usize, x: f64) -> f64 {
    let a = (k - 1) as f64 * x;
    theta * (a.cos() - a.sin()) - x.sin()
}

fn root_derivative(theta: f64, k: usize, x: f64) -> f64 {
    let km1 = (k - 1) as f64;
    let a = km1 * x;
    -theta * km1 * (a.sin() + a.cos()) - x.cos()
}

/// Newton iteration from `x = 0`, with a bracketing fallback if an iterate
/// leaves `(0, π/2)` or the slope vanishes.
pub fn optimize_delta_eps(input: &OptimizerInput) -> Result<OptimizerReport> {
    let k = input.k_circles;
    if k < 2 || !k.is_power_of_two() {
        return Err(Error::Domain(format!(
            "K = {k}: the spacing is only defined for K >= 2 (powers of two)"
        )));
    }
    if input.n_iters == 0 {
        return Err(Error::Domain("at least one iteration is required".into()));
    }
    let th = theta(input.m_psk, input.x_linear)?;
    if th == 0.0 {
        return Ok(OptimizerReport {
            delta_eps: 0.0,
            theta: 0.0,
            method: RootMethod::Trivial,
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
        });
    }
    let upper = max_delta_eps(k);

    let mut x = 0.0;
    let mut history = Vec::with_capacity(input.n_iters);
    let mut fallback = false;
    for _ in 0..input.n_iters {
        let d = root_derivative(th, k, x);
        if d.abs() < DERIVATIVE_FLOOR {
            fallback = true;
            break;
        }
        x -= root_fn(th, k, x) / d;
        if !(x > 0.0 && x < std::f64::consts::FRAC_PI_2) {
            fallback = true;
            break;
        }
        let r = root_fn(th, k, x).abs();
        history.push(r);
        if r <= 1e-15 {
            break;
        }
    }
    if !fallback && !(x > 0.0 && x < upper) {
        fallback = true;
    }
    if fallback {
        let x = bisect_first_root(th, k, upper)?;
        return Ok(OptimizerReport {
            delta_eps: x,
            theta: th,
            method: RootMethod::Bisection,
            iterations: history.len(),
            residual: root_fn(th, k, x).abs(),
            residual_history: history,
        });
    }
    let residual = root_fn(th, k, x).abs();
    if residual > RESIDUAL_TOL {
        return Err(Error::Convergence(format!(
            "residual {residual:e} after {} Newton iterations",
            input.n_iters
        )));
    }
    Ok(OptimizerReport {
        delta_eps: x,
        theta: th,
        method: RootMethod::Newton,
        iterations: history.len(),
        residual,
        residual_history: history,
    })
}

/// Smallest positive root on `(0, upper)`, located by a coarse scan and refined by bisection.
fn bisect_first_root(th: f64, k: usize, upper: f64) -> Result<f64> {
    let step = upper / SCAN_STEPS as f64;
    let mut lo = 0.0;
    let mut g_lo = root_fn(th, k, lo);
    for i in 1..=SCAN_STEPS {
        let hi = step * i as f64;
        let g_hi = root_fn(th, k, hi);
        if g_lo.signum() != g_hi.signum() || g_hi == 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if root_fn(th, k, mid).signum() == g_lo.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a <= f64::EPSILON * b {
                    break;
                }
            }
            let x = 0.5 * (a + b);
            let r = root_fn(th, k, x).abs();
            if r > RESIDUAL_TOL {
                return Err(Error::Convergence(format!("bisection residual {r:e}")));
            }
            return Ok(x);
        }
        lo = hi;
        g_lo = g_hi;
    }
    Err(Error::Convergence("no sign change on the admissible interval".into()))
}

/// Closed form for two circles, `arctan(Θ / (1 + Θ))`.
pub fn two_circle_optimum(m_psk: usize, x_linear: f64) -> Result<f64> {
    let th = theta(m_psk, x_linear)?;
    Ok((th / (1.0 + th)).atan())
}

/// Smallest `Λ_V·Λ_H` over ordered pairs of distinct states, with the minimizing pair.
pub fn min_lambda_product(c: &Constellation, x_linear: f64) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, (0, 0));
    for a in 0..c.len() {
        for b in 0..c.len() {
            if a == b {
                continue;
            }
            let (lv, lh) = lambda_pair(c.state(a), c.state(b), x_linear);
            if lv * lh < best.0 {
                best = (lv * lh, (a, b));
            }
        }
    }
    best
}

/// Minima of `Λ_V·Λ_H` restricted to same-circle and to cross-circle pairs.
/// The cross-circle value is infinite for a single circle.
pub fn min_lambda_by_branch(c: &Constellation, x_linear: f64) -> (f64, f64) {
    let (mut same, mut cross) = (f64::INFINITY, f64::INFINITY);
    for a in reference_states(c) {
        for b in 0..c.len() {
            if a == b {
                continue;
            }
            let (lv, lh) = lambda_pair(c.state(a), c.state(b), x_linear);
            let slot = if same_circle(c, a, b) { &mut same } else { &mut cross };
            *slot = slot.min(lv * lh);
        }
    }
    (same, cross)
}

fn same_circle(c: &Constellation, a: usize, b: usize) -> bool {
    let m2 = c.m_psk() * c.m_psk();
    a / m2 == b / m2
}

/// `Λ` depends only on phase differences, so pairs starting at `q_V = q_H = 0` cover every case.
fn reference_states(c: &Constellation) -> impl Iterator<Item = usize> {
    let m2 = c.m_psk() * c.m_psk();
    (0..c.circles()).map(move |k| k * m2)
}

fn min_lambda_reduced(c: &Constellation, x_linear: f64) -> f64 {
    let (same, cross) = min_lambda_by_branch(c, x_linear);
    same.min(cross)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub grid_points: usize,
    pub step: f64,
    /// Grid maximizer of the smallest `Λ_V·Λ_H`.
    pub argmax: f64,
    pub max_value: f64,
    pub delta_eps_opt: f64,
    /// `|argmax − Δε_opt| ≤ step`.
    pub agrees: bool,
}

/// Sweeps Δε over the open admissible interval and compares the max–min
/// maximizer with the root-finding result.
pub fn grid_verify_optimum(input: &OptimizerInput, grid_points: usize) -> Result<GridReport> {
    if grid_points < 1000 {
        return Err(Error::Domain("grid verification needs at least 1000 points".into()));
    }
    let opt = optimize_delta_eps(input)?;
    let upper = max_delta_eps(input.k_circles);
    let step = upper / (grid_points + 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..=grid_points {
        let de = step * i as f64;
        let c = Constellation::latitude(input.k_circles, input.m_psk, de)?;
        let v = min_lambda_reduced(&c, input.x_linear);
        if v > best.0 {
            best = (v, de);
        }
    }
    Ok(GridReport {
        grid_points,
        step,
        argmax: best.1,
        max_value: best.0,
        delta_eps_opt: opt.delta_eps,
        agrees: (best.1 - opt.delta_eps).abs() <= step,
    })
}
