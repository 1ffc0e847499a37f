//! Quadrature and the special functions behind the error-probability formulas.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub use statrs::function::beta::beta;
pub use statrs::function::erf::erfc;
pub use statrs::function::gamma::gamma;

/// Gaussian tail `Q(x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    Piece {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b);
    let (mut value, mut error) = (first.value, first.error);
    heap.push(first);
    while error > abs_tol.max(rel_tol * value.abs()) {
        if !value.is_finite() {
            return Err(Error::Domain("integrand is not finite".into()));
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Convergence(format!(
                "quadrature error {error:e} above tolerance after {MAX_INTERVALS} intervals"
            )));
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Re-sum occasionally so cancellation in the running totals cannot stall.
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

fn check_f1(a: f64, b1: f64, b2: f64, c: f64, z1: f64, z2: f64) -> Result<()> {
    if !(a > 0.0 && c > a) {
        return Err(Error::Domain(format!("F1 needs c > a > 0, got a = {a}, c = {c}")));
    }
    for (b, z) in [(b1, z1), (b2, z2)] {
        if !z.is_finite() || z > 1.0 {
            return Err(Error::Domain(format!("F1 argument z = {z} must be <= 1")));
        }
        if z == 1.0 && c - a - b <= 0.0 {
            return Err(Error::Domain(format!(
                "F1 diverges at z = 1 unless c - a - b > 0 (got {})",
                c - a - b
            )));
        }
    }
    Ok(())
}

/// Appell `F1(a; b1, b2; c; z1, z2)` from its Euler-type integral.
///
/// With `t = sin²φ` the integral becomes
/// `2∫₀^{π/2} sin^{2a−1}φ·cos^{2(c−a)−1}φ·Π(1 − z_i sin²φ)^{−b_i} dφ`, and
/// `1 − z sin²φ` is formed as `(1 − z) + z cos²φ` so `z = 1` loses nothing.
pub fn appell_f1(a: f64, b1: f64, b2: f64, c: f64, z1: f64, z2: f64) -> Result<f64> {
    check_f1(a, b1, b2, c, z1, z2)?;
    let log_norm = ln_gamma(c) - ln_gamma(a) - ln_gamma(c - a);
    let integrand = |phi: f64| {
        let (s, co) = phi.sin_cos();
        let c2 = co * co;
        let f1 = ((1.0 - z1) + z1 * c2).powf(-b1);
        let f2 = ((1.0 - z2) + z2 * c2).powf(-b2);
        let v = 2.0 * s.powf(2.0 * a - 1.0) * co.powf(2.0 * (c - a) - 1.0) * f1 * f2;
        // Gauss–Kronrod nodes are interior, so this only guards overflow near a singular endpoint.
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let value = integrate(integrand, 0.0, FRAC_PI_2, 1e-15, 1e-13)?;
    Ok(log_norm.exp() * value)
}

/// Gauss `₂F₁(a, b; c; z)` by its power series, `|z| < 1`.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!("series needs |z| < 1, got {z}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..200_000 {
        let n = n as f64;
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && n > 2.0 {
            return Ok(sum);
        }
    }
    Err(Error::Convergence("2F1 series did not converge".into()))
}

/// Appell `F1` by its double series, `|z1|, |z2| < 1`, summed as
/// `Σ_m (a)_m (b1)_m / ((c)_m m!) z1^m · ₂F₁(a + m, b2; c + m; z2)`.
pub fn appell_f1_series(a: f64, b1: f64, b2: f64, c: f64, z1: f64, z2: f64) -> Result<f64> {
    if !(z1.abs() < 1.0 && z2.abs() < 1.0) {
        return Err(Error::Domain("series needs |z1|, |z2| < 1".into()));
    }
    let mut coef = 1.0;
    let mut sum = 0.0;
    for m in 0..200_000 {
        let mf = m as f64;
        let term = coef * hyp2f1_series(a + mf, b2, c + mf, z2)?;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && m > 2 {
            return Ok(sum);
        }
        coef *= (a + mf) * (b1 + mf) / ((c + mf) * (mf + 1.0)) * z1;
        if coef == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::Convergence("F1 series did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_polynomial_and_smooth() {
        let v = integrate(|x| x * x, 0.0, 1.0, 1e-14, 1e-14).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-14).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        // endpoint singularity x^{-1/2}
        let v = integrate(
            |x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 },
            0.0,
            1.0,
            1e-10,
            1e-10,
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn f1_at_origin_is_one() {
        for n in 1..=4 {
            let n = n as f64;
            let v = appell_f1(0.5, n, n, 2.0 * n + 1.0, 0.0, 0.0).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn f1_reduces_to_gauss() {
        for &z in &[-0.5, 0.3, 0.8] {
            let f1 = appell_f1(0.5, 1.5, 0.0, 3.0, z, 0.4).unwrap();
            let g = hyp2f1_series(0.5, 1.5, 3.0, z).unwrap();
            assert!((f1 - g).abs() < 1e-10, "{f1} {g}");
        }
    }

    #[test]
    fn f1_at_unit_argument_matches_gauss_sum() {
        // F1(a; b1, b2; c; 1, 1) = Γ(c)Γ(c−a−b1−b2) / (Γ(c−a)Γ(c−b1−b2))
        let (a, b, c) = (0.5, 2.0, 5.0);
        let f = appell_f1(a, b, b, c, 1.0, 1.0).unwrap();
        let exact = gamma(c) * gamma(c - a - 2.0 * b) / (gamma(c - a) * gamma(c - 2.0 * b));
        assert!((f / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn f1_domain_errors() {
        assert!(appell_f1(1.0, 1.0, 1.0, 0.5, 0.1, 0.1).is_err());
        assert!(appell_f1(0.5, 1.0, 1.0, 3.0, 1.2, 0.1).is_err());
        assert!(appell_f1(0.5, 3.0, 1.0, 3.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn beta_matches_gamma_ratio() {
        for &a in &[0.5, 1.0, 2.5, 4.5] {
            for &b in &[0.5, 1.5, 3.0, 8.5] {
                let r = gamma(a) * gamma(b) / gamma(a + b);
                assert!((beta(a, b) / r - 1.0).abs() < 1e-12);
            }
        }
    }
}
