//! Special functions needed by the closed-form link analysis.
//!
//! Everything here is a pure function of its arguments.

use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{domain, Result};
use crate::quad;

/// Coefficients of the exponential Q-function approximation
/// `Q(x) ≈ exp(-A·x² - B·x - C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QApproxConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub const Q_APPROX: QApproxConstants = QApproxConstants {
    a: 0.3842,
    b: 0.7640,
    c: 0.6964,
};

/// Order range over which [`parabolic_cylinder_d`] is guaranteed.
pub const PCF_ORDER_MIN: f64 = -60.0;
/// Argument range over which [`parabolic_cylinder_d`] is guaranteed.
pub const PCF_ARG_MAX: f64 = 50.0;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("ln_gamma", "x", x, "0 < x < ∞"));
    }
    Ok(lgamma(x))
}

/// Unchecked `ln Γ(x)`, `x > 0`.
#[inline]
pub(crate) fn lgamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// Regularised lower incomplete gamma function `P(a, x) = γ(a, x)/Γ(a)`.
pub fn gamma_lower_reg(a: f64, x: f64) -> Result<f64> {
    check_incgamma("gamma_lower_reg", a, x)?;
    Ok(incgamma(a, x).0)
}

/// Regularised upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`,
/// computed without cancellation in the upper tail.
pub fn gamma_upper_reg(a: f64, x: f64) -> Result<f64> {
    check_incgamma("gamma_upper_reg", a, x)?;
    Ok(incgamma(a, x).1)
}

fn check_incgamma(func: &'static str, a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(func, "a", a, "a > 0"));
    }
    if !(x >= 0.0) {
        return Err(domain(func, "x", x, "x >= 0"));
    }
    Ok(())
}

/// `(P(a,x), Q(a,x))`: power series below `x = a + 1`, Lentz continued
/// fraction above.
pub(crate) fn incgamma(a: f64, x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 100_000;

    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let ln_prefactor = a * x.ln() - x - lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + ln_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + ln_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Gaussian tail probability `Q(x) = ½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `exp(-A·x² - B·x - C)`, the exponential approximation of `Q(x)` for `x ≥ 0`.
pub fn q_approx_exp(x: f64) -> f64 {
    let QApproxConstants { a, b, c } = Q_APPROX;
    (-(a * x * x) - b * x - c).exp()
}

/// `exp(-x²/2)/12 + exp(-2x²/3)/4`, the two-term approximation of `Q(x)`.
pub fn q_approx_two_term(x: f64) -> f64 {
    let x2 = x * x;
    (-x2 / 2.0).exp() / 12.0 + (-2.0 * x2 / 3.0).exp() / 4.0
}

/// Scaled complementary error function `exp(y²)·erfc(y)` for `y ≥ 0`.
pub fn erfcx(y: f64) -> f64 {
    if y < 20.0 {
        (y * y).exp() * libm::erfc(y)
    } else {
        // Asymptotic series; the eighth term is below 1e-16 at y = 20.
        let inv2y2 = 1.0 / (2.0 * y * y);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..9 {
            term *= -((2 * n - 1) as f64) * inv2y2;
            sum += term;
        }
        sum / (y * PI.sqrt())
    }
}

/// Parabolic cylinder function `D_v(x)` for `v ∈ [-60, 0]`, `x ∈ [0, 50]`.
///
/// Deep in the box the value underflows `f64`; use
/// [`parabolic_cylinder_d_scaled`] when the Gaussian factor is cancelled
/// downstream.
pub fn parabolic_cylinder_d(v: f64, x: f64) -> Result<f64> {
    check_pcf(v, x)?;
    Ok((ln_pcf_scaled(-v, x) - x * x / 4.0).exp())
}

/// `exp(x²/4)·D_v(x)` on the same box as [`parabolic_cylinder_d`].
pub fn parabolic_cylinder_d_scaled(v: f64, x: f64) -> Result<f64> {
    check_pcf(v, x)?;
    Ok(ln_pcf_scaled(-v, x).exp())
}

/// `ln(exp(x²/4)·D_v(x))` on the same box.
pub fn ln_parabolic_cylinder_d_scaled(v: f64, x: f64) -> Result<f64> {
    check_pcf(v, x)?;
    Ok(ln_pcf_scaled(-v, x))
}

fn check_pcf(v: f64, x: f64) -> Result<()> {
    if !(PCF_ORDER_MIN..=0.0).contains(&v) {
        return Err(domain("parabolic_cylinder_d", "v", v, "-60 <= v <= 0"));
    }
    if !(0.0..=PCF_ARG_MAX).contains(&x) {
        return Err(domain("parabolic_cylinder_d", "x", x, "0 <= x <= 50"));
    }
    Ok(())
}

/// `ln(e^{x²/4} D_{-s}(x))` for `s ≥ 0`, `x ≥ 0`.
///
/// For `s > 0`,
/// `e^{x²/4} D_{-s}(x) = Γ(s)⁻¹ ∫₀^∞ t^{s-1} exp(-t²/2 - x·t) dt`.
pub(crate) fn ln_pcf_scaled(s: f64, x: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let nearest = s.round();
    if (s - nearest).abs() < 1e-13 && nearest <= 20.0 && x <= 1.0 {
        return pcf_scaled_integer(nearest as usize, x).ln();
    }
    if (s - 1.0).abs() < 1e-13 {
        return pcf_scaled_minus_one(x).ln();
    }
    let scale = if s > 1.0 {
        // Peak of t^{s-1} e^{-t²/2 - x t}, written without cancellation.
        2.0 * (s - 1.0) / (x + (x * x + 4.0 * (s - 1.0)).sqrt())
    } else {
        1.0 / (x + 1.0)
    };
    let q = quad::exp_sinh_ln(|t| (s - 1.0) * t.ln() - t * t / 2.0 - x * t, scale, 1e-14);
    q.ln_value - lgamma(s)
}

/// `e^{x²/4} D_{-1}(x) = √(π/2)·erfcx(x/√2)`.
fn pcf_scaled_minus_one(x: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(x / SQRT_2)
}

/// Integer orders by the three-term recurrence
/// `D_{-n-1} = (D_{-n+1} - x·D_{-n})/n`, seeded with `D_0` and `D_{-1}`.
/// The recurrence loses digits to cancellation as `x` grows, so callers keep
/// `x ≤ 1`.
fn pcf_scaled_integer(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = pcf_scaled_minus_one(x);
    for k in 1..n {
        let next = (prev - x * cur) / k as f64;
        prev = cur;
        cur = next;
    }
    cur
}
