//! Student-t and normal distribution primitives.
//!
//! The regularized incomplete beta and log-gamma functions come from
//! `statrs`, the complementary error function from `libm`; everything built on top of them (cdf, density, quantile for
//! real-valued degrees of freedom) lives here so the tail behaviour is under
//! our control.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;
pub use statrs::function::gamma::{digamma, ln_gamma};

use std::f64::consts::{PI, SQRT_2};

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Log density of the standard Student-t with `nu` degrees of freedom.
pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub fn t_pdf(x: f64, nu: f64) -> f64 {
    t_ln_pdf(x, nu).exp()
}

/// Standard Student-t cdf for real `nu > 0`.
///
/// The lower tail is evaluated directly from the incomplete beta function,
/// so `t_cdf(-1e3, 10.0)` keeps full relative precision.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Lower-tail probability `P(T <= -|x|)`, accurate far into the tail.
fn t_lower_tail(x_neg: f64, nu: f64) -> f64 {
    0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x_neg * x_neg))
}

/// Standard Student-t quantile for `p` in (0, 1).
///
/// Safeguarded Newton iteration on the log cdf inside a maintained bracket;
/// converges to a relative step of 1e-15.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    sign * lower_tail_root(target, nu)
}

/// Positive `x` such that `P(T <= -x) = p`, `p < 0.5`.
fn lower_tail_root(p: f64, nu: f64) -> f64 {
    let ln_p = p.ln();
    // Starting point: the heavier of the normal and power-tail approximations.
    let z = -norm_quantile(p);
    let ln_k = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
    let tail_guess = ((ln_k + 0.5 * (nu - 1.0) * nu.ln() - ln_p) / nu).exp();
    let mut x = z.max(if tail_guess.is_finite() { tail_guess } else { z });

    // Bracket [lo, hi] in terms of the positive magnitude x.
    let mut lo = 0.0_f64;
    let mut hi = x.max(1e-3);
    while t_lower_tail(-hi, nu) > p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let cdf = t_lower_tail(-x, nu);
        if cdf > p {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln F(-x) = -f(x)/F(-x)
        let g = cdf.ln() - ln_p;
        let dg = -(t_ln_pdf(x, nu) - cdf.ln()).exp();
        let mut next = x - g / dg;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    x
}
