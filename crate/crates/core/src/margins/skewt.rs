//! Fernández–Steel skew Student-t, standardized to zero mean and unit variance.
//!
//! With `g` the unit-variance Student-t density, the skewed variable `Z` has
//! density `2/(xi + 1/xi) * g(z / xi^sign(z))`. Its mean `m` and standard
//! deviation `s` are removed so that `X = (Z - m) / s` has mean 0, variance 1.

use std::f64::consts::PI;

use crate::dual::Real;
use crate::error::{Error, Result};
use crate::special::{t_cdf, t_quantile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewT {
    nu: f64,
    xi: f64,
    m: f64,
    s: f64,
}

/// Mean and standard deviation of the unstandardized skewed variable.
fn moments<T: Real>(nu: T, xi: T) -> (T, T) {
    let m1 = ((nu - 1.0) * 0.5).ln_gamma() - (nu * 0.5).ln_gamma();
    let m1 = m1.exp() * (nu - 2.0).sqrt() / PI.sqrt();
    let inv = T::cst(1.0) / xi;
    let m = m1 * (xi - inv);
    let s2 = xi * xi + inv * inv - 1.0 - m * m;
    (m, s2.sqrt())
}

/// Log density of the standardized skew-t, generic for differentiation.
pub fn ln_pdf_generic<T: Real>(x: T, nu: T, xi: T) -> T {
    let (m, s) = moments(nu, xi);
    let z = x * s + m;
    let w = if z.value() >= 0.0 { z / xi } else { z * xi };
    let ln_g = ((nu + 1.0) * 0.5).ln_gamma()
        - (nu * 0.5).ln_gamma()
        - ((nu - 2.0) * PI).ln() * 0.5
        - (nu + 1.0) * 0.5 * (w * w / (nu - 2.0)).ln_1p();
    (xi + T::cst(1.0) / xi).ln() * -1.0 + std::f64::consts::LN_2 + s.ln() + ln_g
}

impl SkewT {
    pub fn new(nu: f64, xi: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::domain("nu", format!("{nu} must be > 2")));
        }
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::domain("xi", format!("{xi} must be > 0")));
        }
        let (m, s) = moments(nu, xi);
        Ok(SkewT { nu, xi, m, s })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Unit-variance Student-t cdf.
    fn g_cdf(&self, w: f64) -> f64 {
        t_cdf(w * (self.nu / (self.nu - 2.0)).sqrt(), self.nu)
    }

    fn g_quantile(&self, p: f64) -> f64 {
        t_quantile(p, self.nu) * ((self.nu - 2.0) / self.nu).sqrt()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        ln_pdf_generic(x, self.nu, self.xi)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let xi2 = self.xi * self.xi;
        let z = x * self.s + self.m;
        if z < 0.0 {
            2.0 / (1.0 + xi2) * self.g_cdf(z * self.xi)
        } else {
            // 1 - upper tail, upper tail from the mirrored lower tail
            1.0 - 2.0 * xi2 / (1.0 + xi2) * self.g_cdf(-z / self.xi)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("u", format!("{p} not in (0, 1)")));
        }
        let xi2 = self.xi * self.xi;
        let p0 = 1.0 / (1.0 + xi2);
        let z = if p < p0 {
            self.g_quantile(p * (1.0 + xi2) / 2.0) / self.xi
        } else {
            let upper = (1.0 - p) * (1.0 + xi2) / (2.0 * xi2);
            -self.xi * self.g_quantile(upper)
        };
        Ok((z - self.m) / self.s)
    }
}

/// Convenience wrapper: cdf of the standardized skew-t.
pub fn skewt_cdf(x: f64, nu: f64, xi: f64) -> Result<f64> {
    Ok(SkewT::new(nu, xi)?.cdf(x))
}

/// Convenience wrapper: quantile of the standardized skew-t.
pub fn skewt_quantile(u: f64, nu: f64, xi: f64) -> Result<f64> {
    SkewT::new(nu, xi)?.quantile(u)
}
