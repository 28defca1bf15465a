//! Bivariate copulas: Student-t (cdf, log density, tail dependence) plus the
//! independence and comonotone limits.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::tanh_sinh;
use crate::special::{ln_gamma, t_cdf, t_ln_pdf, t_quantile};

pub trait Copula {
    /// `C(u, v)` for `u, v` in [0, 1].
    fn cdf(&self, u: f64, v: f64) -> f64;
}

/// `C(u, v) = u v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Independence;

impl Copula for Independence {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        u * v
    }
}

/// `C(u, v) = min(u, v)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Comonotone;

impl Copula for Comonotone {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        u.min(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTCopula {
    rho: f64,
    nu: f64,
}

impl StudentTCopula {
    pub fn new(rho: f64, nu: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::domain("rho", format!("{rho} not in (-1, 1)")));
        }
        if !(nu > 0.0) || nu.is_nan() {
            return Err(Error::domain("nu", format!("{nu} must be > 0")));
        }
        Ok(StudentTCopula { rho, nu })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `P(U <= u, V <= v)` by one-dimensional quadrature of the conditional
    /// distribution: `V | X = s` is a scaled Student-t with `nu + 1` degrees
    /// of freedom, so
    /// `C(u, v) = ∫_{-inf}^{x_u} f_nu(s) T_{nu+1}((x_v - rho s) k(s)) ds`.
    pub fn try_cdf(&self, u: f64, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Error::domain("u/v", format!("({u}, {v}) not in [0, 1]^2")));
        }
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let value = if lo <= 0.5 {
            self.lower_orthant(lo, hi)
        } else {
            // radial symmetry: C(u, v) = u + v - 1 + C(1 - u, 1 - v)
            lo + hi - 1.0 + self.lower_orthant(1.0 - hi, 1.0 - lo)
        };
        Ok(value.clamp((u + v - 1.0).max(0.0), u.min(v)))
    }

    /// Integral with the integration variable on the smaller margin `a <= 0.5`.
    fn lower_orthant(&self, a: f64, b: f64) -> f64 {
        let nu = self.nu;
        let rho = self.rho;
        let xa = t_quantile(a, nu);
        let xb = t_quantile(b, nu);
        let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
        let cond_scale = (nu + 1.0) / (1.0 - rho * rho);
        let integrand = |s: f64| -> f64 {
            let dens = (ln_norm - 0.5 * (nu + 1.0) * (s * s / nu).ln_1p()).exp();
            if dens == 0.0 {
                return 0.0;
            }
            let arg = (xb - rho * s) * (cond_scale / (nu + s * s)).sqrt();
            dens * t_cdf(arg, nu + 1.0)
        };

        // breakpoints: the conditional cdf steps near s = xb / rho
        let mut points = vec![xa];
        if rho != 0.0 {
            let step = xb / rho;
            if step.is_finite() && step < xa {
                points.push(step);
            }
        }
        points.sort_by(f64::total_cmp);
        let left = points[0].min(-1.0);
        if left < points[0] {
            points.insert(0, left);
        }

        let rel = 1e-12;
        let abs = 1e-17;
        // (-inf, left] through s = left / t
        let mut total = tanh_sinh(
            |t| {
                let s = left / t;
                integrand(s) * (-left) / (t * t)
            },
            rel,
            abs,
        );
        for w in points.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            let len = s1 - s0;
            if len > 0.0 {
                total += len * tanh_sinh(|t| integrand(s0 + len * t), rel, abs);
            }
        }
        total
    }

    /// Log copula density at scores `x1, x2` (Student-t quantiles of the
    /// uniforms) with correlation `rho` and shape `nu`.
    pub fn ln_density_scores(x1: f64, x2: f64, rho: f64, nu: f64) -> f64 {
        let one_m = 1.0 - rho * rho;
        let quad = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (nu * one_m);
        let ln_joint = ln_gamma(0.5 * (nu + 2.0))
            - ln_gamma(0.5 * nu)
            - (nu * PI).ln()
            - 0.5 * one_m.ln()
            - 0.5 * (nu + 2.0) * quad.ln_1p();
        ln_joint - t_ln_pdf(x1, nu) - t_ln_pdf(x2, nu)
    }

    pub fn ln_density(&self, u: f64, v: f64) -> f64 {
        Self::ln_density_scores(t_quantile(u, self.nu), t_quantile(v, self.nu), self.rho, self.nu)
    }

    pub fn lower_tail_dependence(&self) -> f64 {
        lower_tail_dep(self.rho, self.nu)
    }
}

impl Copula for StudentTCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        self.try_cdf(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))
            .expect("clamped arguments are in the domain")
    }
}

fn lower_tail_dep(rho: f64, nu: f64) -> f64 {
    if rho >= 1.0 {
        return 1.0;
    }
    if rho <= -1.0 {
        return 0.0;
    }
    2.0 * t_cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
}

/// Lower tail dependence of the Student-t copula,
/// `2 T_{nu+1}(-sqrt((nu + 1)(1 - rho)/(1 + rho)))`.
pub fn t_copula_lower_tail_dep(rho: f64, nu: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", format!("{rho} not in [-1, 1]")));
    }
    if !(nu > 0.0) {
        return Err(Error::domain("nu", format!("{nu} must be > 0")));
    }
    Ok(lower_tail_dep(rho, nu))
}

/// Bivariate Student-t copula cdf.
pub fn t_copula_cdf(u: f64, v: f64, rho: f64, nu: f64) -> Result<f64> {
    StudentTCopula::new(rho, nu)?.try_cdf(u, v)
}
