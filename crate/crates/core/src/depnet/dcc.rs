//! Pairwise DCC(1,1) Student-t copula: filter, likelihood and fit.

use serde::Serialize;

use super::copula::{t_copula_lower_tail_dep, StudentTCopula};
use crate::error::{Error, Result};
use crate::optim::{brent_min, nelder_mead, NelderMeadOptions};
use crate::special::t_quantile;

/// Copula shape search range.
pub const NU_COP_MIN: f64 = 2.1;
pub const NU_COP_MAX: f64 = 50.0;
const PERSISTENCE_CAP: f64 = 0.999;
const RHO_BOUND: f64 = 1.0 - 1e-12;
const MIN_OBS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DccCopulaParams {
    /// Shock loading.
    pub c: f64,
    /// Persistence loading.
    pub d: f64,
    pub nu_cop: f64,
    /// Off-diagonal of the unit-diagonal target matrix `Qbar`.
    pub qbar: f64,
}

impl DccCopulaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.d >= 0.0) {
            return Err(Error::domain("c/d", "loadings must be >= 0"));
        }
        if !(self.c + self.d < 1.0) {
            return Err(Error::domain("c+d", format!("{} must be < 1", self.c + self.d)));
        }
        if !(self.nu_cop > 2.0) {
            return Err(Error::domain("nu_cop", format!("{} must be > 2", self.nu_cop)));
        }
        if !(self.qbar.abs() < 1.0) {
            return Err(Error::domain("qbar", format!("|{}| must be < 1", self.qbar)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDependence {
    pub pair: (String, String),
    pub params: DccCopulaParams,
    pub rho: Vec<f64>,
    pub lambda: Vec<f64>,
    pub loglik: f64,
    /// Shape at the upper end of the search range.
    pub effectively_gaussian: bool,
    /// Set when the dynamic fit failed and the static copula was used.
    pub fallback: Option<String>,
}

fn dcc_recursion(c: f64, d: f64, qbar: f64, z1: &[f64], z2: &[f64], mut visit: impl FnMut(usize, f64)) {
    let w = 1.0 - c - d;
    let (mut q11, mut q22, mut q12) = (1.0, 1.0, qbar);
    for t in 0..z1.len() {
        if t > 0 {
            let (a, b) = (z1[t - 1], z2[t - 1]);
            q11 = w + c * a * a + d * q11;
            q22 = w + c * b * b + d * q22;
            q12 = w * qbar + c * a * b + d * q12;
        }
        let rho = (q12 / (q11 * q22).sqrt()).clamp(-RHO_BOUND, RHO_BOUND);
        visit(t, rho);
    }
}

/// Conditional correlations from the DCC(1,1) recursion with `Q_1 = Qbar`:
/// `Q_t = (1 - c - d) Qbar + c z_{t-1} z_{t-1}' + d Q_{t-1}`.
pub fn dcc_filter(params: &DccCopulaParams, z1: &[f64], z2: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    if z1.len() != z2.len() {
        return Err(Error::InvalidData("score series differ in length".into()));
    }
    let mut rho = Vec::with_capacity(z1.len());
    dcc_recursion(params.c, params.d, params.qbar, z1, z2, |_, r| rho.push(r));
    Ok(rho)
}

/// Student-t scores of the uniforms and their unit-variance rescaling.
struct Scores {
    nu: f64,
    x1: Vec<f64>,
    x2: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
    qbar: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

impl Scores {
    fn new(u1: &[f64], u2: &[f64], nu: f64) -> Result<Self> {
        let x1: Vec<f64> = u1.iter().map(|u| t_quantile(*u, nu)).collect();
        let x2: Vec<f64> = u2.iter().map(|u| t_quantile(*u, nu)).collect();
        let scale = ((nu - 2.0) / nu).sqrt();
        let z1: Vec<f64> = x1.iter().map(|x| x * scale).collect();
        let z2: Vec<f64> = x2.iter().map(|x| x * scale).collect();
        let qbar = pearson(&z1, &z2);
        if !qbar.is_finite() || qbar.abs() >= 1.0 - 1e-8 {
            return Err(Error::Degenerate(format!(
                "score correlation {qbar}; pair is perfectly dependent or constant"
            )));
        }
        Ok(Scores {
            nu,
            x1,
            x2,
            z1,
            z2,
            qbar,
        })
    }

    fn loglik(&self, c: f64, d: f64) -> f64 {
        let mut ll = 0.0;
        dcc_recursion(c, d, self.qbar, &self.z1, &self.z2, |t, rho| {
            ll += StudentTCopula::ln_density_scores(self.x1[t], self.x2[t], rho, self.nu);
        });
        ll
    }
}

fn check_uniforms(u1: &[f64], u2: &[f64]) -> Result<()> {
    if u1.len() != u2.len() {
        return Err(Error::InvalidData("PIT series differ in length".into()));
    }
    if u1.len() < MIN_OBS {
        return Err(Error::InvalidData(format!(
            "{} observations, need at least {MIN_OBS}",
            u1.len()
        )));
    }
    if u1.iter().chain(u2).any(|u| !(*u > 0.0 && *u < 1.0)) {
        return Err(Error::domain("u", "PIT values must lie in (0, 1)"));
    }
    let constant = |u: &[f64]| u.iter().all(|v| *v == u[0]);
    if constant(u1) || constant(u2) {
        return Err(Error::Degenerate("constant PIT series".into()));
    }
    Ok(())
}

/// Copula log-likelihood at the given parameters; `qbar` is taken from
/// `params` rather than re-targeted.
pub fn pair_loglik(params: &DccCopulaParams, u1: &[f64], u2: &[f64]) -> Result<f64> {
    params.validate()?;
    check_uniforms(u1, u2)?;
    let mut scores = Scores::new(u1, u2, params.nu_cop)?;
    scores.qbar = params.qbar;
    Ok(scores.loglik(params.c, params.d))
}

#[derive(Debug, Clone)]
pub struct CopulaFitOptions {
    /// Log-spaced shape grid used to bracket the profile maximum.
    pub nu_grid: Vec<f64>,
    pub inner: NelderMeadOptions,
    /// Starting `(c, d)`.
    pub start: (f64, f64),
}

impl Default for CopulaFitOptions {
    fn default() -> Self {
        let n = 10;
        let (lo, hi) = (NU_COP_MIN.ln(), NU_COP_MAX.ln());
        CopulaFitOptions {
            nu_grid: (0..n)
                .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
                .collect(),
            inner: NelderMeadOptions {
                max_iter: 1500,
                f_tol: 1e-11,
                x_tol: 1e-7,
                initial_step: 0.5,
            },
            start: (0.05, 0.90),
        }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `(c, d)` from unconstrained `(persistence, share)` coordinates.
fn loadings(theta: &[f64]) -> (f64, f64) {
    let p = PERSISTENCE_CAP * logistic(theta[0]);
    let s = logistic(theta[1]);
    (p * s, p * (1.0 - s))
}

fn coordinates(c: f64, d: f64) -> [f64; 2] {
    let p = ((c + d) / PERSISTENCE_CAP).clamp(1e-9, 1.0 - 1e-9);
    let s = (c / (c + d).max(1e-12)).clamp(1e-9, 1.0 - 1e-9);
    [logit(p), logit(s)]
}

struct Profile {
    ll: f64,
    c: f64,
    d: f64,
    converged: bool,
}

/// Maximize over `(c, d)` at a fixed shape.
fn profile(scores: &Scores, start: (f64, f64), opts: &NelderMeadOptions) -> Profile {
    let m = nelder_mead(
        |th| {
            let (c, d) = loadings(th);
            -scores.loglik(c, d)
        },
        &coordinates(start.0, start.1),
        *opts,
    );
    let (c, d) = loadings(&m.x);
    Profile {
        ll: -m.f,
        c,
        d,
        converged: m.converged && m.f.is_finite(),
    }
}

/// Maximize a scalar function of `ln nu` over the grid, then refine.
fn maximize_over_nu(grid: &[f64], mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let ln_grid: Vec<f64> = grid.iter().map(|v| v.ln()).collect();
    let values: Vec<f64> = grid.iter().map(|nu| f(*nu)).collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let lo = ln_grid[best.saturating_sub(1)];
    let hi = ln_grid[(best + 1).min(grid.len() - 1)];
    let (x, fx) = brent_min(|x| -f(x.exp()), lo, hi, 1e-6, 100);
    if -fx >= values[best] {
        (x.exp(), -fx)
    } else {
        (grid[best], values[best])
    }
}

/// Fit a DCC(1,1) Student-t copula to a pair of PIT series.
///
/// The shape is profiled: for each candidate `nu` the scores are recomputed,
/// `Qbar` is re-targeted to their sample correlation and `(c, d)` maximized.
/// If the dynamic fit does not converge the static copula (`c = d = 0`) is
/// returned with `fallback` set.
pub fn fit_pair_copula(names: (&str, &str), u1: &[f64], u2: &[f64], opts: &CopulaFitOptions) -> Result<PairDependence> {
    check_uniforms(u1, u2)?;
    let mut warm = opts.start;
    let mut all_converged = true;
    let mut failure: Option<Error> = None;

    let mut objective = |nu: f64| -> f64 {
        let scores = match Scores::new(u1, u2, nu) {
            Ok(s) => s,
            Err(e) => {
                failure.get_or_insert(e);
                return f64::NEG_INFINITY;
            }
        };
        let p = profile(&scores, warm, &opts.inner);
        if p.ll.is_finite() {
            warm = (p.c, p.d);
        }
        all_converged &= p.converged;
        p.ll
    };
    let (nu, _) = maximize_over_nu(&opts.nu_grid, &mut objective);
    if let Some(e) = failure {
        return Err(e);
    }

    // final inner solve at the selected shape, from two starts
    let scores = Scores::new(u1, u2, nu)?;
    let a = profile(&scores, warm, &opts.inner);
    let b = profile(&scores, opts.start, &opts.inner);
    let best = if b.ll > a.ll { b } else { a };

    let mut fallback = None;
    let params = if best.converged && all_converged {
        DccCopulaParams {
            c: best.c,
            d: best.d,
            nu_cop: nu,
            qbar: scores.qbar,
        }
    } else {
        let (nu_s, _) = maximize_over_nu(&opts.nu_grid, |nu| {
            Scores::new(u1, u2, nu)
                .map(|s| s.loglik(0.0, 0.0))
                .unwrap_or(f64::NEG_INFINITY)
        });
        let s = Scores::new(u1, u2, nu_s)?;
        fallback = Some(format!(
            "DCC fit for {}/{} did not converge; using static t-copula",
            names.0, names.1
        ));
        DccCopulaParams {
            c: 0.0,
            d: 0.0,
            nu_cop: nu_s,
            qbar: s.qbar,
        }
    };
    if let Some(msg) = &fallback {
        log::warn!("{msg}");
    }

    let scores = Scores::new(u1, u2, params.nu_cop)?;
    let rho = dcc_filter(&params, &scores.z1, &scores.z2)?;
    let lambda = rho
        .iter()
        .map(|r| t_copula_lower_tail_dep(*r, params.nu_cop))
        .collect::<Result<Vec<_>>>()?;
    let loglik = pair_loglik(&params, u1, u2)?;
    Ok(PairDependence {
        pair: (names.0.to_string(), names.1.to_string()),
        params,
        rho,
        lambda,
        loglik,
        effectively_gaussian: params.nu_cop >= NU_COP_MAX * (1.0 - 1e-4),
        fallback,
    })
}
