//! ARMA(1,1)-GARCH(1,1) margins with skew-t innovations.
//!
//! Mean: `mu_t = mu0 + ar * r_{t-1} + ma * y_{t-1}`, residual `y_t = r_t - mu_t`.
//! Variance: `h_t = omega + alpha * y_{t-1}^2 + beta * h_{t-1}`.
//! Innovations `eps_t = y_t / sqrt(h_t)` follow the standardized skew-t.

pub mod skewt;

use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Real};
use crate::error::{Error, Result};
use crate::optim::{bfgs, nelder_mead, BfgsOptions, NelderMeadOptions};
pub use skewt::{skewt_cdf, skewt_quantile, SkewT};

/// PIT values are clamped to `[PIT_CLAMP, 1 - PIT_CLAMP]`.
pub const PIT_CLAMP: f64 = 1e-10;

const NU_MIN: f64 = 2.05;
const NU_SPAN: f64 = 197.95;
const PERSISTENCE_CAP: f64 = 0.9999;
const COEF_CAP: f64 = 0.999;
const N_PARAMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmaGarchParams {
    pub mu0: f64,
    pub ar: f64,
    pub ma: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub xi: f64,
}

impl ArmaGarchParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.omega > 0.0) {
            return Err(Error::domain("omega", format!("{} must be > 0", p.omega)));
        }
        if !(p.alpha >= 0.0 && p.beta >= 0.0) {
            return Err(Error::domain("alpha/beta", "must be >= 0"));
        }
        if !(p.alpha + p.beta < 1.0) {
            return Err(Error::domain("alpha+beta", format!("{} must be < 1", p.alpha + p.beta)));
        }
        if !(p.ar.abs() < 1.0) {
            return Err(Error::domain("ar", format!("|{}| must be < 1", p.ar)));
        }
        SkewT::new(p.nu, p.xi)?;
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }

    pub fn unconditional_mean(&self) -> f64 {
        self.mu0 / (1.0 - self.ar)
    }
}

/// How the first conditional variance is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Presample {
    /// `h_1 = omega / (1 - alpha - beta)`.
    #[default]
    Unconditional,
    /// `h_1` fixed to the given value.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub cond_mean: Vec<f64>,
    pub cond_var: Vec<f64>,
    pub std_resid: Vec<f64>,
}

/// Run the mean and variance recursions. The presample residual is 0 and the
/// presample return is the unconditional mean.
pub fn garch_filter(params: &ArmaGarchParams, returns: &[f64], presample: Presample) -> Result<Filtered> {
    params.validate()?;
    if returns.is_empty() {
        return Err(Error::InvalidData("empty return series".into()));
    }
    let n = returns.len();
    let mut out = Filtered {
        cond_mean: Vec::with_capacity(n),
        cond_var: Vec::with_capacity(n),
        std_resid: Vec::with_capacity(n),
    };
    let mut r_prev = params.unconditional_mean();
    let mut y_prev = 0.0;
    let mut h = match presample {
        Presample::Unconditional => params.unconditional_variance(),
        Presample::Fixed(h1) => h1,
    };
    for (t, &r) in returns.iter().enumerate() {
        if t > 0 {
            h = params.omega + params.alpha * y_prev * y_prev + params.beta * h;
        }
        let mu = params.mu0 + params.ar * r_prev + params.ma * y_prev;
        let y = r - mu;
        out.cond_mean.push(mu);
        out.cond_var.push(h);
        out.std_resid.push(y / h.sqrt());
        r_prev = r;
        y_prev = y;
    }
    Ok(out)
}

/// Log-likelihood under unconditional presample variance, generic in the
/// scalar type so it can be differentiated.
fn loglik_generic<T: Real>(p: &[T; N_PARAMS], returns: &[f64]) -> T {
    let [mu0, ar, ma, omega, alpha, beta, nu, xi] = *p;
    let one = T::cst(1.0);
    let mut r_prev = mu0 / (one - ar);
    let mut y_prev = T::cst(0.0);
    let mut h = omega / (one - alpha - beta);
    let mut ll = T::cst(0.0);
    for (t, &r) in returns.iter().enumerate() {
        if t > 0 {
            h = omega + alpha * y_prev * y_prev + beta * h;
        }
        let mu = mu0 + ar * r_prev + ma * y_prev;
        let y = -mu + r;
        let eps = y / h.sqrt();
        ll = ll + skewt::ln_pdf_generic(eps, nu, xi) - h.ln() * 0.5;
        r_prev = T::cst(r);
        y_prev = y;
    }
    ll
}

/// Log-likelihood of a return series at the given parameters.
pub fn loglik(params: &ArmaGarchParams, returns: &[f64]) -> Result<f64> {
    params.validate()?;
    let p = params;
    Ok(loglik_generic(
        &[p.mu0, p.ar, p.ma, p.omega, p.alpha, p.beta, p.nu, p.xi],
        returns,
    ))
}

/// Smooth map from unconstrained coordinates to admissible parameters.
///
/// `ar, ma` via scaled `tanh`; `omega, xi` via `exp`; `alpha + beta` via a
/// capped logistic with a logistic share for `alpha`; `nu` via a logistic on
/// `(2.05, 200)`.
fn to_params<T: Real>(theta: &[T; N_PARAMS]) -> [T; N_PARAMS] {
    let persistence = theta[4].logistic() * PERSISTENCE_CAP;
    let share = theta[5].logistic();
    [
        theta[0],
        theta[1].tanh() * COEF_CAP,
        theta[2].tanh() * COEF_CAP,
        theta[3].exp(),
        persistence * share,
        persistence * (T::cst(1.0) - share),
        theta[6].logistic() * NU_SPAN + NU_MIN,
        theta[7].exp(),
    ]
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn from_params(p: &ArmaGarchParams) -> [f64; N_PARAMS] {
    let persistence = p.alpha + p.beta;
    [
        p.mu0,
        (p.ar / COEF_CAP).atanh(),
        (p.ma / COEF_CAP).atanh(),
        p.omega.ln(),
        logit(persistence / PERSISTENCE_CAP),
        logit(p.alpha / persistence),
        logit((p.nu - NU_MIN) / NU_SPAN),
        p.xi.ln(),
    ]
}

fn params_of(v: &[f64; N_PARAMS]) -> ArmaGarchParams {
    ArmaGarchParams {
        mu0: v[0],
        ar: v[1],
        ma: v[2],
        omega: v[3],
        alpha: v[4],
        beta: v[5],
        nu: v[6],
        xi: v[7],
    }
}

/// Objective in unconstrained coordinates on a rescaled series.
pub struct MarginObjective<'a> {
    returns: &'a [f64],
}

impl<'a> MarginObjective<'a> {
    pub fn new(returns: &'a [f64]) -> Self {
        MarginObjective { returns }
    }

    pub fn neg_loglik(&self, theta: &[f64]) -> f64 {
        let th: [f64; N_PARAMS] = theta.try_into().expect("8 coordinates");
        -loglik_generic(&to_params(&th), self.returns)
    }

    /// Negative log-likelihood and its exact gradient (forward-mode AD).
    pub fn neg_loglik_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let th: [Dual<N_PARAMS>; N_PARAMS] = std::array::from_fn(|i| Dual::variable(theta[i], i));
        let ll = loglik_generic(&to_params(&th), self.returns);
        (-ll.v, ll.d.iter().map(|g| -g).collect())
    }

    pub fn params(&self, theta: &[f64]) -> ArmaGarchParams {
        let th: [f64; N_PARAMS] = theta.try_into().expect("8 coordinates");
        params_of(&to_params(&th))
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Starting `(alpha, beta)` pairs; one local search per entry.
    pub starts: Vec<(f64, f64)>,
    pub bfgs: BfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: vec![(0.05, 0.90), (0.10, 0.80), (0.03, 0.10)],
            bfgs: BfgsOptions {
                max_iter: 1000,
                grad_tol: 1e-5,
                f_tol: 1e-13,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalFit {
    pub params: ArmaGarchParams,
    pub cond_mean: Vec<f64>,
    pub cond_var: Vec<f64>,
    pub std_resid: Vec<f64>,
    pub pit: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

impl MarginalFit {
    /// Kolmogorov–Smirnov distance of the PIT series from the uniform law.
    pub fn pit_uniformity(&self) -> f64 {
        ks_uniform(&self.pit)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Maximum-likelihood ARMA(1,1)-GARCH(1,1)-skew-t fit with default options.
pub fn fit_arma_garch(returns: &[f64]) -> Result<MarginalFit> {
    fit_arma_garch_with(returns, &FitOptions::default())
}

pub fn fit_arma_garch_with(returns: &[f64], opts: &FitOptions) -> Result<MarginalFit> {
    if returns.len() < crate::ingest::MIN_ROWS {
        return Err(Error::InvalidData(format!(
            "{} observations, need at least {}",
            returns.len(),
            crate::ingest::MIN_ROWS
        )));
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite return".into()));
    }
    let (mean, var) = mean_var(returns);
    if !(var > 1e-300) || var.sqrt() < 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::Degenerate("constant return series".into()));
    }
    // work on a unit-variance copy; parameters are mapped back afterwards
    let scale = var.sqrt();
    let scaled: Vec<f64> = returns.iter().map(|r| r / scale).collect();
    let objective = MarginObjective::new(&scaled);

    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for &(alpha, beta) in &opts.starts {
        let start = ArmaGarchParams {
            mu0: mean / scale,
            ar: 0.0,
            ma: 0.0,
            omega: 1.0 - alpha - beta,
            alpha,
            beta,
            nu: 8.0,
            xi: 1.0,
        };
        let mut m = bfgs(|x| objective.neg_loglik_grad(x), &from_params(&start), opts.bfgs);
        let mut iterations = m.iterations;
        if !m.converged {
            // simplex polish, then one more gradient pass
            let nm = nelder_mead(
                |x| objective.neg_loglik(x),
                &m.x,
                NelderMeadOptions {
                    max_iter: 4000,
                    ..Default::default()
                },
            );
            m = bfgs(|x| objective.neg_loglik_grad(x), &nm.x, opts.bfgs);
            iterations += nm.iterations + m.iterations;
        }
        if !m.converged || !m.f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(f, _, _)| m.f < *f) {
            best = Some((m.f, m.x, iterations));
        }
    }
    let Some((_, theta, iterations)) = best else {
        return Err(Error::NonConvergence(format!(
            "ARMA-GARCH fit failed from all {} starts",
            opts.starts.len()
        )));
    };

    let s = objective.params(&theta);
    let params = ArmaGarchParams {
        mu0: s.mu0 * scale,
        omega: s.omega * scale * scale,
        ..s
    };
    let filtered = garch_filter(&params, returns, Presample::Unconditional)?;
    let dist = SkewT::new(params.nu, params.xi)?;
    let pit = filtered
        .std_resid
        .iter()
        .map(|e| dist.cdf(*e).clamp(PIT_CLAMP, 1.0 - PIT_CLAMP))
        .collect();
    let loglik = loglik(&params, returns)?;
    Ok(MarginalFit {
        params,
        cond_mean: filtered.cond_mean,
        cond_var: filtered.cond_var,
        std_resid: filtered.std_resid,
        pit,
        loglik,
        iterations,
    })
}

/// One-sample Kolmogorov–Smirnov statistic against U(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS statistic of a fitted margin's PIT series.
pub fn pit_uniformity_check(fit: &MarginalFit) -> f64 {
    fit.pit_uniformity()
}
