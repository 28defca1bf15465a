//! Copula CoVaR and Delta-CoVaR of the system index conditional on each
//! insurer.
//!
//! The conditioning event is "insurer return at or below its quantile":
//! the system's conditional quantile level `u*` solves
//! `C(u*, cond) / cond = q`, and the CoVaR is the system margin's quantile
//! at `u*`, rescaled by its conditional mean and volatility.

use std::io::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::depnet::{Copula, PairDependence, StudentTCopula};
use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::margins::{MarginalFit, SkewT};

pub const DEFAULT_Q: f64 = 0.05;
/// Bracket width at which the root search stops.
pub const ROOT_TOL: f64 = 1e-8;

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::domain("q", format!("{q} not in (0, 0.5)")));
    }
    Ok(())
}

/// Level `u*` with `C(u*, cond) / cond = q`, by bisection on (0, 1).
pub fn covar_root_with<C: Copula + ?Sized>(copula: &C, q: f64, cond: f64) -> Result<f64> {
    check_q(q)?;
    if !(cond > 0.0 && cond <= 1.0) {
        return Err(Error::domain("cond", format!("{cond} not in (0, 1]")));
    }
    let g = |u: f64| copula.cdf(u, cond) / cond - q;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !(g(lo) <= 0.0 && g(hi) >= 0.0) {
        return Err(Error::Numerical(format!(
            "CoVaR root not bracketed for q = {q}, cond = {cond}"
        )));
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// [`covar_root_with`] for the Student-t copula.
pub fn covar_root(q: f64, cond: f64, rho: f64, nu: f64) -> Result<f64> {
    covar_root_with(&StudentTCopula::new(rho, nu)?, q, cond)
}

/// CoVaR of the system under the insurer's distress (`<= q` quantile) and
/// median (`<= 0.5` quantile) conditioning, for one insurer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarSeries {
    pub ticker: String,
    pub distress: Vec<f64>,
    pub median: Vec<f64>,
}

impl CovarSeries {
    pub fn delta(&self) -> Vec<f64> {
        self.distress.iter().zip(&self.median).map(|(a, b)| a - b).collect()
    }
}

/// CoVaR series for the system margin `system` and a pair fit whose first
/// member is the system index.
pub fn covar_series(system: &MarginalFit, pair: &PairDependence, q: f64) -> Result<CovarSeries> {
    check_q(q)?;
    let n = system.cond_mean.len();
    if pair.rho.len() != n || system.cond_var.len() != n {
        return Err(Error::InvalidData(format!(
            "system margin has {n} dates, pair ({}, {}) has {}",
            pair.pair.0,
            pair.pair.1,
            pair.rho.len()
        )));
    }
    let margin = SkewT::new(system.params.nu, system.params.xi)?;
    let nu = pair.params.nu_cop;
    let mut distress = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    for t in 0..n {
        let copula = StudentTCopula::new(pair.rho[t], nu)?;
        let scale = system.cond_var[t].sqrt();
        let at = |cond: f64| -> Result<f64> {
            let u = covar_root_with(&copula, q, cond)?;
            Ok(system.cond_mean[t] + scale * margin.quantile(u)?)
        };
        distress.push(at(q)?);
        median.push(at(0.5)?);
    }
    Ok(CovarSeries {
        ticker: pair.pair.1.clone(),
        distress,
        median,
    })
}

/// Per-insurer CoVaR and Delta-CoVaR over a common date index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoVarFrame {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub q: f64,
    /// `covar[i][t]`, distress conditioning.
    pub covar: Vec<Vec<f64>>,
    pub covar_median: Vec<Vec<f64>>,
    pub delta_covar: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsurerMean {
    pub ticker: String,
    pub covar: f64,
    pub delta_covar: f64,
}

/// Assemble per-insurer series into a frame.
pub fn delta_covar(dates: Vec<NaiveDate>, series: Vec<CovarSeries>, q: f64) -> Result<CoVarFrame> {
    check_q(q)?;
    if series.is_empty() {
        return Err(Error::InvalidData("no insurer series".into()));
    }
    for s in &series {
        if s.distress.len() != dates.len() || s.median.len() != dates.len() {
            return Err(Error::InvalidData(format!(
                "{}: {} values for {} dates",
                s.ticker,
                s.distress.len(),
                dates.len()
            )));
        }
    }
    Ok(CoVarFrame {
        dates,
        tickers: series.iter().map(|s| s.ticker.clone()).collect(),
        q,
        delta_covar: series.iter().map(CovarSeries::delta).collect(),
        covar: series.iter().map(|s| s.distress.clone()).collect(),
        covar_median: series.into_iter().map(|s| s.median).collect(),
    })
}

/// CoVaR frame for every insurer pair fit, in parallel over insurers.
pub fn covar_frame(
    system: &MarginalFit,
    pairs: &[PairDependence],
    dates: Vec<NaiveDate>,
    q: f64,
) -> Result<CoVarFrame> {
    let series = pairs
        .par_iter()
        .map(|p| covar_series(system, p, q))
        .collect::<Result<Vec<_>>>()?;
    delta_covar(dates, series, q)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

impl CoVarFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Cross-insurer mean Delta-CoVaR per date.
    pub fn mean_series(&self) -> Vec<f64> {
        (0..self.len())
            .map(|t| mean(self.delta_covar.iter().map(|s| s[t])))
            .collect()
    }

    /// Time means per insurer.
    pub fn insurer_means(&self) -> Vec<InsurerMean> {
        self.tickers
            .iter()
            .enumerate()
            .map(|(i, ticker)| InsurerMean {
                ticker: ticker.clone(),
                covar: mean(self.covar[i].iter().copied()),
                delta_covar: mean(self.delta_covar[i].iter().copied()),
            })
            .collect()
    }

    /// Long format: `date,ticker,covar,delta_covar`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("date,ticker,covar,delta_covar\n");
        for (t, date) in self.dates.iter().enumerate() {
            for (i, ticker) in self.tickers.iter().enumerate() {
                out.push_str(&format!(
                    "{date},{ticker},{},{}\n",
                    fmt_num(self.covar[i][t]),
                    fmt_num(self.delta_covar[i][t])
                ));
            }
        }
        write_file(path.as_ref(), &out)
    }

    /// `ticker,mean_covar,mean_delta_covar`.
    pub fn write_means_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("ticker,mean_covar,mean_delta_covar\n");
        for m in self.insurer_means() {
            out.push_str(&format!(
                "{},{},{}\n",
                m.ticker,
                fmt_num(m.covar),
                fmt_num(m.delta_covar)
            ));
        }
        write_file(path.as_ref(), &out)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depnet::{Comonotone, DccCopulaParams, Independence};
    use crate::margins::ArmaGarchParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    fn unit_margin(n: usize, nu: f64, xi: f64) -> MarginalFit {
        MarginalFit {
            params: ArmaGarchParams {
                mu0: 0.0,
                ar: 0.0,
                ma: 0.0,
                omega: 1.0,
                alpha: 0.0,
                beta: 0.0,
                nu,
                xi,
            },
            cond_mean: vec![0.0; n],
            cond_var: vec![1.0; n],
            std_resid: vec![0.0; n],
            pit: vec![0.5; n],
            loglik: 0.0,
            iterations: 0,
        }
    }

    fn pair(rho: Vec<f64>, nu: f64) -> PairDependence {
        PairDependence {
            pair: ("IDX".into(), "A".into()),
            params: DccCopulaParams {
                c: 0.0,
                d: 0.0,
                nu_cop: nu,
                qbar: 0.0,
            },
            lambda: vec![0.0; rho.len()],
            rho,
            loglik: 0.0,
            effectively_gaussian: false,
            fallback: None,
        }
    }

    #[test]
    fn analytic_limits() {
        for &cond in &[0.05, 0.3, 0.5, 1.0] {
            let u = covar_root_with(&Independence, 0.05, cond).unwrap();
            assert!((u - 0.05).abs() < 1e-8);
        }
        let u = covar_root_with(&Comonotone, 0.05, 0.05).unwrap();
        assert!((u - 0.0025).abs() < 1e-8);
    }

    #[test]
    fn domain_errors() {
        assert!(covar_root(0.6, 0.05, 0.5, 8.0).is_err());
        assert!(covar_root(0.0, 0.05, 0.5, 8.0).is_err());
        assert!(covar_root(0.05, 0.0, 0.5, 8.0).is_err());
        assert!(covar_root(0.05, 1.2, 0.5, 8.0).is_err());
    }

    #[test]
    fn root_matches_monte_carlo_conditional_quantile() {
        let (rho, nu, q) = (0.5, 8.0, 0.05);
        let u_star = covar_root(q, q, rho, nu).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chi = ChiSquared::new(nu).unwrap();
        let t_cut = crate::special::t_quantile(q, nu);
        let mut conditional = Vec::new();
        for _ in 0..1_000_000 {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let w = (chi.sample(&mut rng) / nu).sqrt();
            let x = z1 / w;
            let y = (rho * z1 + (1.0 - rho * rho).sqrt() * z2) / w;
            if y <= t_cut {
                conditional.push(crate::special::t_cdf(x, nu));
            }
        }
        conditional.sort_by(f64::total_cmp);
        let idx = ((conditional.len() as f64) * q) as usize;
        let mc = conditional[idx];
        assert!((u_star - mc).abs() < 0.003, "root {u_star} vs MC {mc}");
    }

    #[test]
    fn standardized_symmetric_margin_gives_raw_quantile() {
        let sys = unit_margin(1, 6.0, 1.0);
        let s = covar_series(&sys, &pair(vec![0.4], 6.0), 0.05).unwrap();
        let u = covar_root(0.05, 0.05, 0.4, 6.0).unwrap();
        let expect = SkewT::new(6.0, 1.0).unwrap().quantile(u).unwrap();
        assert!((s.distress[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn independence_null() {
        let sys = unit_margin(1, 5.0, 0.9);
        let s = covar_series(&sys, &pair(vec![0.0], 1e6), 0.05).unwrap();
        assert!(s.delta()[0].abs() < 1e-3, "{}", s.delta()[0]);
    }

    #[test]
    fn delta_non_increasing_in_rho() {
        let rhos: Vec<f64> = (0..=9).map(|i| -0.2 + 0.1 * i as f64).collect();
        let sys = unit_margin(rhos.len(), 5.0, 0.9);
        let s = covar_series(&sys, &pair(rhos.clone(), 6.0), 0.05).unwrap();
        let d = s.delta();
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "{d:?}");
        }
        for (r, v) in rhos.iter().zip(&d) {
            if *r >= 0.0 {
                assert!(*v <= 0.0);
            }
        }
        for t in 0..rhos.len() {
            assert!(s.distress[t] <= s.median[t] + 1e-7);
        }
    }

    #[test]
    fn location_shift_equivariance() {
        let mut sys = unit_margin(3, 5.0, 1.2);
        sys.cond_var = vec![0.5, 1.0, 2.0];
        let p = pair(vec![0.1, 0.5, 0.8], 7.0);
        let base = covar_series(&sys, &p, 0.05).unwrap();
        sys.cond_mean = vec![0.3; 3];
        let shifted = covar_series(&sys, &p, 0.05).unwrap();
        for t in 0..3 {
            assert!((shifted.distress[t] - base.distress[t] - 0.3).abs() < 1e-12);
            assert!((shifted.median[t] - base.median[t] - 0.3).abs() < 1e-12);
            assert!((shifted.delta()[t] - base.delta()[t]).abs() < 1e-12);
        }
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        (0..n).map(|i| d0 + chrono::Duration::weeks(i as i64)).collect()
    }

    #[test]
    fn aggregation() {
        let constant = CovarSeries {
            ticker: "A".into(),
            distress: vec![-0.05; 10],
            median: vec![-0.03; 10],
        };
        let f = delta_covar(dates(10), vec![constant], 0.05).unwrap();
        assert!(f.mean_series().iter().all(|v| (v + 0.02).abs() < 1e-15));

        let mk = |t: &str, d: f64| CovarSeries {
            ticker: t.into(),
            distress: vec![d; 2],
            median: vec![0.0; 2],
        };
        let f = delta_covar(dates(2), vec![mk("A", -0.01), mk("B", -0.03)], 0.05).unwrap();
        assert!(f.mean_series().iter().all(|v| (v + 0.02).abs() < 1e-15));
        let means = f.insurer_means();
        assert_eq!(means[1].ticker, "B");
        assert!((means[1].delta_covar + 0.03).abs() < 1e-15);
        assert!(delta_covar(dates(3), vec![mk("A", -0.01)], 0.05).is_err());
    }

    #[test]
    fn csv_output() {
        let s = CovarSeries {
            ticker: "A".into(),
            distress: vec![-0.05, -0.04],
            median: vec![-0.03, -0.03],
        };
        let f = delta_covar(dates(2), vec![s], 0.05).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("covar.csv");
        f.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next(), Some("date,ticker,covar,delta_covar"));
        assert_eq!(text.lines().nth(1), Some("2010-01-01,A,-0.05,-0.02"));
    }
}
