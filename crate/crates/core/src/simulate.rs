//! Seeded synthetic panels: ARMA-GARCH-skew-t margins coupled by a
//! multivariate DCC Student-t copula whose target correlation and shape
//! switch between regimes.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{cumulative_prices, PricePanel, ReturnPanel};
use crate::margins::{ArmaGarchParams, SkewT, PIT_CLAMP};
use crate::special::t_cdf;

/// Target correlation layout. For the tree layouts the correlation of two
/// assets is `rho` raised to their hop distance in the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Equicorrelation {
        rho: f64,
    },
    /// Chain `0 - 1 - ... - (k-1)`.
    Path {
        rho: f64,
    },
    /// Every asset attached to asset 0.
    Star {
        rho: f64,
    },
    /// Hubs 0 and 1 joined; asset `i >= 2` hangs off hub `i % 2`.
    DoubleStar {
        rho: f64,
    },
}

impl Structure {
    fn hops(&self, i: usize, j: usize) -> usize {
        if i == j {
            return 0;
        }
        match self {
            Structure::Equicorrelation { .. } => 1,
            Structure::Path { .. } => i.abs_diff(j),
            Structure::Star { .. } => {
                if i == 0 || j == 0 {
                    1
                } else {
                    2
                }
            }
            Structure::DoubleStar { .. } => {
                let hub = |v: usize| if v < 2 { v } else { v % 2 };
                let (hi, hj) = (hub(i), hub(j));
                (i != hi) as usize + (j != hj) as usize + (hi != hj) as usize
            }
        }
    }

    fn rho(&self) -> f64 {
        match *self {
            Structure::Equicorrelation { rho }
            | Structure::Path { rho }
            | Structure::Star { rho }
            | Structure::DoubleStar { rho } => rho,
        }
    }

    /// The `k x k` target correlation matrix.
    pub fn matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        let rho = self.rho();
        let lower = if matches!(self, Structure::Equicorrelation { .. }) && k > 1 {
            -1.0 / (k - 1) as f64
        } else {
            -1.0
        };
        if !(rho > lower && rho < 1.0) {
            return Err(Error::domain("rho", format!("{rho} gives a singular target")));
        }
        Ok(DMatrix::from_fn(k, k, |i, j| rho.powi(self.hops(i, j) as i32)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub structure: Structure,
    /// Copula shape, > 2.
    pub nu: f64,
}

/// A regime active on periods `start..end` (0-based, end exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub assets: usize,
    /// Number of returns; the price panel has one more row.
    pub periods: usize,
    /// Date of the initial prices; returns follow weekly.
    pub start_date: NaiveDate,
    /// Asset names are the prefix followed by a two-digit index.
    #[serde(default = "default_prefix")]
    pub ticker_prefix: String,
    /// When set, an equally weighted index of the assets is appended.
    #[serde(default)]
    pub index_ticker: Option<String>,
    /// DCC shock loading.
    pub dcc_c: f64,
    /// DCC persistence loading.
    pub dcc_d: f64,
    pub margin: ArmaGarchParams,
    pub base: Regime,
    #[serde(default)]
    pub blocks: Vec<Block>,
}

fn default_prefix() -> String {
    "A".into()
}

impl Default for ScenarioSpec {
    /// Ten weekly assets over 300 weeks: a moderate chain dependence, with a
    /// strong two-hub regime on weeks 100..200.
    fn default() -> Self {
        ScenarioSpec {
            assets: 10,
            periods: 300,
            start_date: NaiveDate::from_ymd_opt(2005, 1, 7).expect("valid date"),
            ticker_prefix: default_prefix(),
            index_ticker: Some("INDEX".into()),
            dcc_c: 0.05,
            dcc_d: 0.90,
            margin: ArmaGarchParams {
                mu0: 0.001,
                ar: 0.1,
                ma: -0.05,
                omega: 4e-5,
                alpha: 0.08,
                beta: 0.87,
                nu: 6.0,
                xi: 0.9,
            },
            base: Regime {
                structure: Structure::Path { rho: 0.5 },
                nu: 4.0,
            },
            blocks: vec![Block {
                start: 100,
                end: 200,
                regime: Regime {
                    structure: Structure::DoubleStar { rho: 0.95 },
                    nu: 4.0,
                },
            }],
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn tickers(&self) -> Vec<String> {
        (1..=self.assets)
            .map(|i| format!("{}{:02}", self.ticker_prefix, i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets < 2 {
            return Err(Error::Config("need at least 2 assets".into()));
        }
        if self.periods < 2 {
            return Err(Error::Config("need at least 2 periods".into()));
        }
        if !(self.dcc_c >= 0.0 && self.dcc_d >= 0.0 && self.dcc_c + self.dcc_d < 1.0) {
            return Err(Error::Config(format!(
                "DCC loadings ({}, {}) must be >= 0 with sum < 1",
                self.dcc_c, self.dcc_d
            )));
        }
        self.margin
            .validate()
            .map_err(|e| Error::Config(format!("margin: {e}")))?;
        for r in std::iter::once(&self.base).chain(self.blocks.iter().map(|b| &b.regime)) {
            if !(r.nu > 2.0) {
                return Err(Error::Config(format!("copula shape {} must be > 2", r.nu)));
            }
            r.structure
                .matrix(self.assets)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut blocks = self.blocks.clone();
        blocks.sort_by_key(|b| b.start);
        for b in &blocks {
            if b.start >= b.end || b.end > self.periods {
                return Err(Error::Config(format!(
                    "block {}..{} outside 0..{}",
                    b.start, b.end, self.periods
                )));
            }
        }
        if blocks.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::Config("blocks overlap".into()));
        }
        if let Some(idx) = &self.index_ticker {
            if self.tickers().contains(idx) {
                return Err(Error::Config(format!("index ticker {idx} clashes with an asset name")));
            }
        }
        Ok(())
    }

    /// Regime in force at period `t`.
    pub fn regime_at(&self, t: usize) -> &Regime {
        self.blocks
            .iter()
            .find(|b| b.start <= t && t < b.end)
            .map_or(&self.base, |b| &b.regime)
    }

    /// Return dates, one week apart after `start_date`.
    pub fn dates(&self) -> Vec<NaiveDate> {
        (1..=self.periods)
            .map(|i| self.start_date + chrono::Duration::weeks(i as i64))
            .collect()
    }
}

/// DCC Student-t copula sampler with a per-draw target and shape.
pub struct DccCopulaSampler {
    c: f64,
    d: f64,
    q: Option<DMatrix<f64>>,
    prev_scores: DVector<f64>,
}

impl DccCopulaSampler {
    pub fn new(c: f64, d: f64) -> Self {
        DccCopulaSampler {
            c,
            d,
            q: None,
            prev_scores: DVector::zeros(0),
        }
    }

    /// One vector of uniforms. The first draw uses `Q_1 = target`.
    pub fn draw<R: Rng>(&mut self, target: &DMatrix<f64>, nu: f64, rng: &mut R) -> Result<Vec<f64>> {
        let k = target.nrows();
        let q = match self.q.take() {
            None => target.clone(),
            Some(prev) => {
                let z = &self.prev_scores;
                target * (1.0 - self.c - self.d) + (z * z.transpose()) * self.c + prev * self.d
            }
        };
        let diag = DVector::from_fn(k, |i, _| 1.0 / q[(i, i)].sqrt());
        let r = DMatrix::from_fn(k, k, |i, j| q[(i, j)] * diag[i] * diag[j]);
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("conditional correlation not positive definite".into()))?;
        let e = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        let chi = ChiSquared::new(nu).map_err(|e| Error::domain("nu", e.to_string()))?;
        let w = (chi.sample(rng) / nu).sqrt();
        let x = chol.l() * e / w;
        self.prev_scores = &x * ((nu - 2.0) / nu).sqrt();
        self.q = Some(q);
        Ok(x.iter()
            .map(|v| t_cdf(*v, nu).clamp(PIT_CLAMP, 1.0 - PIT_CLAMP))
            .collect())
    }
}

/// ARMA(1,1)-GARCH(1,1) recursion driven by given innovation uniforms.
pub struct MarginSampler {
    params: ArmaGarchParams,
    dist: SkewT,
    h: f64,
    y: f64,
    r: f64,
}

impl MarginSampler {
    pub fn new(params: ArmaGarchParams) -> Result<Self> {
        params.validate()?;
        Ok(MarginSampler {
            dist: SkewT::new(params.nu, params.xi)?,
            h: params.unconditional_variance(),
            y: 0.0,
            r: params.unconditional_mean(),
            params,
        })
    }

    pub fn step(&mut self, u: f64, first: bool) -> Result<f64> {
        let p = &self.params;
        if !first {
            self.h = p.omega + p.alpha * self.y * self.y + p.beta * self.h;
        }
        let mu = p.mu0 + p.ar * self.r + p.ma * self.y;
        self.y = self.h.sqrt() * self.dist.quantile(u)?;
        self.r = mu + self.y;
        Ok(self.r)
    }
}

/// Simulate `n` returns from a single ARMA-GARCH-skew-t margin.
pub fn simulate_arma_garch(params: &ArmaGarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MarginSampler::new(*params)?;
    (0..n)
        .map(|t| {
            let u: f64 = rng.random_range(PIT_CLAMP..1.0 - PIT_CLAMP);
            m.step(u, t == 0)
        })
        .collect()
}

/// Simulate `n` uniform pairs from a bivariate DCC Student-t copula.
pub fn simulate_copula_pair(qbar: f64, c: f64, d: f64, nu: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = Structure::Equicorrelation { rho: qbar }.matrix(2)?;
    let mut sampler = DccCopulaSampler::new(c, d);
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for _ in 0..n {
        let u = sampler.draw(&target, nu, &mut rng)?;
        u1.push(u[0]);
        u2.push(u[1]);
    }
    Ok((u1, u2))
}

/// Simulated log returns for the scenario.
pub fn simulate_returns(spec: &ScenarioSpec, seed: u64) -> Result<ReturnPanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.assets;
    let base = spec.base.structure.matrix(k)?;
    let blocks: Vec<DMatrix<f64>> = spec
        .blocks
        .iter()
        .map(|b| b.regime.structure.matrix(k))
        .collect::<Result<_>>()?;
    let target_at = |t: usize| -> (&DMatrix<f64>, f64) {
        match spec.blocks.iter().position(|b| b.start <= t && t < b.end) {
            Some(i) => (&blocks[i], spec.blocks[i].regime.nu),
            None => (&base, spec.base.nu),
        }
    };

    let mut copula = DccCopulaSampler::new(spec.dcc_c, spec.dcc_d);
    let mut margins = (0..k)
        .map(|_| MarginSampler::new(spec.margin))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(spec.periods);
    for t in 0..spec.periods {
        let (target, nu) = target_at(t);
        let u = copula.draw(target, nu, &mut rng)?;
        let mut row = margins
            .iter_mut()
            .zip(&u)
            .map(|(m, &ui)| m.step(ui, t == 0))
            .collect::<Result<Vec<_>>>()?;
        if spec.index_ticker.is_some() {
            row.push(row.iter().sum::<f64>() / k as f64);
        }
        values.push(row);
    }
    let mut tickers = spec.tickers();
    tickers.extend(spec.index_ticker.iter().cloned());
    ReturnPanel::new(spec.dates(), tickers, values)
}

/// Simulated prices, starting at 100 on `start_date`.
pub fn simulate_panel(spec: &ScenarioSpec, seed: u64) -> Result<PricePanel> {
    cumulative_prices(&simulate_returns(spec, seed)?, spec.start_date, 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_targets() {
        let m = Structure::Path { rho: 0.5 }.matrix(4).unwrap();
        assert_eq!(m[(0, 3)], 0.125);
        let m = Structure::DoubleStar { rho: 0.9 }.matrix(6).unwrap();
        // 2 hangs off hub 0, 3 off hub 1
        assert!((m[(2, 0)] - 0.9).abs() < 1e-15);
        assert!((m[(2, 1)] - 0.81).abs() < 1e-15);
        assert!((m[(2, 4)] - 0.81).abs() < 1e-15);
        assert!((m[(2, 3)] - 0.729).abs() < 1e-15);
        for s in [
            Structure::Star { rho: 0.95 },
            Structure::DoubleStar { rho: 0.95 },
            Structure::Path { rho: -0.9 },
            Structure::Equicorrelation { rho: 0.3 },
        ] {
            assert!(s.matrix(10).unwrap().cholesky().is_some());
        }
        assert!(Structure::Equicorrelation { rho: -0.5 }.matrix(4).is_err());
    }

    #[test]
    fn seeded_panels_repeat() {
        let mut spec = ScenarioSpec {
            periods: 80,
            ..ScenarioSpec::default()
        };
        spec.blocks[0].start = 20;
        spec.blocks[0].end = 60;
        let a = simulate_panel(&spec, 9).unwrap();
        let b = simulate_panel(&spec, 9).unwrap();
        let c = simulate_panel(&spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.values.len(), 81);
        assert_eq!(a.tickers.len(), 11);
        assert_eq!(a.tickers[10], "INDEX");
        assert!(a.values.iter().flatten().all(|p| p.is_finite() && *p > 0.0));
    }

    #[test]
    fn spec_validation() {
        let mut s = ScenarioSpec::default();
        s.blocks[0].end = 400;
        assert!(s.validate().is_err());
        let s = ScenarioSpec {
            dcc_d: 0.99,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let mut s = ScenarioSpec::default();
        s.base.nu = 2.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let spec = ScenarioSpec::default();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(ScenarioSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn copula_draws_have_target_rank_correlation() {
        let (u1, u2) = simulate_copula_pair(0.6, 0.0, 0.0, 8.0, 20_000, 1).unwrap();
        // Kendall's tau of an elliptical copula: 2 asin(rho) / pi
        let tau_target = 2.0 * 0.6f64.asin() / std::f64::consts::PI;
        let n = 2000;
        let mut concordant = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                let s = (u1[i] - u1[j]) * (u2[i] - u2[j]);
                concordant += if s > 0.0 { 1 } else { -1 };
            }
        }
        let tau = concordant as f64 / (n * (n - 1) / 2) as f64;
        assert!((tau - tau_target).abs() < 0.03, "{tau} vs {tau_target}");
    }

    #[test]
    fn margin_sampler_matches_unconditional_variance() {
        let p = ArmaGarchParams {
            mu0: 0.0,
            ar: 0.0,
            ma: 0.0,
            omega: 0.1,
            alpha: 0.05,
            beta: 0.85,
            nu: 8.0,
            xi: 1.0,
        };
        let r = simulate_arma_garch(&p, 200_000, 4).unwrap();
        let var = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }
}
