use proptest::prelude::*;
use rayon::prelude::*;
use tailnet::margins::*;
use tailnet::simulate::simulate_arma_garch;

fn truth() -> ArmaGarchParams {
    ArmaGarchParams {
        mu0: 0.02,
        ar: 0.1,
        ma: -0.05,
        omega: 0.05,
        alpha: 0.10,
        beta: 0.85,
        nu: 6.0,
        xi: 0.9,
    }
}

#[test]
fn recovers_garch_parameters() {
    let r = simulate_arma_garch(&truth(), 2000, 11).unwrap();
    let fit = fit_arma_garch(&r).unwrap();
    let p = fit.params;
    assert!((p.alpha - 0.10).abs() <= 0.08, "alpha {}", p.alpha);
    assert!((p.beta - 0.85).abs() <= 0.08, "beta {}", p.beta);
    assert!((p.persistence() - 0.95).abs() <= 0.05, "alpha+beta {}", p.persistence());
    assert!(p.persistence() < 1.0);
}

#[test]
fn white_noise_has_low_persistence() {
    let noise = ArmaGarchParams {
        mu0: 0.0,
        ar: 0.0,
        ma: 0.0,
        omega: 1.0,
        alpha: 0.0,
        beta: 0.0,
        nu: 6.0,
        xi: 0.9,
    };
    let r = simulate_arma_garch(&noise, 2000, 4).unwrap();
    let fit = fit_arma_garch(&r).unwrap();
    assert!(fit.params.persistence() < 0.2, "{:?}", fit.params);
}

#[test]
fn constant_series_is_rejected() {
    assert!(fit_arma_garch(&[0.01; 200]).is_err());
    assert!(fit_arma_garch(&[0.01, 0.02]).is_err());
}

#[test]
fn reported_loglik_matches_reevaluation() {
    let r = simulate_arma_garch(&truth(), 800, 3).unwrap();
    let fit = fit_arma_garch(&r).unwrap();
    let again = loglik(&fit.params, &r).unwrap();
    assert!(
        (fit.loglik - again).abs() <= 1e-8 * (1.0 + again.abs()),
        "{} vs {again}",
        fit.loglik
    );
    let filtered = garch_filter(&fit.params, &r, Presample::default()).unwrap();
    for (a, b) in filtered.cond_var.iter().zip(&fit.cond_var) {
        assert!((a - b).abs() <= 1e-10 * b.abs());
    }
}

#[test]
fn pit_passes_ks_in_most_replications() {
    let t = 2000;
    let crit = 1.36 / (t as f64).sqrt();
    let passes: usize = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let r = simulate_arma_garch(&truth(), t, 1000 + seed).unwrap();
            let fit = fit_arma_garch(&r).unwrap();
            usize::from(pit_uniformity_check(&fit) < crit)
        })
        .sum();
    assert!(passes >= 45, "{passes}/50 below the 5% critical value");
}

#[test]
fn ks_statistic_trivial_cases() {
    assert!((ks_uniform(&[0.5; 40]) - 0.5).abs() < 1e-12);
    let n = 250;
    let grid: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    assert!((ks_uniform(&grid) - 0.5 / n as f64).abs() < 1e-12);
}

#[test]
fn gradient_matches_central_differences() {
    let r = simulate_arma_garch(&truth(), 500, 8).unwrap();
    let obj = MarginObjective::new(&r);
    let theta = [0.01, 0.2, -0.1, -2.0, 0.3, -0.4, 0.5, -0.1];
    let (_, grad) = obj.neg_loglik_grad(&theta);
    for i in 0..theta.len() {
        let h = 1e-5 * (1.0 + theta[i].abs());
        let mut up = theta;
        let mut dn = theta;
        up[i] += h;
        dn[i] -= h;
        let fd = (obj.neg_loglik(&up) - obj.neg_loglik(&dn)) / (2.0 * h);
        let scale = grad[i].abs().max(1e-3);
        assert!(
            (grad[i] - fd).abs() / scale < 1e-4,
            "coordinate {i}: {} vs {fd}",
            grad[i]
        );
    }
}

#[test]
fn skewt_cdf_quantile_round_trip() {
    let d = SkewT::new(5.0, 1.3).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=100 {
        let p = i as f64 / 101.0;
        let x = d.quantile(p).unwrap();
        assert!(x > prev);
        prev = x;
        assert!((d.cdf(x) - p).abs() < 1e-8);
        let y = -4.0 + 8.0 * i as f64 / 100.0;
        assert!((d.quantile(d.cdf(y)).unwrap() - y).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn skewt_cdf_is_increasing(nu in 2.5f64..40.0, xi in 0.5f64..2.0, a in -6.0f64..6.0, gap in 1e-3f64..2.0) {
        let d = SkewT::new(nu, xi).unwrap();
        prop_assert!(d.cdf(a + gap) > d.cdf(a));
    }

    #[test]
    fn filter_variance_stays_positive(
        alpha in 0.0f64..0.3,
        beta in 0.0f64..0.69,
        r in prop::collection::vec(-10.0f64..10.0, 10..80),
    ) {
        let p = ArmaGarchParams { alpha, beta, ..truth() };
        let f = garch_filter(&p, &r, Presample::default()).unwrap();
        prop_assert!(f.cond_var.iter().all(|h| *h > 0.0 && h.is_finite()));
    }
}
