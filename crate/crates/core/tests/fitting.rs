use nsvh::analytic_su::sample;
use nsvh::moments::{central_moments, fit_normal_sabr, fit_nsvh, fit_su, percent_returns, sample_moments};
use nsvh::risk::{empirical_var_es, es_closed, risk_closed, var_closed, var_es_mc, QuantileRule};
use nsvh::{Moments, NsvhError, Params};
use proptest::prelude::*;

fn sp500_fit() -> Params {
    Params::from_mean(0.82538, 0.84587, -0.01725, 1.0, 0.0282, 1.0).unwrap()
}

#[test]
fn fit_recovers_parameters() {
    for lambda in [0.0, 0.3, 1.0] {
        let p = Params::from_mean(0.9, 0.7, -0.25, lambda, 0.05, 1.0).unwrap();
        let m = central_moments(&p);
        let q = fit_nsvh(&m, 1.0, lambda).unwrap();
        assert!((q.sigma0() - p.sigma0()).abs() < 1e-8, "lambda {lambda}");
        assert!((q.alpha() - p.alpha()).abs() < 1e-8, "lambda {lambda}");
        assert!((q.rho() - p.rho()).abs() < 1e-8, "lambda {lambda}");
        assert!((q.mean() - p.mean()).abs() < 1e-12);
    }
}

#[test]
fn named_fits_agree_with_general() {
    let m = Moments {
        mean: 0.03,
        mu2: 2.0,
        skew: -0.4,
        exkurt: 5.0,
    };
    for (a, b) in [
        (fit_normal_sabr(&m, 1.0).unwrap(), fit_nsvh(&m, 1.0, 0.0).unwrap()),
        (fit_su(&m, 1.0).unwrap(), fit_nsvh(&m, 1.0, 1.0).unwrap()),
    ] {
        assert_eq!(a.lambda(), b.lambda());
        assert!((a.sigma0() - b.sigma0()).abs() < 1e-12);
        assert!((a.alpha() - b.alpha()).abs() < 1e-12);
        assert!((a.rho() - b.rho()).abs() < 1e-12);
    }
}

#[test]
fn horizon_scales_alpha() {
    let m = Moments {
        mean: 0.0,
        mu2: 1.0,
        skew: 0.2,
        exkurt: 2.0,
    };
    let day = fit_nsvh(&m, 1.0, 1.0).unwrap();
    let year = fit_nsvh(&m, 250.0, 1.0).unwrap();
    assert!((day.s_var() - year.s_var()).abs() < 1e-12);
    assert!((year.alpha() * 250f64.sqrt() - day.alpha()).abs() < 1e-12);
}

#[test]
fn infeasible_and_degenerate_targets() {
    let thin = Moments {
        mean: 0.0,
        mu2: 1.0,
        skew: 0.0,
        exkurt: -0.5,
    };
    assert!(matches!(
        fit_nsvh(&thin, 1.0, 1.0),
        Err(NsvhError::InfeasibleMoments { .. })
    ));
    assert!(matches!(sample_moments(&[2.0; 10]), Err(NsvhError::ZeroVariance(_))));
    assert!(matches!(
        sample_moments(&[1.0, 2.0]),
        Err(NsvhError::InsufficientData(_))
    ));
    assert!(percent_returns(&[100.0, 0.0, 5.0]).is_err());
}

#[test]
fn sample_fit_converges_to_model() {
    let p = Params::from_mean(1.0, 0.5, -0.3, 1.0, 0.0, 1.0).unwrap();
    let xs = sample(&p, 2_000_000, 77).unwrap();
    let m = sample_moments(&xs).unwrap();
    let q = fit_su(&m, 1.0).unwrap();
    assert!((q.alpha() - p.alpha()).abs() < 0.03, "alpha {}", q.alpha());
    assert!((q.rho() - p.rho()).abs() < 0.05, "rho {}", q.rho());
}

#[test]
fn closed_risk_sp500() {
    let p = sp500_fit();
    let r = risk_closed(&p, 0.01).unwrap();
    assert!((r.var + 3.432).abs() < 5e-4 && (r.es + 4.820).abs() < 5e-4);
    let r = risk_closed(&p, 0.05).unwrap();
    assert!((r.var + 1.824).abs() < 5e-4 && (r.es + 2.872).abs() < 5e-4);
}

#[test]
fn mc_risk_brackets_closed_form() {
    let p = sp500_fit();
    let mc = var_es_mc(&p, 0.01, 1_000_000, 9).unwrap();
    let (se_var, se_es) = mc.std_err.unwrap();
    assert!((mc.var - var_closed(&p, 0.01).unwrap()).abs() < 4.0 * se_var);
    assert!((mc.es - es_closed(&p, 0.01).unwrap()).abs() < 4.0 * se_es);
}

#[test]
fn empirical_risk_on_model_sample() {
    let p = sp500_fit();
    let xs = sample(&p, 1_000_000, 3).unwrap();
    let r = empirical_var_es(&xs, 0.05, QuantileRule::Hazen).unwrap();
    assert!((r.var - var_closed(&p, 0.05).unwrap()).abs() < 0.01);
    assert!((r.es - es_closed(&p, 0.05).unwrap()).abs() < 0.01);
}

proptest! {
    #[test]
    fn es_below_var(p in 0.001f64..0.2, alpha in 0.05f64..1.2, rho in -0.8f64..0.8) {
        let params = Params::from_mean(1.0, alpha, rho, 1.0, 0.0, 1.0).unwrap();
        let var = var_closed(&params, p).unwrap();
        let es = es_closed(&params, p).unwrap();
        prop_assert!(es < var);
        prop_assert!(es > var_closed(&params, p * 1e-3).unwrap());
    }

    #[test]
    fn moment_fit_round_trip(alpha in 0.1f64..1.0, rho in -0.7f64..0.7, lambda in prop::sample::select(vec![0.0, 1.0])) {
        let p = Params::from_mean(1.0, alpha, rho, lambda, 0.0, 1.0).unwrap();
        let q = fit_nsvh(&central_moments(&p), 1.0, lambda).unwrap();
        prop_assert!((q.alpha() - alpha).abs() < 1e-7);
        prop_assert!((q.rho() - rho).abs() < 1e-7);
    }
}
