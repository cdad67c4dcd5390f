use nsvh::analytic_su::{cdf, option_price, pdf, quantile};
use nsvh::calibrate::model_normal_vol;
use nsvh::mc::{price_option_mc, DrawMode, McConfig};
use nsvh::sabr_normal::{bachelier_price, hagan_normal_vol, implied_normal_vol};
use nsvh::{Params, Params32};
use proptest::prelude::*;

fn swaption(lambda: f64) -> Params {
    Params::from_mean(0.00609, 0.22196, 0.0158, lambda, 0.030673, 10.0).unwrap()
}

#[test]
fn su_put_call_parity() {
    let p = swaption(1.0);
    for off in [-0.02, -0.005, 0.0, 0.01, 0.03] {
        let k = p.mean() + off;
        let c = option_price(k, true, &p).unwrap();
        let q = option_price(k, false, &p).unwrap();
        assert!((c - q - (p.mean() - k)).abs() < 1e-15, "offset {off}");
    }
}

#[test]
fn su_price_is_integral_of_tail() {
    // d/dK put(K) = cdf(K), so a finite difference of prices recovers the cdf
    let p = swaption(1.0);
    for off in [-0.01, 0.0, 0.02] {
        let k = p.mean() + off;
        let h = 1e-6;
        let fd = (option_price(k + h, false, &p).unwrap() - option_price(k - h, false, &p).unwrap()) / (2.0 * h);
        assert!((fd - cdf(k, &p).unwrap()).abs() < 1e-7);
    }
}

#[test]
fn su_density_integrates_to_one() {
    let p = swaption(1.0);
    let (lo, hi) = (quantile(1e-12, &p).unwrap(), quantile(1.0 - 1e-12, &p).unwrap());
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..n).map(|i| pdf(lo + (i as f64 + 0.5) * h, &p).unwrap() * h).sum();
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn mc_matches_su_prices() {
    let p = swaption(1.0);
    let cfg = McConfig::new(41, 100, DrawMode::Paired);
    for off in [-0.01, 0.0, 0.01] {
        let k = p.mean() + off;
        let ana = option_price(k, true, &p).unwrap();
        let mc = price_option_mc(&p, k, true, 400_000, &cfg).unwrap();
        assert!(
            (mc.value - ana).abs() < 4.0 * mc.std_err,
            "offset {off}: {} ± {} vs {ana}",
            mc.value,
            mc.std_err
        );
    }
}

#[test]
fn hagan_vol_reprices_through_bachelier() {
    let p = Params::new(0.00691, 0.22372, 0.01697, 0.0, 0.030673, 10.0).unwrap();
    for off in [-0.02, 0.0, 0.02] {
        let k = p.f0() + off;
        let v = hagan_normal_vol(&p, k).unwrap();
        let price = bachelier_price(p.f0(), k, v, 10.0, off > 0.0);
        let back = implied_normal_vol(price, p.f0(), k, 10.0, off > 0.0).unwrap();
        assert!((back - v).abs() < 1e-12 * v);
        assert_eq!(model_normal_vol(&p, k).unwrap(), v);
    }
}

#[test]
fn f32_tracks_f64() {
    let p64 = swaption(1.0);
    let p32 = Params32::new(
        p64.sigma0() as f32,
        p64.alpha() as f32,
        p64.rho() as f32,
        1.0,
        p64.f0() as f32,
        10.0,
    )
    .unwrap();
    for off in [-0.01f64, 0.0, 0.01] {
        let k = p64.mean() + off;
        let a = option_price(k, true, &p64).unwrap();
        let b = option_price(k as f32, true, &p32).unwrap() as f64;
        assert!((a - b).abs() < 1e-4 * a.abs().max(1e-3), "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn su_prices_are_convex_and_bounded(
        alpha in 0.05f64..1.5,
        rho in -0.9f64..0.9,
        off_a in -0.03f64..0.03,
        width in 1e-4f64..0.01,
    ) {
        let p = Params::from_mean(0.01, alpha, rho, 1.0, 0.03, 1.0).unwrap();
        let k = p.mean() + off_a;
        let (lo, mid, hi) = (
            option_price(k - width, true, &p).unwrap(),
            option_price(k, true, &p).unwrap(),
            option_price(k + width, true, &p).unwrap(),
        );
        prop_assert!(lo >= mid && mid >= hi);
        prop_assert!(lo + hi - 2.0 * mid >= -1e-15);
        prop_assert!(mid >= (p.mean() - k).max(0.0) - 1e-15);
    }
}
