//! Special functions shared by every model module: the stabilized `(e^{ks} - 1)/k`
//! ratio, the hyperbolic radius transform `phi`, and the standard normal
//! density, distribution and quantile functions.
//!
//! Everything here is generic over [`Real`]; constants and polynomial
//! coefficients are carried as `f64` and converted on use.

use crate::error::{NsvhError, Result};
use crate::scalar::{horner, Real};

/// Below this `|k s|` the ratio is evaluated by its Taylor series.
const EXP_RATIO_SERIES_SWITCH: f64 = 1e-5;

/// `(e^{k s} - 1) / k`, continuous through `k = 0` where it equals `s`.
///
/// Every `(w^{k} - 1)/k` term of the moment formulas goes through here, which
/// removes the singularities at `lambda = -1, -3, -5`.
pub fn stable_exp_ratio<T: Real>(k: T, s: T) -> T {
    let ks = k * s;
    if ks.abs() < T::lit(EXP_RATIO_SERIES_SWITCH) {
        s * (T::one() + ks * T::lit(0.5) + ks * ks / T::lit(6.0))
    } else {
        ks.exp_m1() / k
    }
}

/// Euclidean radius of a point of hyperbolic 3-space at signed height `z`
/// (log of the vertical coordinate) and hyperbolic distance `d` from `(0, 0, 1)`:
///
/// ```text
/// phi(z, d) = e^{z/2} sqrt(2 cosh d - 2 cosh z)
/// ```
///
/// The radicand is evaluated as `4 sinh((d+z)/2) sinh((d-z)/2)`, which has no
/// cancellation when `d` is close to `|z|`.
pub fn phi<T: Real>(z: T, d: T) -> Result<T> {
    let tol = T::lit(1e-12) * (T::one() + z.abs());
    if !(d >= z.abs() - tol) {
        return Err(NsvhError::Domain(format!(
            "phi requires d >= |z|, got z = {z}, d = {d}"
        )));
    }
    Ok(phi_clamped(z, d))
}

/// [`phi`] without the domain check; a negative radicand is clamped to zero.
#[inline]
pub(crate) fn phi_clamped<T: Real>(z: T, d: T) -> T {
    let half = T::lit(0.5);
    let radicand = ((d + z) * half).sinh() * ((d - z) * half).sinh();
    T::lit(2.0) * (z * half).exp() * radicand.max(T::zero()).sqrt()
}

/// [`phi`] at `d = sqrt(r_sq + z^2)`, with `d - |z| = r_sq / (d + |z|)` so
/// small radii keep full relative precision.
#[inline]
pub(crate) fn phi_radial<T: Real>(z: T, r_sq: T) -> T {
    let half = T::lit(0.5);
    let az = z.abs();
    let d = (r_sq + z * z).sqrt();
    let gap = if d + az > T::zero() { r_sq / (d + az) } else { T::zero() };
    let radicand = ((d + az) * half).sinh() * (gap * half).sinh();
    T::lit(2.0) * (z * half).exp() * radicand.sqrt()
}

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Real>(x: T) -> T {
    (-(x * x) * T::lit(0.5)).exp() / T::lit(2.5066282746310002)
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(-x * T::FRAC_1_SQRT_2())
}

/// Upper tail `1 - N(x)`, accurate in relative terms for large positive `x`.
#[inline]
pub fn norm_sf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(x * T::FRAC_1_SQRT_2())
}

/// Standard normal quantile: Wichura's AS 241 rational approximation followed
/// by one Halley correction against [`norm_cdf`].
pub fn norm_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(NsvhError::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    let x = as241(p);
    if !x.is_finite() {
        return Ok(x);
    }
    // Residual taken on the tail nearer to p to keep relative accuracy.
    let err = if x > T::zero() {
        (T::one() - p) - norm_sf(x)
    } else {
        norm_cdf(x) - p
    };
    let u = err * T::lit(2.5066282746310002) * (x * x * T::lit(0.5)).exp();
    Ok(x - u / (T::one() + x * u * T::lit(0.5)))
}

#[allow(clippy::excessive_precision)]
const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_6,
    133.141_667_891_784_38,
    1_971.590_950_306_551_3,
    13_731.693_765_509_461,
    45_921.953_931_549_87,
    67_265.770_927_008_7,
    33_430.575_583_588_13,
    2_509.080_928_730_122_7,
];
const AS241_B: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5_394.196_021_424_751,
    21_213.794_301_586_597,
    39_307.895_800_092_71,
    28_729.085_735_721_943,
    5_226.495_278_852_546,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_6,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_08,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_8e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_104,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    0.001_242_660_947_388_078_4,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    0.599_832_206_555_887_9,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

fn as241<T: Real>(p: T) -> T {
    let q = p - T::lit(0.5);
    if q.abs() <= T::lit(0.425) {
        let r = T::lit(0.180625) - q * q;
        return q * horner(&AS241_A, r) / horner(&AS241_B, r);
    }
    let tail = if q < T::zero() { p } else { T::one() - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= T::lit(5.0) {
        r = r - T::lit(1.6);
        horner(&AS241_C, r) / horner(&AS241_D, r)
    } else {
        r = r - T::lit(5.0);
        horner(&AS241_E, r) / horner(&AS241_F, r)
    };
    if q < T::zero() {
        -val
    } else {
        val
    }
}

// W. J. Cody's rational Chebyshev approximations (CALERF).
const CODY_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    113.864_154_151_050_16,
    377.485_237_685_302,
    3_209.377_589_138_469_4,
    0.185_777_706_184_603_15,
];
#[allow(clippy::excessive_precision)]
const CODY_B: [f64; 4] = [
    23.601_290_952_344_122,
    244.024_637_934_444_17,
    1_282.616_526_077_372_3,
    2_844.236_833_439_170_6,
];
const CODY_C: [f64; 9] = [
    0.564_188_496_988_670_1,
    8.883_149_794_388_377,
    66.119_190_637_141_63,
    298.635_138_197_400_1,
    881.952_221_241_769,
    1_712.047_612_634_070_6,
    2_051.078_377_826_071_6,
    1_230.339_354_797_997_2,
    2.153_115_354_744_038_5e-8,
];
const CODY_D: [f64; 8] = [
    15.744_926_110_709_835,
    117.693_950_891_312_5,
    537.181_101_862_009_9,
    1_621.389_574_566_690_2,
    3_290.799_235_733_46,
    4_362.619_090_143_247,
    3_439.367_674_143_721_6,
    1_230.339_354_803_749_5,
];
const CODY_P: [f64; 6] = [
    0.305_326_634_961_232_36,
    0.360_344_899_949_804_45,
    0.125_781_726_111_229_26,
    0.016_083_785_148_742_275,
    6.587_491_615_298_378e-4,
    0.016_315_387_137_302_097,
];
const CODY_Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_467_3,
    0.527_905_102_951_428_4,
    0.060_518_341_312_441_32,
    0.002_335_204_976_268_691_8,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    let y = x.abs();
    let result = if y <= T::lit(0.46875) {
        let ysq = y * y;
        let mut num = T::lit(CODY_A[4]) * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + T::lit(CODY_A[i])) * ysq;
            den = (den + T::lit(CODY_B[i])) * ysq;
        }
        let erf = x * (num + T::lit(CODY_A[3])) / (den + T::lit(CODY_B[3]));
        return T::one() - erf;
    } else if y <= T::lit(4.0) {
        let mut num = T::lit(CODY_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + T::lit(CODY_C[i])) * y;
            den = (den + T::lit(CODY_D[i])) * y;
        }
        gaussian_tail(y, (num + T::lit(CODY_C[7])) / (den + T::lit(CODY_D[7])))
    } else if y >= T::lit(26.543) {
        T::zero()
    } else {
        let ysq = T::one() / (y * y);
        let mut num = T::lit(CODY_P[5]) * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + T::lit(CODY_P[i])) * ysq;
            den = (den + T::lit(CODY_Q[i])) * ysq;
        }
        let r = ysq * (num + T::lit(CODY_P[4])) / (den + T::lit(CODY_Q[4]));
        gaussian_tail(y, (T::lit(FRAC_1_SQRT_PI) - r) / y)
    };
    if x < T::zero() {
        T::lit(2.0) - result
    } else {
        result
    }
}

/// `exp(-y^2) * r` with `y^2` split to keep the exponent exact.
#[inline]
fn gaussian_tail<T: Real>(y: T, r: T) -> T {
    let ysq = (y * T::lit(16.0)).trunc() / T::lit(16.0);
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values from 40-digit arbitrary-precision evaluation.
    const CDF_REF: [(f64, f64); 16] = [
        (-37.5, 4.605_353_009_581_955e-308),
        (-20.0, 2.753_624_118_606_233_7e-89),
        (-10.0, 7.619_853_024_160_526e-24),
        (-6.0, 9.865_876_450_376_981e-10),
        (-3.3, 4.834_241_423_837_775e-4),
        (-1.7, 0.044_565_462_758_543_04),
        (-0.5, 0.308_537_538_725_986_9),
        (-1e-3, 0.499_601_057_786_088_94),
        (0.0, 0.5),
        (0.25, 0.598_706_325_682_923_7),
        (0.47, 0.680_822_491_217_444_2),
        (1.0, 0.841_344_746_068_543),
        (2.2, 0.986_096_552_486_501_4),
        (4.0, 0.999_968_328_758_166_9),
        (5.9, 0.999_999_998_182_492_1),
        (8.3, 0.999_999_999_999_999_9),
    ];

    const QUANTILE_REF: [(f64, f64); 12] = [
        (1e-20, -9.262_340_089_798_408),
        (1e-9, -5.997_807_015_007_687),
        (1e-4, -3.719_016_485_455_680_6),
        (0.01, -2.326_347_874_040_841),
        (0.02425, -1.972_961_051_311_884_8),
        (0.05, -1.644_853_626_951_472_7),
        (0.3, -0.524_400_512_708_040_8),
        (0.5, 0.0),
        (0.7, 0.524_400_512_708_040_7),
        (0.975, 1.959_963_984_540_054),
        (0.999, 3.090_232_306_167_813),
        (0.999_999_999_999, 7.034_486_910_047_835),
    ];

    #[test]
    fn exp_ratio_examples() {
        assert_eq!(stable_exp_ratio(0.0, 2.0), 2.0);
        assert_eq!(stable_exp_ratio(1.0, 0.0), 0.0);
        let v: f64 = stable_exp_ratio(2.0, 1.0);
        assert!((v - 3.194_528_049_465_325).abs() < 1e-14);
    }

    #[test]
    fn exp_ratio_continuous_at_zero() {
        for &s in &[0.01, 0.5, 1.0, 5.0, 10.0] {
            for &k in &[1e-9, -1e-9] {
                let expect = s * (1.0 + s * k / 2.0);
                assert!((stable_exp_ratio::<f64>(k, s) - expect).abs() <= 1e-12 * s);
            }
        }
    }

    #[test]
    fn exp_ratio_relative_accuracy_across_switch() {
        // Oracle: sum of the exponential series, which converges without cancellation.
        let series = |k: f64, s: f64| {
            let x = k * s;
            let mut term = s;
            let mut sum = 0.0;
            for n in 1..60 {
                sum += term;
                term *= x / (n as f64 + 1.0);
            }
            sum
        };
        for &s in &[1e-3, 0.7, 3.0] {
            for &k in &[1e-7, -3e-6, 9e-6, 1.1e-5, -2e-5, 1e-3, -0.4] {
                let (a, b) = (stable_exp_ratio(k, s), series(k, s));
                assert!(((a - b) / b).abs() < 1e-13, "k={k} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(phi(1.3, 1.3).unwrap(), 0.0);
        let v: f64 = phi(0.0, 1.0).unwrap();
        assert!((v - 1.042_190_610_987_494_8).abs() < 1e-14);
        assert!(phi(0.5, 0.4).is_err());
        assert!(phi(-0.5, 0.4).is_err());
        // tiny negative radicand inside tolerance is clamped
        assert_eq!(phi(0.7, 0.7 - 1e-14).unwrap(), 0.0);
    }

    #[test]
    fn phi_matches_direct_radicand() {
        for &(z, d) in &[(0.3f64, 2.0f64), (-1.2, 1.5), (2.0, 3.5), (-0.01, 0.02)] {
            let direct = z.exp() * (2.0 * f64::cosh(d) - 2.0 * f64::cosh(z));
            let p: f64 = phi(z, d).unwrap();
            assert!((p * p - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn phi_radial_agrees_and_keeps_small_radii() {
        for &(z, r_sq) in &[(0.3f64, 1.7f64), (-1.2, 0.4), (2.0, 9.0), (0.0, 1.0)] {
            let d = (r_sq + z * z).sqrt();
            let a = phi_radial(z, r_sq);
            assert!((a - phi(z, d).unwrap()).abs() < 1e-14 * a);
        }
        // radius^2 -> e^z r_sq sinh(z)/z as r_sq -> 0
        let (z, r_sq) = (1.5f64, 1e-30);
        let expect = (z.exp() * r_sq * z.sinh() / z).sqrt();
        assert!((phi_radial(z, r_sq) - expect).abs() < 1e-12 * expect);
        assert_eq!(phi_radial(0.0f64, 0.0), 0.0);
    }

    #[test]
    fn norm_cdf_reference() {
        for &(x, want) in CDF_REF.iter() {
            let got: f64 = norm_cdf(x);
            assert!((got - want).abs() <= 1e-15, "x={x}: {got} vs {want}");
            if x < -1.0 {
                assert!(((got - want) / want).abs() < 1e-13, "relative at x={x}");
            }
        }
        assert_eq!(norm_cdf(0.0_f64), 0.5);
    }

    #[test]
    fn norm_quantile_reference() {
        for &(p, want) in QUANTILE_REF.iter() {
            let got: f64 = norm_quantile(p).unwrap();
            assert!((got - want).abs() <= 1e-9, "p={p}: {got} vs {want}");
            assert!((got - want).abs() <= 1e-13 * (1.0 + want.abs()));
        }
        assert_eq!(norm_quantile(0.5_f64).unwrap(), 0.0);
        assert!(norm_quantile(0.0_f64).is_err());
        assert!(norm_quantile(1.0_f64).is_err());
        assert!(norm_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let mut x = -6.0;
        while x <= 6.0 {
            let back: f64 = norm_quantile(norm_cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-8, "x={x} back={back}");
            x += 0.01;
        }
    }

    #[test]
    fn single_precision_path() {
        let c: f32 = norm_cdf(1.0_f32);
        assert!((c - 0.841_344_746).abs() < 1e-6);
        let q: f32 = norm_quantile(0.05_f32).unwrap();
        assert!((q + 1.644_853_6).abs() < 1e-5);
        let r: f32 = phi(0.0_f32, 1.0).unwrap();
        assert!((r - 1.042_190_6).abs() < 1e-6);
    }
}
