use serde::{Deserialize, Serialize};

use crate::error::{NsvhError, Result};
use crate::scalar::Real;

/// Largest accepted integrated log-vol variance `S = alpha^2 T`.
///
/// The fourth-moment formulas contain `e^{6S}`-sized terms; beyond this they
/// overflow or lose all precision.
pub const MAX_S_VAR: f64 = 50.0;

/// Full NSVh parameter set for one asset and horizon.
///
/// Invariants are checked in [`NsvhParams::new`]; every other module relies on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct NsvhParams<T> {
    sigma0: T,
    alpha: T,
    rho: T,
    lambda: T,
    f0: T,
    t_expiry: T,
}

/// Wire form: exactly one of `f0` and `mean` (the expected terminal price).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams<T> {
    sigma0: T,
    alpha: T,
    rho: T,
    lambda: T,
    f0: Option<T>,
    mean: Option<T>,
    t_expiry: T,
}

impl<T: Real> TryFrom<RawParams<T>> for NsvhParams<T> {
    type Error = NsvhError;

    fn try_from(raw: RawParams<T>) -> Result<Self> {
        match (raw.f0, raw.mean) {
            (Some(f0), None) => NsvhParams::new(raw.sigma0, raw.alpha, raw.rho, raw.lambda, f0, raw.t_expiry),
            (None, Some(mean)) => NsvhParams::from_mean(raw.sigma0, raw.alpha, raw.rho, raw.lambda, mean, raw.t_expiry),
            (Some(_), Some(_)) => Err(NsvhError::param("f0", "give either f0 or mean, not both")),
            (None, None) => Err(NsvhError::param("f0", "missing: give f0 or mean")),
        }
    }
}

fn finite<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(NsvhError::param(name, format!("must be finite, got {v}")))
    }
}

impl<T: Real> NsvhParams<T> {
    pub fn new(sigma0: T, alpha: T, rho: T, lambda: T, f0: T, t_expiry: T) -> Result<Self> {
        finite("sigma0", sigma0)?;
        finite("alpha", alpha)?;
        finite("rho", rho)?;
        finite("lambda", lambda)?;
        finite("f0", f0)?;
        finite("t_expiry", t_expiry)?;
        if sigma0 <= T::zero() {
            return Err(NsvhError::param("sigma0", format!("must be > 0, got {sigma0}")));
        }
        if alpha < T::zero() {
            return Err(NsvhError::param("alpha", format!("must be >= 0, got {alpha}")));
        }
        if rho.abs() > T::one() {
            return Err(NsvhError::param("rho", format!("must lie in [-1, 1], got {rho}")));
        }
        if t_expiry <= T::zero() {
            return Err(NsvhError::param("t_expiry", format!("must be > 0, got {t_expiry}")));
        }
        let s = alpha * alpha * t_expiry;
        if s > T::lit(MAX_S_VAR) {
            return Err(NsvhError::param(
                "alpha",
                format!("alpha^2 T = {s} exceeds the supported maximum {MAX_S_VAR}"),
            ));
        }
        Ok(Self {
            sigma0,
            alpha,
            rho,
            lambda,
            f0,
            t_expiry,
        })
    }

    /// Builds the parameter set from the expected terminal price instead of `f0`.
    pub fn from_mean(sigma0: T, alpha: T, rho: T, lambda: T, mean: T, t_expiry: T) -> Result<Self> {
        let probe = Self::new(sigma0, alpha, rho, lambda, T::zero(), t_expiry)?;
        let drift = probe.mean();
        Self::new(sigma0, alpha, rho, lambda, mean - drift, t_expiry)
    }

    pub fn sigma0(&self) -> T {
        self.sigma0
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn f0(&self) -> T {
        self.f0
    }

    pub fn t_expiry(&self) -> T {
        self.t_expiry
    }

    /// Integrated log-vol variance `S = alpha^2 T`.
    pub fn s_var(&self) -> T {
        self.alpha * self.alpha * self.t_expiry
    }

    /// `sqrt(1 - rho^2)`.
    pub fn rho_star(&self) -> T {
        ((T::one() - self.rho) * (T::one() + self.rho)).max(T::zero()).sqrt()
    }

    /// `w = e^S`.
    pub fn w(&self) -> T {
        self.s_var().exp()
    }

    /// Expected terminal price `f0 + (sigma0 rho / alpha)(e^{lambda S / 2} - 1)`.
    ///
    /// Exactly `f0` when `rho = 0`, `lambda = 0` or `alpha = 0`.
    pub fn mean(&self) -> T {
        if self.alpha == T::zero() {
            return self.f0;
        }
        let growth = (self.lambda * self.s_var() * T::lit(0.5)).exp_m1();
        self.f0 + self.sigma0 * self.rho * growth / self.alpha
    }

    /// Price scale `sigma0 / alpha` between canonical and original units.
    pub fn scale(&self) -> T {
        self.sigma0 / self.alpha
    }

    pub fn canonical(&self) -> CanonicalParams<T> {
        CanonicalParams {
            s_var: self.s_var(),
            rho: self.rho,
            lambda: self.lambda,
        }
    }

    /// Same model with a different drift parameter; `f0` is kept.
    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(self.sigma0, self.alpha, self.rho, lambda, self.f0, self.t_expiry)
    }
}

/// Dimensionless `(S, rho, lambda)` form of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams<T> {
    pub s_var: T,
    pub rho: T,
    pub lambda: T,
}

impl<T: Real> CanonicalParams<T> {
    pub fn new(s_var: T, rho: T, lambda: T) -> Result<Self> {
        if !(s_var >= T::zero()) || s_var > T::lit(MAX_S_VAR) {
            return Err(NsvhError::param(
                "s_var",
                format!("must lie in [0, {MAX_S_VAR}], got {s_var}"),
            ));
        }
        if !(rho.abs() <= T::one()) {
            return Err(NsvhError::param("rho", format!("must lie in [-1, 1], got {rho}")));
        }
        finite("lambda", lambda)?;
        Ok(Self { s_var, rho, lambda })
    }

    pub fn w(&self) -> T {
        self.s_var.exp()
    }

    pub fn rho_star(&self) -> T {
        ((T::one() - self.rho) * (T::one() + self.rho)).max(T::zero()).sqrt()
    }

    /// Restores dimensions; `alpha = sqrt(S / t_expiry)`.
    pub fn to_params(&self, sigma0: T, f0: T, t_expiry: T) -> Result<NsvhParams<T>> {
        if !(t_expiry > T::zero()) {
            return Err(NsvhError::param("t_expiry", "must be > 0"));
        }
        let alpha = (self.s_var / t_expiry).sqrt();
        NsvhParams::new(sigma0, alpha, self.rho, self.lambda, f0, t_expiry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sigma0: f64, alpha: f64, rho: f64, lambda: f64) -> NsvhParams<f64> {
        NsvhParams::new(sigma0, alpha, rho, lambda, 0.03, 10.0).unwrap()
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(NsvhParams::new(0.0, 0.2, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(NsvhParams::new(0.01, -0.2, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(NsvhParams::new(0.01, 0.2, 1.01, 0.0, 0.0, 1.0).is_err());
        assert!(NsvhParams::new(0.01, 0.2, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(NsvhParams::new(0.01, 0.2, 0.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(NsvhParams::new(0.01, 8.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(NsvhParams::new(0.01, 0.2, -1.0, 0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn mean_limits() {
        assert_eq!(p(0.01, 0.3, 0.0, 1.0).mean(), 0.03);
        assert_eq!(p(0.01, 0.3, 0.4, 0.0).mean(), 0.03);
        assert_eq!(p(0.01, 0.0, 0.4, 1.0).mean(), 0.03);
        // small alpha: sigma0 rho lambda alpha T / 2
        let q = p(0.01, 1e-7, 0.5, 1.0);
        let lead = 0.01 * 0.5 * 1.0 * 1e-7 * 10.0 / 2.0;
        assert!(((q.mean() - 0.03) - lead).abs() < 1e-6 * lead);
        let r = p(0.01, 0.3, 0.5, 1.0);
        let direct = 0.03 + 0.01 * 0.5 / 0.3 * ((0.9_f64 / 2.0).exp() - 1.0);
        assert!((r.mean() - direct).abs() < 1e-15);
    }

    #[test]
    fn from_mean_round_trip() {
        let q = NsvhParams::<f64>::from_mean(0.00609, 0.22196, 0.0158, 1.0, 0.030673, 10.0).unwrap();
        assert!((q.mean() - 0.030673).abs() < 1e-16);
        assert!(q.f0() < q.mean());
    }

    #[test]
    fn canonical_bijection() {
        let q = p(0.007, 0.22, -0.3, 0.5);
        let c = q.canonical();
        assert!((c.s_var - 0.22 * 0.22 * 10.0).abs() < 1e-15);
        let back = c.to_params(q.sigma0(), q.f0(), q.t_expiry()).unwrap();
        assert!((back.alpha() - q.alpha()).abs() < 1e-15);
        assert_eq!(back.rho(), q.rho());
        assert!(c.w() >= 1.0);
    }

    #[test]
    fn serde_validates() {
        let ok: NsvhParams<f64> =
            serde_json::from_str(r#"{"sigma0":0.01,"alpha":0.2,"rho":0.1,"lambda":1,"f0":0.03,"t_expiry":1}"#).unwrap();
        assert_eq!(ok.lambda(), 1.0);
        let bad: std::result::Result<NsvhParams<f64>, _> =
            serde_json::from_str(r#"{"sigma0":-0.01,"alpha":0.2,"rho":0.1,"lambda":1,"f0":0.03,"t_expiry":1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn serde_mean_alternative() {
        let p: NsvhParams<f64> = serde_json::from_str(
            r#"{"sigma0":0.00609,"alpha":0.22196,"rho":0.0158,"lambda":1,"mean":0.030673,"t_expiry":10}"#,
        )
        .unwrap();
        assert!((p.mean() - 0.030673).abs() < 1e-15);
        let both: std::result::Result<NsvhParams<f64>, _> = serde_json::from_str(
            r#"{"sigma0":0.01,"alpha":0.2,"rho":0.1,"lambda":1,"f0":0.03,"mean":0.03,"t_expiry":1}"#,
        );
        assert!(both.is_err());
        let text = serde_json::to_string(&p).unwrap();
        let back: NsvhParams<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
