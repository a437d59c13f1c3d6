//! Closed-form covariance kernels for the built-in Gaussian process families.
//!
//! Three families are built in, each zero at the origin and self-similar:
//!
//! * fBm:    E X_s X_t = (s^2g + t^2g - |s-t|^2g) / 2
//! * sfBm:   E X_s X_t = s^2H + t^2H - ((s+t)^2H + |s-t|^2H) / 2
//! * bifBm:  E X_s X_t = ((s^2H + t^2H)^K - |s-t|^2HK) / 2^K
//!
//! Every model carries its Orey index `gamma` and the normalizing constant
//! `kappa` such that the incremental variance satisfies
//! sigma^2(t, t+h) / (kappa^2 h^2gamma) -> 1 as h -> 0.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// |x|^p with the x = 0 case pinned to exactly 0.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p)
    }
}

/// Covariance callable for user-supplied models.
pub type CovFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The process family and its parameters.
#[derive(Clone)]
pub enum Family {
    /// Fractional Brownian motion with Hurst (= Orey) index `gamma` in (0,1).
    Fbm { gamma: f64 },
    /// Subfractional Brownian motion with parameter `h` in (0,1).
    Sfbm { h: f64 },
    /// Bifractional Brownian motion with `h` in (0,1), `k` in (0,1].
    Bifbm { h: f64, k: f64 },
    /// User-supplied covariance; Orey metadata must be declared, never inferred.
    Custom {
        cov: CovFn,
        gamma: Option<f64>,
        kappa: Option<f64>,
    },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Fbm { gamma } => write!(f, "Fbm {{ gamma: {gamma} }}"),
            Family::Sfbm { h } => write!(f, "Sfbm {{ h: {h} }}"),
            Family::Bifbm { h, k } => write!(f, "Bifbm {{ h: {h}, k: {k} }}"),
            Family::Custom { gamma, kappa, .. } => {
                write!(f, "Custom {{ gamma: {gamma:?}, kappa: {kappa:?} }}")
            }
        }
    }
}

/// A named Gaussian process family with parameters and horizon.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    family: Family,
    horizon: f64,
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")))
    }
}

impl CovarianceModel {
    /// fBm with Hurst index `gamma`, horizon 1.
    pub fn fbm(gamma: f64) -> Result<Self> {
        check_unit_open("gamma", gamma)?;
        Ok(Self {
            family: Family::Fbm { gamma },
            horizon: 1.0,
        })
    }

    /// sfBm with parameter `h`, horizon 1.
    pub fn sfbm(h: f64) -> Result<Self> {
        check_unit_open("H", h)?;
        Ok(Self {
            family: Family::Sfbm { h },
            horizon: 1.0,
        })
    }

    /// bifBm with parameters `h` in (0,1) and `k` in (0,1], horizon 1.
    pub fn bifbm(h: f64, k: f64) -> Result<Self> {
        check_unit_open("H", h)?;
        if !(k.is_finite() && k > 0.0 && k <= 1.0) {
            return Err(Error::Domain(format!("K = {k} must lie in (0, 1]")));
        }
        Ok(Self {
            family: Family::Bifbm { h, k },
            horizon: 1.0,
        })
    }

    /// Custom covariance with explicitly declared Orey metadata (or none).
    pub fn custom(cov: CovFn, gamma: Option<f64>, kappa: Option<f64>) -> Result<Self> {
        if let Some(g) = gamma {
            check_unit_open("gamma", g)?;
        }
        if let Some(k) = kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Domain(format!("kappa = {k} must be positive")));
            }
        }
        Ok(Self {
            family: Family::Custom { cov, gamma, kappa },
            horizon: 1.0,
        })
    }

    /// Replace the horizon T (default 1).
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!(
                "horizon T = {horizon} must be positive"
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Exact covariance E X_s X_t.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0 && s <= self.horizon && t <= self.horizon) {
            return Err(Error::Domain(format!(
                "cov arguments (s, t) = ({s}, {t}) outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.cov_unchecked(s, t))
    }

    /// Covariance without the range check; grid code validates once up front.
    pub(crate) fn cov_unchecked(&self, s: f64, t: f64) -> f64 {
        match &self.family {
            Family::Fbm { gamma } => {
                if s == 0.0 || t == 0.0 {
                    return 0.0;
                }
                let p = 2.0 * gamma;
                0.5 * (abs_pow(s, p) + abs_pow(t, p) - abs_pow(t - s, p))
            }
            Family::Sfbm { h } => {
                if s == 0.0 || t == 0.0 {
                    return 0.0;
                }
                let p = 2.0 * h;
                abs_pow(s, p) + abs_pow(t, p) - 0.5 * (abs_pow(s + t, p) + abs_pow(t - s, p))
            }
            Family::Bifbm { h, k } => {
                if s == 0.0 || t == 0.0 {
                    return 0.0;
                }
                let p = 2.0 * h;
                let base = abs_pow(s, p) + abs_pow(t, p);
                (base.powf(*k) - abs_pow(t - s, p * k)) * (-k).exp2()
            }
            Family::Custom { cov, .. } => cov(s, t),
        }
    }

    /// Incremental variance E (X_t - X_s)^2 for 0 <= s <= t <= T.
    pub fn incremental_variance(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!(
                "incremental_variance requires s <= t, got ({s}, {t})"
            )));
        }
        let v = self.cov(t, t)? - 2.0 * self.cov(s, t)? + self.cov(s, s)?;
        if v < -1e-12 {
            return Err(Error::NumericalConsistency(format!(
                "incremental variance at ({s}, {t}) is {v}, below -1e-12"
            )));
        }
        Ok(v.max(0.0))
    }

    /// Orey index gamma and normalizing constant kappa.
    ///
    /// fBm: (gamma, 1); sfBm: (H, 1); bifBm: (HK, 2^((1-K)/2)).
    /// Custom models must have declared both explicitly.
    pub fn orey_metadata(&self) -> Result<(f64, f64)> {
        match &self.family {
            Family::Fbm { gamma } => Ok((*gamma, 1.0)),
            Family::Sfbm { h } => Ok((*h, 1.0)),
            Family::Bifbm { h, k } => Ok((h * k, ((1.0 - k) / 2.0).exp2())),
            Family::Custom { gamma, kappa, .. } => match (gamma, kappa) {
                (Some(g), Some(kap)) => Ok((*g, *kap)),
                _ => Err(Error::MissingMetadata(
                    "custom model did not declare orey_gamma and kappa".into(),
                )),
            },
        }
    }

    /// Parse a model specification string: `fbm:gamma=0.7`, `sfbm:H=0.7`,
    /// `bifbm:H=0.6,K=0.5`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Domain(format!("unknown model spec `{spec}`: {msg}"));
        let (family, rest) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected `family:key=value[,...]`"))?;
        let mut params = std::collections::BTreeMap::new();
        for part in rest.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad("expected key=value parameters"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(&format!("parameter `{key}` is not a number")))?;
            params.insert(key.trim().to_string(), value);
        }
        let take = |params: &mut std::collections::BTreeMap<String, f64>, key: &str| {
            params
                .remove(key)
                .ok_or_else(|| bad(&format!("missing parameter `{key}`")))
        };
        let model = match family.trim() {
            "fbm" => Self::fbm(take(&mut params, "gamma")?)?,
            "sfbm" => Self::sfbm(take(&mut params, "H")?)?,
            "bifbm" => {
                let h = take(&mut params, "H")?;
                let k = take(&mut params, "K")?;
                Self::bifbm(h, k)?
            }
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        if let Some(key) = params.keys().next() {
            return Err(bad(&format!("unexpected parameter `{key}`")));
        }
        Ok(model)
    }

    /// Specification string for built-in families; `None` for custom models.
    pub fn spec_string(&self) -> Option<String> {
        match &self.family {
            Family::Fbm { gamma } => Some(format!("fbm:gamma={gamma}")),
            Family::Sfbm { h } => Some(format!("sfbm:H={h}")),
            Family::Bifbm { h, k } => Some(format!("bifbm:H={h},K={k}")),
            Family::Custom { .. } => None,
        }
    }
}
