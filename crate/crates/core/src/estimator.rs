//! The Orey-index estimator from one trajectory, plug-in confidence
//! intervals, and the strong-consistency scaled statistic.
//!
//! From a path sampled at 2n + 1 points,
//!
//!   gamma_hat = 1/2 - ln(V_2n / V_n) / (2 ln 2),
//!
//! where both V statistics are raw (unnormalized) sums of squared second
//! differences and the level-n differences come from the downsampled path.
//! The scale of the path cancels in the ratio, so gamma_hat is scale-free.

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::kernels::CovarianceModel;
use crate::pathgen::GridPath;
use crate::quadvar::{raw_second_diffs, vstat};
use crate::stats::inv_norm_cdf;

/// Point estimate with the raw V statistics and optional confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateResult {
    pub gamma_hat: f64,
    /// Base level n; the path had 2n + 1 points.
    pub n: usize,
    pub v_n: f64,
    pub v_2n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_used: Option<f64>,
}

fn gamma_from_vstats(v_n: f64, v_2n: f64) -> f64 {
    0.5 - (v_2n / v_n).ln() / (2.0 * std::f64::consts::LN_2)
}

/// Estimate the Orey index from a single trajectory with 2n + 1 points.
pub fn gamma_hat(path: &GridPath) -> Result<EstimateResult> {
    if !path.n.is_multiple_of(2) || path.n < 8 {
        return Err(Error::Domain(format!(
            "estimation needs a path with 2n + 1 points, n >= 4; got grid count {}",
            path.n
        )));
    }
    let n = path.n / 2;
    let v_2n = vstat(&raw_second_diffs(&path.values));
    let coarse = path.downsample()?;
    let v_n = vstat(&raw_second_diffs(&coarse.values));
    if !(v_n > 0.0 && v_2n > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "V statistics must be strictly positive, got V_n = {v_n}, V_2n = {v_2n}"
        )));
    }
    Ok(EstimateResult {
        gamma_hat: gamma_from_vstats(v_n, v_2n),
        n,
        v_n,
        v_2n,
        ci_level: None,
        ci_low: None,
        ci_high: None,
        sigma_used: None,
    })
}

/// Plug-in confidence interval
/// gamma_hat +- z_(1+level)/2 sigma(gamma_hat) / (2 ln 2 sqrt(n)).
///
/// The variance is evaluated at the point estimate; estimates outside
/// (0.01, 0.99) refuse the sigma evaluation and the interval is omitted.
pub fn confidence_interval(result: &EstimateResult, level: f64) -> Result<(f64, f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level = {level} must lie in (0, 1)")));
    }
    let g = result.gamma_hat;
    if !(g > 0.01 && g < 0.99) {
        return Err(Error::CiRefused { gamma_hat: g });
    }
    let sigma = asymptotics::sigma_gamma_sq(g)?.sqrt();
    let z = inv_norm_cdf(0.5 * (1.0 + level));
    let half = z * sigma / (2.0 * std::f64::consts::LN_2 * (result.n as f64).sqrt());
    Ok((g - half, g + half, sigma))
}

/// Attach a confidence interval to the result in place.
pub fn with_confidence(result: &mut EstimateResult, level: f64) -> Result<()> {
    let (low, high, sigma) = confidence_interval(result, level)?;
    result.ci_level = Some(level);
    result.ci_low = Some(low);
    result.ci_high = Some(high);
    result.sigma_used = Some(sigma);
    Ok(())
}

/// The scaled quadratic variation diagnostic and its almost-sure limit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScaledQv {
    /// (n/T)^(2 gamma - 1) sum_k (D_k X)^2 at the path's own resolution.
    pub value: f64,
    /// kappa^2 (4 - 2^2gamma) T.
    pub limit: f64,
}

/// Consistency diagnostic: the scaled sum of squared raw second differences,
/// which converges almost surely to kappa^2 (4 - 2^2gamma) T.
pub fn scaled_qv(model: &CovarianceModel, path: &GridPath) -> Result<ScaledQv> {
    let (gamma, kappa) = model.orey_metadata()?;
    let t = path.horizon;
    let n = path.n as f64;
    let sum = vstat(&raw_second_diffs(&path.values));
    Ok(ScaledQv {
        value: (n / t).powf(2.0 * gamma - 1.0) * sum,
        limit: kappa * kappa * (4.0 - (2.0 * gamma).exp2()) * t,
    })
}
