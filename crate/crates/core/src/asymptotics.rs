//! Closed-form limiting covariance of the scaled V statistics and the
//! estimator variance, via truncated series with certified tail bounds.
//!
//! For an fBm limit with index gamma,
//!
//!   Sigma11 = 2 (1 + 2 (4 - 2^2g)^-2 sum_{j>=1} rho_hat^2(j)),
//!   Sigma12 = 2^-2g (4 - 2^2g)^-2 sum_{j in Z} rho_tilde^2(j),
//!   Sigma22 = Sigma11 / 2,
//!   sigma_gamma^2 = 3/2 Sigma11 - 2 Sigma12,
//!
//! where rho_hat and rho_tilde are the one-level and cross-level correlation
//! functions of second differences. Both decay like j^(2g-4); the tails
//! |rho_hat(j)| <= 9 (4-2^2g) j^(2g-4) (j >= 3) and
//! |rho_tilde(j)| <= 26 (4-2^2g) j^(2g-4) (|j| >= 4) certify truncation.
//!
//! Direct evaluation of either function cancels catastrophically for large j
//! (five or seven terms of size j^2g collapsing to O(j^(2g-4))), so beyond a
//! small index the even-order binomial series is used instead; it is exact to
//! machine precision and has no cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::abs_pow;

/// Default certified truncation tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Truncation cap on the series length.
pub const MAX_TRUNCATION: u64 = 10_000_000;

/// Index at which evaluation switches from the closed form to the series.
const SERIES_SWITCH: u64 = 8;

fn rho_hat_direct(gamma: f64, j: f64) -> f64 {
    let p = 2.0 * gamma;
    0.5 * (-6.0 * abs_pow(j, p) - abs_pow(j - 2.0, p) - abs_pow(j + 2.0, p)
        + 4.0 * abs_pow(j - 1.0, p)
        + 4.0 * abs_pow(j + 1.0, p))
}

fn rho_tilde_direct(gamma: f64, j: f64) -> f64 {
    let p = 2.0 * gamma;
    0.5 * (abs_pow(j + 1.0, p) + 2.0 * abs_pow(j + 2.0, p) - abs_pow(j + 3.0, p)
        + abs_pow(j - 1.0, p)
        - 4.0 * abs_pow(j, p)
        - abs_pow(j - 3.0, p)
        + 2.0 * abs_pow(j - 2.0, p))
}

/// Cancellation-free evaluation for large arguments. The five-term stencil of
/// x^2g expands into an even-order binomial series whose odd moments vanish:
/// rho_hat(j) = sum_{m>=4 even} binom(2g, m) (4 - 2^m) j^(2g-m), and
/// rho_tilde(j) uses stencil moments 2^(m+2) + 2 - 2*3^m (halved).
fn stencil_series(gamma: f64, j: f64, moment: impl Fn(u32) -> f64) -> f64 {
    let a = 2.0 * gamma;
    // binom(a, 4)
    let mut binom = a * (a - 1.0) * (a - 2.0) * (a - 3.0) / 24.0;
    let mut jp = j.powf(a - 4.0);
    let inv_j2 = 1.0 / (j * j);
    let mut acc = 0.0;
    let mut m = 4u32;
    while m <= 400 {
        let term = binom * moment(m) * jp;
        acc += term;
        if term.abs() <= 1e-18 * acc.abs() {
            break;
        }
        binom *= (a - m as f64) / (m as f64 + 1.0) * (a - m as f64 - 1.0) / (m as f64 + 2.0);
        jp *= inv_j2;
        m += 2;
    }
    acc
}

/// One-level second-difference correlation of fBm:
/// rho_hat(j) = [-6|j|^2g - |j-2|^2g - |j+2|^2g + 4|j-1|^2g + 4|j+1|^2g] / 2.
pub fn rho_hat(gamma: f64, j: u64) -> f64 {
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    if j < SERIES_SWITCH {
        rho_hat_direct(gamma, j as f64)
    } else {
        stencil_series(gamma, j as f64, |m| 4.0 - (m as f64).exp2())
    }
}

/// Cross-level second-difference correlation of fBm (symmetric in j):
/// rho_tilde(j) = [|j+1|^2g + 2|j+2|^2g - |j+3|^2g + |j-1|^2g - 4|j|^2g
///                 - |j-3|^2g + 2|j-2|^2g] / 2.
pub fn rho_tilde(gamma: f64, j: i64) -> f64 {
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    if j.unsigned_abs() < SERIES_SWITCH {
        rho_tilde_direct(gamma, j as f64)
    } else {
        stencil_series(gamma, j.unsigned_abs() as f64, |m| {
            0.5 * ((m as f64 + 2.0).exp2() + 2.0 - 2.0 * 3f64.powi(m as i32))
        })
    }
}

/// The limiting covariance of the bivariate scaled V statistic and the
/// estimator variance, with the certified truncation parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AsymptoticCovariance {
    pub gamma: f64,
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma22: f64,
    pub sigma_gamma_sq: f64,
    /// Series truncation index J.
    pub truncation_j: u64,
    /// Analytic bound on the truncation error of Sigma11 and Sigma12.
    pub tail_bound: f64,
}

impl AsymptoticCovariance {
    /// 2x2 matrix [[Sigma11, Sigma12], [Sigma12, Sigma22]].
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.sigma11, self.sigma12], [self.sigma12, self.sigma22]]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (1, 1) => self.sigma11,
            (2, 2) => self.sigma22,
            _ => self.sigma12,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    Ok(())
}

/// Truncation index such that the analytic tail bound is below `tol`.
///
/// The squared-tail sum sum_{j>J} j^(4g-8) is bounded by the integral
/// (J-1)^(4g-7) / (7-4g); the Sigma11 tail carries the factor 4 * 81 and the
/// two-sided Sigma12 tail carries 2^(1-2g) * 2 * 676.
fn truncation_index(gamma: f64, tol: f64) -> Result<(u64, f64)> {
    // Sigma11 tail: 2 * 2 (4-2^2g)^-2 sum_{j>J} rho_hat^2 <= 4 * 81 * S(J).
    let c11: f64 = 4.0 * 81.0;
    // Sigma12 tail (both signs): 2^-2g (4-2^2g)^-2 * 2 * 676 (4-2^2g)^2 S(J).
    let c12 = (1.0 - 2.0 * gamma).exp2() * 676.0;
    let c = c11.max(c12);
    let expo = 7.0 - 4.0 * gamma;
    let s = |j: u64| ((j - 1) as f64).powf(-expo) / expo;
    // (J-1) > (C / (tol * (7-4g)))^(1/(7-4g))
    let j_min = (c / (tol * expo)).powf(1.0 / expo).ceil() as u64 + 2;
    let j = j_min.max(4);
    if j > MAX_TRUNCATION {
        return Err(Error::Truncation {
            required: j,
            cap: MAX_TRUNCATION,
        });
    }
    Ok((j, c * s(j)))
}

/// Exact asymptotic covariance at `gamma`, truncated so the analytic tail
/// bound is below `tol`. Summation order is fixed: ascending j, with the
/// Sigma12 sum taken pairwise over +-j.
pub fn sigma_matrix(gamma: f64, tol: f64) -> Result<AsymptoticCovariance> {
    check_gamma(gamma)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let (truncation_j, tail_bound) = truncation_index(gamma, tol)?;
    let denom = 4.0 - (2.0 * gamma).exp2();
    let denom_sq = denom * denom;

    let mut hat_sq = 0.0;
    for j in 1..=truncation_j {
        let r = rho_hat(gamma, j);
        hat_sq += r * r;
    }
    let sigma11 = 2.0 * (1.0 + 2.0 * hat_sq / denom_sq);

    let r0 = rho_tilde(gamma, 0);
    let mut tilde_sq = r0 * r0;
    for j in 1..=truncation_j {
        let rp = rho_tilde(gamma, j as i64);
        let rm = rho_tilde(gamma, -(j as i64));
        tilde_sq += rp * rp + rm * rm;
    }
    let sigma12 = (-2.0 * gamma).exp2() * tilde_sq / denom_sq;

    let sigma22 = sigma11 / 2.0;
    Ok(AsymptoticCovariance {
        gamma,
        sigma11,
        sigma12,
        sigma22,
        sigma_gamma_sq: 1.5 * sigma11 - 2.0 * sigma12,
        truncation_j,
        tail_bound,
    })
}

/// Estimator variance sigma_gamma^2 = 3/2 Sigma11 - 2 Sigma12 at the default
/// tolerance.
pub fn sigma_gamma_sq(gamma: f64) -> Result<f64> {
    Ok(sigma_matrix(gamma, DEFAULT_TOL)?.sigma_gamma_sq)
}
