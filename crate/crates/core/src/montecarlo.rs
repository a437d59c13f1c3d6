//! Seeded replication harness validating the bivariate CLT for the V
//! statistics and the asymptotic normality of the Orey-index estimator.
//!
//! Replications are embarrassingly parallel: replication r draws from the
//! stream keyed by `seed ^ r`, and aggregation runs in replication order, so
//! reports are bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::estimator;
use crate::kernels::CovarianceModel;
use crate::pathgen::simulate;
use crate::quadvar::{bivariate_normalized_diffs, expected_vhat, vstat, NormalizationMode};
use crate::stats::{covariance, ks_pvalue, ks_statistic, mean, norm_cdf, variance};

use crate::conditions::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McStatistic {
    BivariateV,
    GammaHat,
}

/// Replication plan for one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub model: CovarianceModel,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub statistic: McStatistic,
    /// Confidence level used for the coverage diagnostic of gamma_hat runs.
    pub ci_level: f64,
    /// Keep per-replication samples in the report.
    pub keep_samples: bool,
}

impl McConfig {
    pub fn new(
        model: CovarianceModel,
        n: usize,
        replications: usize,
        seed: u64,
        statistic: McStatistic,
    ) -> Self {
        Self {
            model,
            n,
            replications,
            seed,
            statistic,
            ci_level: 0.95,
            keep_samples: false,
        }
    }
}

/// Kolmogorov-Smirnov summary of one standardized marginal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

fn ks_verdict(p: f64, replications: usize) -> Verdict {
    if replications < 100 {
        // Too few replications for any normality verdict.
        Verdict::Inconclusive
    } else if p > 0.01 {
        Verdict::Pass
    } else if p < 0.001 {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub model: String,
    pub statistic: McStatistic,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub gamma_true: f64,
    /// Empirical mean of the statistic vector.
    pub mean: Vec<f64>,
    /// Empirical covariance (sample, n-1 denominator).
    pub covariance: Vec<Vec<f64>>,
    /// Limiting covariance the run is validated against.
    pub target: Vec<Vec<f64>>,
    /// |empirical - target| / |target| entrywise.
    pub relative_error: Vec<Vec<f64>>,
    /// KS normality of each standardized marginal.
    pub ks: Vec<KsResult>,
    /// Fraction of replications whose confidence interval covered gamma
    /// (gamma_hat runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

fn check_config(cfg: &McConfig) -> Result<()> {
    if cfg.replications == 0 {
        return Err(Error::Domain("replication count must be positive".into()));
    }
    if cfg.n < 4 {
        return Err(Error::Domain(format!("n = {} must be at least 4", cfg.n)));
    }
    Ok(())
}

/// Validate the bivariate CLT: the empirical covariance of
/// sqrt(n) (n^-1 (V_n - E V_n), (2n)^-1 (V_2n - E V_2n)) against Sigma.
pub fn run_bivariate(cfg: &McConfig) -> Result<McReport> {
    check_config(cfg)?;
    let (gamma, _) = cfg.model.orey_metadata()?;
    let sigma = asymptotics::sigma_matrix(gamma, asymptotics::DEFAULT_TOL)?;
    let n = cfg.n;
    let ev_n = expected_vhat(&cfg.model, n, NormalizationMode::Orey)?;
    let ev_2n = expected_vhat(&cfg.model, 2 * n, NormalizationMode::Orey)?;
    let sqrt_n = (n as f64).sqrt();

    let stats: Result<Vec<[f64; 2]>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let path = simulate(&cfg.model, 2 * n, cfg.seed ^ r as u64)?;
            let (dn, d2n) = bivariate_normalized_diffs(&cfg.model, &path, NormalizationMode::Orey)?;
            Ok([
                sqrt_n * (vstat(&dn) - ev_n) / n as f64,
                sqrt_n * (vstat(&d2n) - ev_2n) / (2.0 * n as f64),
            ])
        })
        .collect();
    let stats = stats?;

    let first: Vec<f64> = stats.iter().map(|s| s[0]).collect();
    let second: Vec<f64> = stats.iter().map(|s| s[1]).collect();
    let emp = [
        [variance(&first), covariance(&first, &second)],
        [covariance(&first, &second), variance(&second)],
    ];
    let target = sigma.matrix();
    let ks: Vec<KsResult> = [(&first, target[0][0]), (&second, target[1][1])]
        .into_iter()
        .map(|(xs, var)| {
            let sd = var.sqrt();
            let d = ks_statistic(xs, |x| norm_cdf(x / sd));
            let p = ks_pvalue(d, xs.len());
            KsResult {
                distance: d,
                p_value: p,
                verdict: ks_verdict(p, cfg.replications),
            }
        })
        .collect();

    Ok(McReport {
        model: cfg.model.spec_string().unwrap_or_else(|| "custom".into()),
        statistic: McStatistic::BivariateV,
        n,
        replications: cfg.replications,
        seed: cfg.seed,
        gamma_true: gamma,
        mean: vec![mean(&first), mean(&second)],
        covariance: emp.iter().map(|r| r.to_vec()).collect(),
        target: target.iter().map(|r| r.to_vec()).collect(),
        relative_error: emp
            .iter()
            .zip(&target)
            .map(|(er, tr)| {
                er.iter()
                    .zip(tr)
                    .map(|(e, t)| (e - t).abs() / t.abs())
                    .collect()
            })
            .collect(),
        ks,
        coverage: None,
        samples: cfg
            .keep_samples
            .then(|| stats.iter().map(|s| s.to_vec()).collect()),
    })
}

/// Validate the estimator CLT: 2 ln2 sqrt(n) (gamma_hat - gamma) against
/// N(0, sigma_gamma^2), with plug-in confidence-interval coverage.
pub fn run_gamma_hat(cfg: &McConfig) -> Result<McReport> {
    check_config(cfg)?;
    let (gamma, _) = cfg.model.orey_metadata()?;
    let sigma_sq = asymptotics::sigma_gamma_sq(gamma)?;
    let n = cfg.n;
    let scale = 2.0 * std::f64::consts::LN_2 * (n as f64).sqrt();

    let results: Result<Vec<(f64, f64, bool)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let path = simulate(&cfg.model, 2 * n, cfg.seed ^ r as u64)?;
            let est = estimator::gamma_hat(&path)?;
            let err = scale * (est.gamma_hat - gamma);
            let covered = match estimator::confidence_interval(&est, cfg.ci_level) {
                Ok((low, high, _)) => low <= gamma && gamma <= high,
                Err(_) => false,
            };
            Ok((est.gamma_hat, err, covered))
        })
        .collect();
    let results = results?;

    let gammas: Vec<f64> = results.iter().map(|r| r.0).collect();
    let errs: Vec<f64> = results.iter().map(|r| r.1).collect();
    let covered = results.iter().filter(|r| r.2).count();

    let sd = sigma_sq.sqrt();
    let d = ks_statistic(&errs, |x| norm_cdf(x / sd));
    let p = ks_pvalue(d, errs.len());

    Ok(McReport {
        model: cfg.model.spec_string().unwrap_or_else(|| "custom".into()),
        statistic: McStatistic::GammaHat,
        n,
        replications: cfg.replications,
        seed: cfg.seed,
        gamma_true: gamma,
        mean: vec![mean(&gammas)],
        covariance: vec![vec![variance(&errs)]],
        target: vec![vec![sigma_sq]],
        relative_error: vec![vec![(variance(&errs) - sigma_sq).abs() / sigma_sq]],
        ks: vec![KsResult {
            distance: d,
            p_value: p,
            verdict: ks_verdict(p, cfg.replications),
        }],
        coverage: Some(covered as f64 / cfg.replications as f64),
        samples: cfg
            .keep_samples
            .then(|| results.iter().map(|(g, e, _)| vec![*g, *e]).collect()),
    })
}

/// Dispatch on the configured statistic.
pub fn run(cfg: &McConfig) -> Result<McReport> {
    match cfg.statistic {
        McStatistic::BivariateV => run_bivariate(cfg),
        McStatistic::GammaHat => run_gamma_hat(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(statistic: McStatistic) -> McConfig {
        let model = CovarianceModel::fbm(0.5).unwrap();
        McConfig::new(model, 128, 200, 42, statistic)
    }

    #[test]
    fn bivariate_fbm_half_sanity() {
        let report = run_bivariate(&quick_cfg(McStatistic::BivariateV)).unwrap();
        assert_eq!(report.target[0][0], 3.0);
        assert_eq!(report.target[0][1], 0.75);
        // Loose sanity band at modest replication count.
        assert!(
            report.relative_error[0][0] < 0.35,
            "{:?}",
            report.covariance
        );
        // Mean vector near zero: 4 standard errors of each marginal mean.
        for (i, m) in report.mean.iter().enumerate() {
            let se = (report.target[i][i] / report.replications as f64).sqrt();
            assert!(m.abs() < 4.0 * se, "mean[{i}] = {m}");
        }
    }

    #[test]
    fn gamma_hat_run_centers_on_gamma() {
        let report = run_gamma_hat(&quick_cfg(McStatistic::GammaHat)).unwrap();
        let se = (report.target[0][0].sqrt()
            / (2.0 * std::f64::consts::LN_2 * (report.n as f64).sqrt()))
            / (report.replications as f64).sqrt();
        assert!(
            (report.mean[0] - 0.5).abs() < 3.0 * se + 0.01,
            "mean {:?}",
            report.mean
        );
        assert!(report.coverage.unwrap() > 0.85);
    }

    #[test]
    fn same_seed_bit_identical_report() {
        let a = run(&quick_cfg(McStatistic::BivariateV)).unwrap();
        let b = run(&quick_cfg(McStatistic::BivariateV)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn report_identical_for_one_and_eight_workers() {
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run(&quick_cfg(McStatistic::GammaHat)).unwrap())
        };
        let a = run_in_pool(1);
        let b = run_in_pool(8);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn few_replications_give_inconclusive_normality() {
        let mut cfg = quick_cfg(McStatistic::GammaHat);
        cfg.replications = 50;
        let report = run(&cfg).unwrap();
        assert_eq!(report.ks[0].verdict, Verdict::Inconclusive);
    }

    #[test]
    fn ks_verdict_bands() {
        assert_eq!(ks_verdict(0.5, 500), Verdict::Pass);
        assert_eq!(ks_verdict(0.005, 500), Verdict::Inconclusive);
        assert_eq!(ks_verdict(0.0005, 500), Verdict::Fail);
        assert_eq!(ks_verdict(0.5, 50), Verdict::Inconclusive);
    }

    #[test]
    fn bias_shrinks_as_n_doubles() {
        let model = CovarianceModel::sfbm(0.7).unwrap();
        let bias_at = |n: usize| {
            let cfg = McConfig::new(model.clone(), n, 200, 7, McStatistic::GammaHat);
            let report = run_gamma_hat(&cfg).unwrap();
            (report.mean[0] - 0.7).abs()
        };
        let b1 = bias_at(1024);
        let b2 = bias_at(4096);
        assert!(b2 < b1 + 0.002, "bias did not shrink: {b1} -> {b2}");
    }

    #[test]
    fn samples_persist_when_requested() {
        let mut cfg = quick_cfg(McStatistic::BivariateV);
        cfg.keep_samples = true;
        cfg.replications = 120;
        let report = run(&cfg).unwrap();
        assert_eq!(report.samples.as_ref().unwrap().len(), 120);
        assert_eq!(report.samples.as_ref().unwrap()[0].len(), 2);
    }
}
