//! Distributional correctness of the path generators: empirical Gram
//! matrices against the analytic kernels, and cross-generator agreement of
//! the V statistics.

use orey_core::pathgen::{simulate, simulate_cholesky, simulate_fbm_circulant};
use orey_core::quadvar::{coefficients, normalized_second_diffs, vstat, Level, NormalizationMode};
use orey_core::stats;
use orey_core::CovarianceModel;

/// Empirical Gram matrix over replications vs the analytic one, entrywise
/// within 5 standard errors (known-mean covariance estimator).
fn gram_check(model: &CovarianceModel, seed: u64) {
    let n = 16;
    let reps = 5000;
    let mut paths = Vec::with_capacity(reps);
    for r in 0..reps {
        paths.push(simulate(model, n, seed ^ r as u64).unwrap());
    }
    let h = model.horizon() / n as f64;
    for i in 1..=n {
        for j in i..=n {
            let target = model.cov(i as f64 * h, j as f64 * h).unwrap();
            let mut acc = 0.0;
            for p in &paths {
                acc += p.values[i] * p.values[j];
            }
            let emp = acc / reps as f64;
            let var_ij = model.cov(i as f64 * h, i as f64 * h).unwrap()
                * model.cov(j as f64 * h, j as f64 * h).unwrap()
                + target * target;
            let se = (var_ij / reps as f64).sqrt();
            assert!(
                (emp - target).abs() < 5.0 * se,
                "{:?} entry ({i},{j}): {emp} vs {target} (se {se})",
                model.family()
            );
        }
    }
}

#[test]
fn fbm_gram_matches_kernel() {
    for gamma in [0.3, 0.5, 0.7] {
        gram_check(&CovarianceModel::fbm(gamma).unwrap(), 10_101);
    }
}

#[test]
fn sfbm_gram_matches_kernel() {
    for h in [0.3, 0.5, 0.7] {
        gram_check(&CovarianceModel::sfbm(h).unwrap(), 20_202);
    }
}

#[test]
fn bifbm_gram_matches_kernel() {
    for (h, k) in [(0.6, 0.5), (0.5, 0.6), (0.7, 0.5)] {
        gram_check(&CovarianceModel::bifbm(h, k).unwrap(), 30_303);
    }
}

#[test]
fn cholesky_and_circulant_fbm_agree_on_v_statistics() {
    // Mean and variance of the Orey-normalized V statistic agree within 4 SE
    // between the two exact fBm generators.
    let gamma = 0.7;
    let n = 32;
    let reps = 4000;
    let model = CovarianceModel::fbm(gamma).unwrap();
    let set = coefficients(&model, n, NormalizationMode::Orey).unwrap();
    let var_v = set.isserlis_var(Level::N);

    let collect = |use_cholesky: bool, seed: u64| -> Vec<f64> {
        (0..reps)
            .map(|r| {
                let path = if use_cholesky {
                    simulate_cholesky(&model, n, seed ^ r as u64).unwrap()
                } else {
                    simulate_fbm_circulant(gamma, n, 1.0, seed ^ r as u64).unwrap()
                };
                let diffs =
                    normalized_second_diffs(&model, &path, NormalizationMode::Orey).unwrap();
                vstat(&diffs)
            })
            .collect()
    };
    let chol = collect(true, 111);
    let circ = collect(false, 222);

    let se_mean = (var_v / reps as f64).sqrt() * std::f64::consts::SQRT_2;
    assert!(
        (stats::mean(&chol) - stats::mean(&circ)).abs() < 4.0 * se_mean,
        "means: {} vs {}",
        stats::mean(&chol),
        stats::mean(&circ)
    );
    let se_var = var_v * (2.0 / reps as f64).sqrt() * 2.0 * std::f64::consts::SQRT_2;
    assert!(
        (stats::variance(&chol) - stats::variance(&circ)).abs() < 4.0 * se_var,
        "variances: {} vs {}",
        stats::variance(&chol),
        stats::variance(&circ)
    );
}

#[test]
fn bivariate_clt_for_brownian_motion() {
    // gamma = 1/2, n = 1024, 500 replications: empirical covariance of the
    // scaled V pair within 15% of [[3, 0.75], [0.75, 1.5]].
    use orey_core::montecarlo::{run_bivariate, McConfig, McStatistic};
    let model = CovarianceModel::fbm(0.5).unwrap();
    let cfg = McConfig::new(model, 1024, 500, 2024, McStatistic::BivariateV);
    let report = run_bivariate(&cfg).unwrap();
    assert_eq!(report.target[0][0], 3.0);
    assert_eq!(report.target[0][1], 0.75);
    assert_eq!(report.target[1][1], 1.5);
    for i in 0..2 {
        for j in 0..2 {
            assert!(
                report.relative_error[i][j] < 0.15,
                "entry ({i},{j}): {} vs {}",
                report.covariance[i][j],
                report.target[i][j]
            );
        }
    }
}
