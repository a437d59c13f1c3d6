//! Property tests over random models, grids, and paths.

use proptest::prelude::*;

use orey_core::estimator::gamma_hat;
use orey_core::pathgen::{export_path, import_path, simulate_fbm_circulant, Generator, GridPath};
use orey_core::quadvar::{coefficients, raw_second_diffs, vstat, NormalizationMode};
use orey_core::CovarianceModel;

fn arb_model() -> impl Strategy<Value = CovarianceModel> {
    prop_oneof![
        (0.02f64..0.98).prop_map(|g| CovarianceModel::fbm(g).unwrap()),
        (0.02f64..0.98).prop_map(|h| CovarianceModel::sfbm(h).unwrap()),
        ((0.02f64..0.98), (0.05f64..=1.0)).prop_map(|(h, k)| CovarianceModel::bifbm(h, k).unwrap()),
    ]
}

/// Plain lower-triangular Cholesky used as an independent PSD certificate.
fn cholesky_succeeds(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_and_zero_at_origin(model in arb_model(),
                                                  s in 0.0f64..1.0,
                                                  t in 0.0f64..1.0) {
        let a = model.cov(s, t).unwrap();
        let b = model.cov(t, s).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
        prop_assert_eq!(model.cov(0.0, t).unwrap(), 0.0);
    }

    #[test]
    fn incremental_variance_is_nonnegative(model in arb_model(),
                                           a in 0.0f64..1.0,
                                           b in 0.0f64..1.0) {
        let (s, t) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.incremental_variance(s, t).unwrap() >= 0.0);
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite(model in arb_model()) {
        // 64-point uniform grid of (0, T]; the Gershgorin row-sum bound
        // dominates the top eigenvalue, so factorizing G + 1e-10 s I certifies
        // the smallest eigenvalue is above -1e-10 relative to the largest.
        let n = 64;
        let h = model.horizon() / n as f64;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = model
                    .cov((i + 1) as f64 * h, (j + 1) as f64 * h)
                    .unwrap();
            }
        }
        let max_row_sum = gram
            .chunks(n)
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let mut shifted = gram.clone();
        for i in 0..n {
            shifted[i * n + i] += 1e-10 * max_row_sum;
        }
        prop_assert!(cholesky_succeeds(&shifted, n));
    }

    #[test]
    fn csv_round_trip_is_bit_exact(values in proptest::collection::vec(-1e3f64..1e3, 3..40),
                                   seed in any::<u64>()) {
        let mut values = values;
        values[0] = 0.0;
        let path = GridPath::new(1.0, values, seed, Generator::Imported).unwrap();
        let mut buf = Vec::new();
        export_path(&path, &mut buf).unwrap();
        let back = import_path(std::io::Cursor::new(&buf)).unwrap();
        prop_assert_eq!(&back.values, &path.values);
    }

    #[test]
    fn second_diffs_annihilate_affine(slope in -10.0f64..10.0, n in 3usize..64) {
        let values: Vec<f64> = (0..n).map(|k| slope * k as f64).collect();
        let diffs = raw_second_diffs(&values);
        prop_assert!(diffs.iter().all(|d| d.abs() < 1e-9));
        prop_assert!(vstat(&diffs) >= 0.0);
    }

    #[test]
    fn gamma_hat_is_invariant_under_dyadic_scaling(gamma in 0.1f64..0.9,
                                                   seed in any::<u64>(),
                                                   pow in -20i32..20) {
        let path = simulate_fbm_circulant(gamma, 32, 1.0, seed).unwrap();
        let base = gamma_hat(&path).unwrap().gamma_hat;
        let scale = 2f64.powi(pow);
        let scaled = GridPath::new(
            path.horizon,
            path.values.iter().map(|v| v * scale).collect(),
            path.seed,
            path.generator,
        ).unwrap();
        prop_assert_eq!(gamma_hat(&scaled).unwrap().gamma_hat, base);
    }

    #[test]
    fn cauchy_schwarz_for_random_models(model in arb_model()) {
        let set = coefficients(&model, 6, NormalizationMode::Orey).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                let bound = (set.d_n.get(j, j) * set.d_n.get(k, k)).sqrt();
                prop_assert!(set.d_n.get(j, k).abs() <= bound + 1e-12);
            }
        }
    }
}
