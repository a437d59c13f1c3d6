//! Small statistical toolbox: normal quantile and CDF, Kolmogorov-Smirnov
//! test, sample moments, and log-log slope fitting.

/// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16).
///
/// Accurate to about 1e-15 over (0, 1); pinned here (rather than taken from a
/// distribution crate) so that simulated paths are bit-reproducible across
/// platforms and dependency upgrades.
#[allow(clippy::excessive_precision)] // published coefficients kept verbatim
pub fn inv_norm_cdf(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "inv_norm_cdf requires p in (0,1), got {p}"
    );
    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((i as f64 / n - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov p-value with the Stephens small-sample
/// correction lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) d.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=101 {
        let term = sign * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += term;
        sign = -sign;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 * p).clamp(0.0, 1.0)
}

/// OLS slope of ln(y) on ln(x); used for decay-rate checks.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantiles_match_reference() {
        assert_eq!(inv_norm_cdf(0.5), 0.0);
        assert_relative_eq!(inv_norm_cdf(0.975), 1.959963984540054, epsilon = 1e-13);
        assert_relative_eq!(inv_norm_cdf(0.025), -1.959963984540054, epsilon = 1e-13);
        assert_relative_eq!(inv_norm_cdf(0.99), 2.326347874040841, epsilon = 1e-13);
        assert_relative_eq!(inv_norm_cdf(1e-10), -6.361340902404056, epsilon = 1e-12);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert_relative_eq!(norm_cdf(inv_norm_cdf(p)), p, epsilon = 1e-13);
        }
    }

    #[test]
    fn ks_of_exact_uniform_grid_is_small() {
        // Samples placed at the exact quantiles of the reference distribution.
        let n = 1000;
        let samples: Vec<f64> = (1..=n)
            .map(|i| inv_norm_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&samples, norm_cdf);
        assert!(d <= 0.5 / n as f64 + 1e-12, "d = {d}");
        assert!(ks_pvalue(d, n) > 0.999);
    }

    #[test]
    fn ks_detects_shifted_distribution() {
        let n = 1000;
        let samples: Vec<f64> = (1..=n)
            .map(|i| 0.5 + inv_norm_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&samples, norm_cdf);
        assert!(d > 0.15);
        assert!(ks_pvalue(d, n) < 1e-6);
    }

    #[test]
    fn log_log_slope_recovers_power_law() {
        let xs: Vec<f64> = (1..=8).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.25)).collect();
        assert_relative_eq!(log_log_slope(&xs, &ys), -1.25, epsilon = 1e-12);
    }
}
