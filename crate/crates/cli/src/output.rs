//! JSON report shapes for the CLI and the writer helpers. The JSON schemas
//! shipped under `schemas/` describe these exactly.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use orey_core::asymptotics::AsymptoticCovariance;
use orey_core::conditions::{ConditionReport, Verdict};
use orey_core::montecarlo::McStatistic;
use orey_core::quadvar::{self, Level, NormalizationMode};
use orey_core::{CovarianceModel, Result};

/// Serialize a report as pretty JSON to a file or stdout.
pub fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serialization");
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "{json}")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

/// Output of `orey sigma`.
#[derive(Serialize)]
pub struct SigmaReport {
    pub gamma: f64,
    #[serde(rename = "Sigma11")]
    pub sigma11: f64,
    #[serde(rename = "Sigma12")]
    pub sigma12: f64,
    #[serde(rename = "Sigma22")]
    pub sigma22: f64,
    pub sigma_sq: f64,
    #[serde(rename = "J")]
    pub truncation_j: u64,
    pub tail_bound: f64,
}

impl From<AsymptoticCovariance> for SigmaReport {
    fn from(s: AsymptoticCovariance) -> Self {
        Self {
            gamma: s.gamma,
            sigma11: s.sigma11,
            sigma12: s.sigma12,
            sigma22: s.sigma22,
            sigma_sq: s.sigma_gamma_sq,
            truncation_j: s.truncation_j,
            tail_bound: s.tail_bound,
        }
    }
}

/// Output of `orey coeffs`.
#[derive(Serialize)]
pub struct CoeffsReport {
    pub model: String,
    pub n: usize,
    pub mode: NormalizationMode,
    pub row_sum_max_n: f64,
    pub row_sum_max_2n: f64,
    pub isserlis_var_n: f64,
    pub isserlis_var_2n: f64,
    pub isserlis_cov: f64,
    pub expected_v_n: f64,
    pub expected_v_2n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_n: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_2n: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
}

pub fn coeffs_report(
    model: &CovarianceModel,
    spec: &str,
    n: usize,
    mode: NormalizationMode,
    full: bool,
) -> Result<CoeffsReport> {
    if full {
        let set = quadvar::coefficients(model, n, mode)?;
        Ok(CoeffsReport {
            model: spec.to_string(),
            n,
            mode,
            row_sum_max_n: set.max_row_sum(Level::N),
            row_sum_max_2n: set.max_row_sum(Level::TwoN),
            isserlis_var_n: set.isserlis_var(Level::N),
            isserlis_var_2n: set.isserlis_var(Level::TwoN),
            isserlis_cov: set.isserlis_cov(),
            expected_v_n: quadvar::expected_vhat(model, n, mode)?,
            expected_v_2n: quadvar::expected_vhat(model, 2 * n, mode)?,
            d_n: Some(set.d_n.to_rows()),
            d_2n: Some(set.d_2n.to_rows()),
            c: Some(set.cross.to_rows()),
        })
    } else {
        // Streaming aggregates; the matrices are never materialized.
        let agg_n = quadvar::level_aggregates(model, n, mode)?;
        let agg_2n = quadvar::level_aggregates(model, 2 * n, mode)?;
        let cross_sq = quadvar::cross_frobenius_sq(model, n, mode)?;
        Ok(CoeffsReport {
            model: spec.to_string(),
            n,
            mode,
            row_sum_max_n: agg_n.max_row_sum,
            row_sum_max_2n: agg_2n.max_row_sum,
            isserlis_var_n: 2.0 * agg_n.frobenius_sq,
            isserlis_var_2n: 2.0 * agg_2n.frobenius_sq,
            isserlis_cov: 2.0 * cross_sq,
            expected_v_n: agg_n.diag_sum,
            expected_v_2n: agg_2n.diag_sum,
            d_n: None,
            d_2n: None,
            c: None,
        })
    }
}

/// Output of `orey verify`: the condition report plus the overall verdict.
#[derive(Serialize)]
pub struct VerifyReport {
    pub overall: Verdict,
    #[serde(flatten)]
    pub report: ConditionReport,
}

impl VerifyReport {
    pub fn new(report: ConditionReport) -> Self {
        Self {
            overall: report.overall(),
            report,
        }
    }
}

/// Per-replication samples as CSV next to the main report.
pub fn write_samples_csv(path: &Path, statistic: McStatistic, samples: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    match statistic {
        McStatistic::BivariateV => writeln!(f, "rep,s1,s2")?,
        McStatistic::GammaHat => writeln!(f, "rep,gamma_hat,scaled_error")?,
    }
    for (rep, row) in samples.iter().enumerate() {
        write!(f, "{rep}")?;
        for v in row {
            write!(f, ",{v:.16e}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}
