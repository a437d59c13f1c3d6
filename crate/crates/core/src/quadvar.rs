//! Second-order increments, V statistics, exact d/c coefficient matrices,
//! and the Isserlis variance/covariance identities.
//!
//! With h = T/(in), the second-order increment at level in is
//! D_k = X_{(k+1)h} - 2 X_{kh} + X_{(k-1)h}, 1 <= k <= in-1, and
//!
//! * d_{j,k} = E Dhat_j Dhat_k at one level,
//! * c_{j,k} = E Dhat_{n,j} Dhat_{2n,k} across the (n, 2n) pair,
//! * V_{in}  = sum_k Dhat_k^2,
//!
//! where Dhat is D normalized either by its exact standard deviation or by
//! the Orey scaling kappa sqrt(4 - 2^2gamma) (T/(in))^gamma. Every entry is a
//! nine-term linear combination of covariance values; rows are assembled from
//! three cached covariance slices so a full matrix costs O(in^2) kernel
//! evaluations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{abs_pow, CovarianceModel, Family};
use crate::pathgen::GridPath;

/// How second-order increments are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Divide by sqrt(E D^2): diagonal d entries become exactly 1.
    ExactVariance,
    /// Divide by kappa sqrt(4 - 2^2gamma) (T/(in))^gamma; requires Orey metadata.
    Orey,
}

/// Which member of the (n, 2n) level pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    N,
    TwoN,
}

/// Covariance evaluations on a uniform grid, with power tables for the
/// built-in families so entries reduce to table lookups.
pub(crate) struct GridKernel {
    tables: Tables,
    step: f64,
}

enum Tables {
    Fbm {
        p: Vec<f64>,
    },
    Sfbm {
        p: Vec<f64>,
    },
    Bifbm {
        q: Vec<f64>,
        p: Vec<f64>,
        k: f64,
        scale: f64,
    },
    Custom {
        model: CovarianceModel,
    },
}

impl GridKernel {
    pub(crate) fn new(model: &CovarianceModel, grid: usize) -> GridKernel {
        let step = model.horizon() / grid as f64;
        let pow_table = |count: usize, expo: f64| -> Vec<f64> {
            (0..=count)
                .map(|m| abs_pow(m as f64 * step, expo))
                .collect()
        };
        let tables = match model.family() {
            Family::Fbm { gamma } => Tables::Fbm {
                p: pow_table(grid, 2.0 * gamma),
            },
            Family::Sfbm { h } => Tables::Sfbm {
                p: pow_table(2 * grid, 2.0 * h),
            },
            Family::Bifbm { h, k } => Tables::Bifbm {
                q: pow_table(grid, 2.0 * h),
                p: pow_table(grid, 2.0 * h * k),
                k: *k,
                scale: (-k).exp2(),
            },
            Family::Custom { .. } => Tables::Custom {
                model: model.clone(),
            },
        };
        GridKernel { tables, step }
    }

    #[inline]
    pub(crate) fn cov_idx(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 {
            return 0.0;
        }
        match &self.tables {
            Tables::Fbm { p } => 0.5 * (p[i] + p[j] - p[i.abs_diff(j)]),
            Tables::Sfbm { p } => p[i] + p[j] - 0.5 * (p[i + j] + p[i.abs_diff(j)]),
            Tables::Bifbm { q, p, k, scale } => scale * ((q[i] + q[j]).powf(*k) - p[i.abs_diff(j)]),
            Tables::Custom { model } => {
                model.cov_unchecked(i as f64 * self.step, j as f64 * self.step)
            }
        }
    }

    /// Raw E D_a D_b for second differences centered at fine indices `a`, `b`
    /// with strides `sa`, `sb`.
    fn stencil(&self, a: usize, sa: usize, b: usize, sb: usize) -> f64 {
        let mut acc = 0.0;
        for (wp, pa) in [(1.0, a - sa), (-2.0, a), (1.0, a + sa)] {
            let mut inner = 0.0;
            for (wq, pb) in [(1.0, b - sb), (-2.0, b), (1.0, b + sb)] {
                inner += wq * self.cov_idx(pa, pb);
            }
            acc += wp * inner;
        }
        acc
    }
}

/// Plain second differences of a value sequence (length >= 3 -> length - 2).
pub fn raw_second_diffs(values: &[f64]) -> Vec<f64> {
    debug_assert!(values.len() >= 3);
    values
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .collect()
}

fn orey_denominator(model: &CovarianceModel, grid: usize) -> Result<f64> {
    let (gamma, kappa) = model.orey_metadata()?;
    let h = model.horizon() / grid as f64;
    Ok(kappa * (4.0 - (2.0 * gamma).exp2()).sqrt() * h.powf(gamma))
}

fn check_horizon(model: &CovarianceModel, path: &GridPath) -> Result<()> {
    if (model.horizon() - path.horizon).abs() > 1e-12 * model.horizon() {
        return Err(Error::Domain(format!(
            "path horizon {} does not match model horizon {}",
            path.horizon,
            model.horizon()
        )));
    }
    Ok(())
}

/// Normalized second-order increments of a path at its own resolution.
pub fn normalized_second_diffs(
    model: &CovarianceModel,
    path: &GridPath,
    mode: NormalizationMode,
) -> Result<Vec<f64>> {
    check_horizon(model, path)?;
    let mut diffs = raw_second_diffs(&path.values);
    match mode {
        NormalizationMode::Orey => {
            let denom = orey_denominator(model, path.n)?;
            for d in &mut diffs {
                *d /= denom;
            }
        }
        NormalizationMode::ExactVariance => {
            let kern = GridKernel::new(model, path.n);
            for (k, d) in diffs.iter_mut().enumerate() {
                *d /= kern.stencil(k + 1, 1, k + 1, 1).sqrt();
            }
        }
    }
    Ok(diffs)
}

/// Normalized increments of the (n, 2n) level pair extracted from one
/// trajectory sampled at 2n: the level-n path is the downsampled one.
pub fn bivariate_normalized_diffs(
    model: &CovarianceModel,
    path_2n: &GridPath,
    mode: NormalizationMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let coarse = path_2n.downsample()?;
    Ok((
        normalized_second_diffs(model, &coarse, mode)?,
        normalized_second_diffs(model, path_2n, mode)?,
    ))
}

/// The quadratic variation statistic: sum of squared increments.
pub fn vstat(diffs: &[f64]) -> f64 {
    diffs.iter().map(|d| d * d).sum()
}

/// Dense row-major matrix of coefficient entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry (r, c), zero-indexed; spec index (j, k) maps to (j-1, k-1).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|c| c.to_vec()).collect()
    }

    /// Max over columns of the absolute row sum (equals the max row sum for
    /// the symmetric d matrices).
    pub fn max_abs_row_sum(&self) -> f64 {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Exact second-order increment covariances for a model at the (n, 2n) pair.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub n: usize,
    pub mode: NormalizationMode,
    /// (n-1) x (n-1), d at level n.
    pub d_n: Matrix,
    /// (2n-1) x (2n-1), d at level 2n.
    pub d_2n: Matrix,
    /// (n-1) x (2n-1), cross-level coefficients.
    pub cross: Matrix,
}

/// Row generator for a d matrix at one level.
struct DRows {
    kern: GridKernel,
    grid: usize,
    mode: NormalizationMode,
    denom: f64,
    diag_raw: Vec<f64>,
}

impl DRows {
    fn new(model: &CovarianceModel, grid: usize, mode: NormalizationMode) -> Result<DRows> {
        let kern = GridKernel::new(model, grid);
        let diag_raw: Vec<f64> = (1..grid).map(|k| kern.stencil(k, 1, k, 1)).collect();
        let denom = match mode {
            NormalizationMode::Orey => {
                let d = orey_denominator(model, grid)?;
                d * d
            }
            NormalizationMode::ExactVariance => 1.0,
        };
        Ok(DRows {
            kern,
            grid,
            mode,
            denom,
            diag_raw,
        })
    }

    /// Normalized row k (1-based) into `out` (length grid - 1).
    fn row_into(&self, k: usize, out: &mut Vec<f64>) {
        let grid = self.grid;
        out.clear();
        out.reserve(grid - 1);
        let mut combined = vec![0.0; grid + 1];
        for (q, slot) in combined.iter_mut().enumerate() {
            *slot = self.kern.cov_idx(k - 1, q) - 2.0 * self.kern.cov_idx(k, q)
                + self.kern.cov_idx(k + 1, q);
        }
        for kp in 1..grid {
            let raw = combined[kp - 1] - 2.0 * combined[kp] + combined[kp + 1];
            let val = match self.mode {
                NormalizationMode::Orey => raw / self.denom,
                NormalizationMode::ExactVariance => {
                    raw / (self.diag_raw[k - 1] * self.diag_raw[kp - 1]).sqrt()
                }
            };
            out.push(val);
        }
    }

    fn diag(&self, k: usize) -> f64 {
        match self.mode {
            NormalizationMode::Orey => self.diag_raw[k - 1] / self.denom,
            NormalizationMode::ExactVariance => 1.0,
        }
    }
}

/// Row generator for the cross matrix c (coarse row j against the fine grid).
struct CRows {
    kern: GridKernel,
    n: usize,
    mode: NormalizationMode,
    denom: f64,
    diag_coarse_raw: Vec<f64>,
    diag_fine_raw: Vec<f64>,
}

impl CRows {
    fn new(model: &CovarianceModel, n: usize, mode: NormalizationMode) -> Result<CRows> {
        let kern = GridKernel::new(model, 2 * n);
        let diag_coarse_raw: Vec<f64> = (1..n).map(|j| kern.stencil(2 * j, 2, 2 * j, 2)).collect();
        let diag_fine_raw: Vec<f64> = (1..2 * n).map(|k| kern.stencil(k, 1, k, 1)).collect();
        let denom = match mode {
            NormalizationMode::Orey => {
                orey_denominator(model, n)? * orey_denominator(model, 2 * n)?
            }
            NormalizationMode::ExactVariance => 1.0,
        };
        Ok(CRows {
            kern,
            n,
            mode,
            denom,
            diag_coarse_raw,
            diag_fine_raw,
        })
    }

    fn row_into(&self, j: usize, out: &mut Vec<f64>) {
        let fine = 2 * self.n;
        out.clear();
        out.reserve(fine - 1);
        let a = 2 * j;
        let mut combined = vec![0.0; fine + 1];
        for (q, slot) in combined.iter_mut().enumerate() {
            *slot = self.kern.cov_idx(a - 2, q) - 2.0 * self.kern.cov_idx(a, q)
                + self.kern.cov_idx(a + 2, q);
        }
        for k in 1..fine {
            let raw = combined[k - 1] - 2.0 * combined[k] + combined[k + 1];
            let val = match self.mode {
                NormalizationMode::Orey => raw / self.denom,
                NormalizationMode::ExactVariance => {
                    raw / (self.diag_coarse_raw[j - 1] * self.diag_fine_raw[k - 1]).sqrt()
                }
            };
            out.push(val);
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Domain(format!("n = {n} must be at least 4")));
    }
    Ok(())
}

/// Assemble the dense coefficient set at the (n, 2n) pair.
pub fn coefficients(
    model: &CovarianceModel,
    n: usize,
    mode: NormalizationMode,
) -> Result<CoefficientSet> {
    check_n(n)?;
    let assemble_d = |grid: usize| -> Result<Matrix> {
        let rows = DRows::new(model, grid, mode)?;
        let mut m = Matrix::zeros(grid - 1, grid - 1);
        let chunks: Vec<Vec<f64>> = (1..grid)
            .into_par_iter()
            .map_init(Vec::new, |buf, k| {
                rows.row_into(k, buf);
                buf.clone()
            })
            .collect();
        for (k, row) in chunks.into_iter().enumerate() {
            m.data[k * (grid - 1)..(k + 1) * (grid - 1)].copy_from_slice(&row);
        }
        Ok(m)
    };
    let d_n = assemble_d(n)?;
    let d_2n = assemble_d(2 * n)?;
    let crows = CRows::new(model, n, mode)?;
    let mut cross = Matrix::zeros(n - 1, 2 * n - 1);
    let chunks: Vec<Vec<f64>> = (1..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, j| {
            crows.row_into(j, buf);
            buf.clone()
        })
        .collect();
    for (j, row) in chunks.into_iter().enumerate() {
        cross.data[j * (2 * n - 1)..(j + 1) * (2 * n - 1)].copy_from_slice(&row);
    }
    Ok(CoefficientSet {
        n,
        mode,
        d_n,
        d_2n,
        cross,
    })
}

impl CoefficientSet {
    fn d(&self, level: Level) -> &Matrix {
        match level {
            Level::N => &self.d_n,
            Level::TwoN => &self.d_2n,
        }
    }

    /// Var V at one level: 2 sum_k d_kk^2 + 4 sum_{k<l} d_kl^2.
    pub fn isserlis_var(&self, level: Level) -> f64 {
        let d = self.d(level);
        let m = d.rows();
        let mut diag = 0.0;
        let mut upper = 0.0;
        for k in 0..m {
            let dkk = d.get(k, k);
            diag += dkk * dkk;
            for l in k + 1..m {
                let v = d.get(k, l);
                upper += v * v;
            }
        }
        2.0 * diag + 4.0 * upper
    }

    /// cov(V_n, V_2n) = 2 sum_{j,k} c_{j,k}^2.
    pub fn isserlis_cov(&self) -> f64 {
        2.0 * self.cross.data.iter().map(|c| c * c).sum::<f64>()
    }

    /// Max over k of sum_j |d_{j,k}| at one level.
    pub fn max_row_sum(&self, level: Level) -> f64 {
        self.d(level).max_abs_row_sum()
    }
}

/// Streaming aggregates of one d matrix, computed without materializing it.
#[derive(Debug, Clone, Copy)]
pub struct LevelAggregates {
    pub grid: usize,
    /// sum_k d_kk (equals E Vhat at this level).
    pub diag_sum: f64,
    pub diag_sq_sum: f64,
    /// sum_{j,k} d_{j,k}^2 over the full matrix.
    pub frobenius_sq: f64,
    pub max_row_sum: f64,
}

/// Aggregates of d at grid `in` (level n or 2n), parallel over rows with a
/// deterministic sequential reduction.
pub fn level_aggregates(
    model: &CovarianceModel,
    grid: usize,
    mode: NormalizationMode,
) -> Result<LevelAggregates> {
    check_n(grid)?;
    let rows = DRows::new(model, grid, mode)?;
    let stats: Vec<(f64, f64)> = (1..grid)
        .into_par_iter()
        .map_init(Vec::new, |buf, k| {
            rows.row_into(k, buf);
            let abs_sum: f64 = buf.iter().map(|x| x.abs()).sum();
            let sq_sum: f64 = buf.iter().map(|x| x * x).sum();
            (abs_sum, sq_sum)
        })
        .collect();
    let mut agg = LevelAggregates {
        grid,
        diag_sum: 0.0,
        diag_sq_sum: 0.0,
        frobenius_sq: 0.0,
        max_row_sum: 0.0,
    };
    for (abs_sum, sq_sum) in stats {
        agg.frobenius_sq += sq_sum;
        agg.max_row_sum = agg.max_row_sum.max(abs_sum);
    }
    for k in 1..grid {
        let dkk = rows.diag(k);
        agg.diag_sum += dkk;
        agg.diag_sq_sum += dkk * dkk;
    }
    Ok(agg)
}

/// E Vhat at grid `in`: the sum of normalized diagonal entries, O(in).
pub fn expected_vhat(model: &CovarianceModel, grid: usize, mode: NormalizationMode) -> Result<f64> {
    check_n(grid)?;
    if mode == NormalizationMode::ExactVariance {
        return Ok((grid - 1) as f64);
    }
    let rows = DRows::new(model, grid, mode)?;
    Ok((1..grid).map(|k| rows.diag(k)).sum())
}

/// sum_{j,k} c_{j,k}^2 without materializing the cross matrix.
pub fn cross_frobenius_sq(
    model: &CovarianceModel,
    n: usize,
    mode: NormalizationMode,
) -> Result<f64> {
    check_n(n)?;
    let rows = CRows::new(model, n, mode)?;
    let sums: Vec<f64> = (1..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, j| {
            rows.row_into(j, buf);
            buf.iter().map(|x| x * x).sum()
        })
        .collect();
    Ok(sums.iter().sum())
}

/// The main-theorem quantity n cov((in)^-1 V_in, (jn)^-1 V_jn), assembled
/// exactly from the Isserlis identities.
pub fn scaled_cov(
    model: &CovarianceModel,
    n: usize,
    i: usize,
    j: usize,
    mode: NormalizationMode,
) -> Result<f64> {
    check_n(n)?;
    if !(i == 1 || i == 2) || !(j == 1 || j == 2) {
        return Err(Error::Domain(format!(
            "levels (i, j) = ({i}, {j}) must be in {{1,2}}"
        )));
    }
    let nf = n as f64;
    match (i, j) {
        (1, 1) => Ok(2.0 * level_aggregates(model, n, mode)?.frobenius_sq / nf),
        (2, 2) => Ok(level_aggregates(model, 2 * n, mode)?.frobenius_sq / (2.0 * nf)),
        _ => Ok(2.0 * cross_frobenius_sq(model, n, mode)? / (2.0 * nf)),
    }
}

/// Split |d_X^2 - d_fBm^2| sums: diagonal and strict upper triangle.
#[derive(Debug, Clone, Copy, Default)]
pub struct GapSums {
    pub diag: f64,
    pub offdiag: f64,
}

impl GapSums {
    pub fn total(&self) -> f64 {
        self.diag + self.offdiag
    }
}

fn fbm_reference(model: &CovarianceModel) -> Result<CovarianceModel> {
    let (gamma, _) = model.orey_metadata()?;
    CovarianceModel::fbm(gamma)?.with_horizon(model.horizon())
}

/// sum_k |d_kk^2 - dB_kk^2| + sum_{k<l} |d_kl^2 - dB_kl^2| at grid `in`,
/// against the fBm with the model's Orey index.
pub fn d_gap_sums(
    model: &CovarianceModel,
    grid: usize,
    mode: NormalizationMode,
) -> Result<GapSums> {
    check_n(grid)?;
    let reference = fbm_reference(model)?;
    let rows_x = DRows::new(model, grid, mode)?;
    let rows_b = DRows::new(&reference, grid, mode)?;
    let parts: Vec<(f64, f64)> = (1..grid)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(bx, bb), k| {
                rows_x.row_into(k, bx);
                rows_b.row_into(k, bb);
                let idx = k - 1;
                let diag = (bx[idx] * bx[idx] - bb[idx] * bb[idx]).abs();
                let mut upper = 0.0;
                for l in k..grid - 1 {
                    upper += (bx[l] * bx[l] - bb[l] * bb[l]).abs();
                }
                (diag, upper)
            },
        )
        .collect();
    let mut sums = GapSums::default();
    for (diag, upper) in parts {
        sums.diag += diag;
        sums.offdiag += upper;
    }
    Ok(sums)
}

/// sum_{j,k} |c_X^2 - c_fBm^2| over the full cross matrix.
pub fn c_gap_sum(model: &CovarianceModel, n: usize, mode: NormalizationMode) -> Result<f64> {
    check_n(n)?;
    let reference = fbm_reference(model)?;
    let rows_x = CRows::new(model, n, mode)?;
    let rows_b = CRows::new(&reference, n, mode)?;
    let parts: Vec<f64> = (1..n)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(bx, bb), j| {
                rows_x.row_into(j, bx);
                rows_b.row_into(j, bb);
                bx.iter()
                    .zip(bb.iter())
                    .map(|(x, b)| (x * x - b * b).abs())
                    .sum()
            },
        )
        .collect();
    Ok(parts.iter().sum())
}
