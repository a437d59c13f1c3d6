//! Exact simulation of zero-mean Gaussian trajectories on the uniform grid
//! {kT/n, k = 0..n}, with reproducible seeding.
//!
//! Three exact samplers:
//! * Cholesky factorization of the Gram matrix (any model, O(n^3));
//! * circulant embedding of the fBm increment covariance (O(n log n));
//! * the sfBm reflection representation S_t = (B_t + B_{-t}) / sqrt(2),
//!   gated by a startup covariance self-check.
//!
//! All Gaussian variates come from per-replication ChaCha8 streams through
//! the inverse-CDF transform, so identical (model, n, seed) inputs produce
//! bit-identical paths regardless of platform or thread count.

use std::cell::RefCell;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{abs_pow, CovarianceModel, Family};
use crate::stats::inv_norm_cdf;

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Cholesky,
    CirculantFbm,
    SfbmReflection,
    Imported,
}

/// One sampled trajectory X_{kT/n}, k = 0..n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    /// Horizon T.
    pub horizon: f64,
    /// Number of grid steps; `values` has n + 1 entries.
    pub n: usize,
    /// values[0] = 0 exactly.
    pub values: Vec<f64>,
    pub seed: u64,
    pub generator: Generator,
}

impl GridPath {
    pub fn new(horizon: f64, values: Vec<f64>, seed: u64, generator: Generator) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("path needs at least two points".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::Domain(format!(
                "path must start at 0, got {}",
                values[0]
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon {horizon} must be positive")));
        }
        Ok(Self {
            horizon,
            n: values.len() - 1,
            values,
            seed,
            generator,
        })
    }

    /// Grid time of index k.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.n as f64
    }

    /// Every second point: the level-n path underlying a level-2n trajectory.
    pub fn downsample(&self) -> Result<GridPath> {
        if !self.n.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "downsample requires an even grid count, got {}",
                self.n
            )));
        }
        let values: Vec<f64> = self.values.iter().copied().step_by(2).collect();
        Ok(GridPath {
            horizon: self.horizon,
            n: self.n / 2,
            values,
            seed: self.seed,
            generator: self.generator,
        })
    }
}

/// Per-replication Gaussian stream: ChaCha8 keyed by `seed ^ replication`,
/// uniforms mapped through the inverse normal CDF.
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn for_replication(seed: u64, replication: u64) -> Self {
        Self::new(seed ^ replication)
    }

    /// Uniform in the open interval (0, 1) from 53 high bits.
    fn uniform_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn standard_normal(&mut self) -> f64 {
        inv_norm_cdf(self.uniform_open01())
    }
}

/// Lower-triangular Cholesky with the escalating-jitter policy: exact first,
/// then diagonal shifts 1e-14 .. 1e-10 (times the max diagonal), then fail
/// reporting the offending pivot.
fn cholesky_lower(gram: &[f64], n: usize) -> Result<Vec<f64>> {
    let max_diag = (0..n).map(|i| gram[i * n + i]).fold(0.0_f64, f64::max);
    let mut last_pivot = (0usize, 0.0f64);
    for jitter_exp in [f64::NEG_INFINITY, -14.0, -13.0, -12.0, -11.0, -10.0] {
        let jitter = if jitter_exp.is_finite() {
            10f64.powf(jitter_exp) * max_diag
        } else {
            0.0
        };
        let mut l = vec![0.0; n * n];
        let mut ok = true;
        'outer: for i in 0..n {
            for j in 0..=i {
                let mut sum = gram[i * n + j];
                if i == j {
                    sum += jitter;
                }
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        last_pivot = (i, sum);
                        ok = false;
                        break 'outer;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        if ok {
            return Ok(l);
        }
    }
    Err(Error::Factorization {
        pivot: last_pivot.0,
        value: last_pivot.1,
    })
}

/// Exact sampling through the Gram matrix of the model on {kT/n, k = 1..n}.
pub fn simulate_cholesky(model: &CovarianceModel, n: usize, seed: u64) -> Result<GridPath> {
    if n < 4 {
        return Err(Error::Domain(format!("n = {n} must be at least 4")));
    }
    let t = model.horizon();
    let h = t / n as f64;
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let c = model.cov((i + 1) as f64 * h, (j + 1) as f64 * h)?;
            gram[i * n + j] = c;
            gram[j * n + i] = c;
        }
    }
    let l = cholesky_lower(&gram, n)?;
    let mut stream = GaussianStream::new(seed);
    let z: Vec<f64> = (0..n).map(|_| stream.standard_normal()).collect();
    let mut values = vec![0.0; n + 1];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[i * n + j] * z[j];
        }
        values[i + 1] = acc;
    }
    GridPath::new(t, values, seed, Generator::Cholesky)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex<f64>]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// Stationary fractional Gaussian noise of length `m` and spacing `dt` via
/// circulant embedding of the increment autocovariance. Exact for fBm, where
/// the embedding is nonnegative definite for every Hurst index.
fn sample_fgn_circulant(
    gamma: f64,
    m: usize,
    dt: f64,
    stream: &mut GaussianStream,
) -> Result<Vec<f64>> {
    let p = 2.0 * gamma;
    let scale = dt.powf(p);
    let autocov = |k: usize| -> f64 {
        let k = k as f64;
        0.5 * scale * (abs_pow(k + 1.0, p) - 2.0 * abs_pow(k, p) + abs_pow(k - 1.0, p))
    };
    let big_m = 2 * m;
    let mut spectrum: Vec<Complex<f64>> = vec![Complex::default(); big_m];
    for (k, slot) in spectrum.iter_mut().take(m + 1).enumerate() {
        *slot = Complex::new(autocov(k), 0.0);
    }
    for k in 1..m {
        spectrum[big_m - k] = spectrum[k];
    }
    fft_in_place(&mut spectrum);
    let lambda: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let max_ev = lambda.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = lambda.iter().cloned().fold(f64::MAX, f64::min);
    if min_ev < -1e-9 * max_ev.abs() {
        return Err(Error::Embedding {
            min_eigenvalue: min_ev,
            max_eigenvalue: max_ev,
        });
    }
    let lambda: Vec<f64> = lambda.into_iter().map(|l| l.max(0.0)).collect();

    let mf = big_m as f64;
    let mut coeffs: Vec<Complex<f64>> = vec![Complex::default(); big_m];
    coeffs[0] = Complex::new((lambda[0] / mf).sqrt() * stream.standard_normal(), 0.0);
    coeffs[m] = Complex::new((lambda[m] / mf).sqrt() * stream.standard_normal(), 0.0);
    for k in 1..m {
        let a = (lambda[k] / (2.0 * mf)).sqrt();
        let u = stream.standard_normal();
        let v = stream.standard_normal();
        coeffs[k] = Complex::new(a * u, a * v);
        coeffs[big_m - k] = coeffs[k].conj();
    }
    fft_in_place(&mut coeffs);
    Ok(coeffs[..m].iter().map(|c| c.re).collect())
}

/// Exact fBm via circulant embedding of the stationary increments.
pub fn simulate_fbm_circulant(gamma: f64, n: usize, horizon: f64, seed: u64) -> Result<GridPath> {
    if n < 4 {
        return Err(Error::Domain(format!("n = {n} must be at least 4")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0,1)")));
    }
    let mut stream = GaussianStream::new(seed);
    let fgn = sample_fgn_circulant(gamma, n, horizon / n as f64, &mut stream)?;
    let mut values = vec![0.0; n + 1];
    for i in 0..n {
        values[i + 1] = values[i] + fgn[i];
    }
    GridPath::new(horizon, values, seed, Generator::CirculantFbm)
}

/// Covariance of (B_t + B_{-t})/sqrt(2) for an fBm B on [-T, T], evaluated
/// analytically; must coincide with the sfBm kernel for the fast path to be
/// legitimate.
fn reflection_cov(h: f64, s: f64, t: f64) -> f64 {
    let p = 2.0 * h;
    let fbm = |a: f64, b: f64| 0.5 * (abs_pow(a, p) + abs_pow(b, p) - abs_pow(a - b, p));
    0.5 * (fbm(s, t) + fbm(-s, t) + fbm(s, -t) + fbm(-s, -t))
}

fn reflection_identity_holds(model: &CovarianceModel, h: f64) -> bool {
    let t_max = model.horizon();
    let mut stream = GaussianStream::new(0x5f3759df);
    for _ in 0..50 {
        let s = stream.uniform_open01() * t_max;
        let t = stream.uniform_open01() * t_max;
        let expect = model.cov_unchecked(s, t);
        if (reflection_cov(h, s, t) - expect).abs() > 1e-10 {
            return false;
        }
    }
    true
}

/// Exact sfBm through the reflection representation, falling back to
/// Cholesky if the startup covariance self-check ever fails.
pub fn simulate_sfbm_reflection(h: f64, n: usize, horizon: f64, seed: u64) -> Result<GridPath> {
    if n < 4 {
        return Err(Error::Domain(format!("n = {n} must be at least 4")));
    }
    let model = CovarianceModel::sfbm(h)?.with_horizon(horizon)?;
    if !reflection_identity_holds(&model, h) {
        return simulate_cholesky(&model, n, seed);
    }
    // fBm on the symmetric grid {-T, ..., T}: 2n increments, anchored at -T.
    let mut stream = GaussianStream::new(seed);
    let fgn = sample_fgn_circulant(h, 2 * n, horizon / n as f64, &mut stream)?;
    let mut cum = vec![0.0; 2 * n + 1];
    for i in 0..2 * n {
        cum[i + 1] = cum[i] + fgn[i];
    }
    let mid = cum[n];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                (cum[n + i] + cum[n - i] - 2.0 * mid) * inv_sqrt2
            }
        })
        .collect();
    GridPath::new(horizon, values, seed, Generator::SfbmReflection)
}

/// Simulate with the fastest exact generator available for the model.
pub fn simulate(model: &CovarianceModel, n: usize, seed: u64) -> Result<GridPath> {
    match model.family() {
        Family::Fbm { gamma } => simulate_fbm_circulant(*gamma, n, model.horizon(), seed),
        Family::Sfbm { h } => simulate_sfbm_reflection(*h, n, model.horizon(), seed),
        _ => simulate_cholesky(model, n, seed),
    }
}

/// Simulate with an explicitly requested generator.
pub fn simulate_with(
    model: &CovarianceModel,
    n: usize,
    seed: u64,
    generator: Generator,
) -> Result<GridPath> {
    match generator {
        Generator::Cholesky => simulate_cholesky(model, n, seed),
        Generator::CirculantFbm => match model.family() {
            Family::Fbm { gamma } => simulate_fbm_circulant(*gamma, n, model.horizon(), seed),
            _ => Err(Error::Domain(
                "circulant generator applies to fBm models only".into(),
            )),
        },
        Generator::SfbmReflection => match model.family() {
            Family::Sfbm { h } => simulate_sfbm_reflection(*h, n, model.horizon(), seed),
            _ => Err(Error::Domain(
                "reflection generator applies to sfBm models only".into(),
            )),
        },
        Generator::Imported => Err(Error::Domain(
            "imported is not a simulation generator".into(),
        )),
    }
}

/// Write a path as CSV `k,t,x` with 17 significant digits.
pub fn export_path<W: Write>(path: &GridPath, mut out: W) -> Result<()> {
    writeln!(out, "k,t,x")?;
    for k in 0..=path.n {
        writeln!(out, "{},{:.16e},{:.16e}", k, path.time(k), path.values[k])?;
    }
    Ok(())
}

pub fn export_path_file<P: AsRef<Path>>(path: &GridPath, file: P) -> Result<()> {
    let f = std::fs::File::create(file)?;
    export_path(path, std::io::BufWriter::new(f))
}

/// Read a path from CSV, validating header, ordering, grid uniformity
/// (relative deviation <= 1e-9), and x[0] = 0.
pub fn import_path<R: BufRead>(reader: R) -> Result<GridPath> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Format {
        line: 1,
        reason: "empty file".into(),
    })?;
    let header = header?;
    if header.trim() != "k,t,x" {
        return Err(Error::Format {
            line: 1,
            reason: format!("expected header `k,t,x`, got `{}`", header.trim()),
        });
    }
    let mut ts: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |field: Option<&str>, what: &str| -> Result<f64> {
            field
                .map(str::trim)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Format {
                    line: lineno,
                    reason: format!("bad {what} field"),
                })
        };
        let k = parse(fields.next(), "k")?;
        let t = parse(fields.next(), "t")?;
        let x = parse(fields.next(), "x")?;
        if k != ts.len() as f64 {
            return Err(Error::Format {
                line: lineno,
                reason: format!("expected k = {}, got {k}", ts.len()),
            });
        }
        if let Some(&prev) = ts.last() {
            if t <= prev {
                return Err(Error::Format {
                    line: lineno,
                    reason: format!("t not increasing: {t} after {prev}"),
                });
            }
        }
        ts.push(t);
        xs.push(x);
    }
    if ts.len() < 2 {
        return Err(Error::Format {
            line: 1,
            reason: "path needs at least two rows".into(),
        });
    }
    if ts[0] != 0.0 {
        return Err(Error::Format {
            line: 2,
            reason: format!("grid must start at t = 0, got {}", ts[0]),
        });
    }
    if xs[0] != 0.0 {
        return Err(Error::Format {
            line: 2,
            reason: format!("x[0] must be 0, got {}", xs[0]),
        });
    }
    let n = ts.len() - 1;
    let horizon = ts[n];
    let h = horizon / n as f64;
    for (k, &t) in ts.iter().enumerate() {
        if (t - k as f64 * h).abs() > 1e-9 * horizon {
            return Err(Error::Format {
                line: k + 2,
                reason: format!(
                    "nonuniform grid at k = {k}: t = {t}, expected {}",
                    k as f64 * h
                ),
            });
        }
    }
    GridPath::new(horizon, xs, 0, Generator::Imported)
}

pub fn import_path_file<P: AsRef<Path>>(file: P) -> Result<GridPath> {
    let f = std::fs::File::open(file)?;
    import_path(BufReader::new(f))
}
