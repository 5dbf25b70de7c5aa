//! Critical level of the Gaussian wave process.
//!
//! Along a simple path in the tree the process is a stationary Gaussian
//! sequence whose value at each step depends on the past only through the
//! two previous values. The probability `P_k` that all `k+1` values on a path
//! exceed α therefore grows like `r(α)^k`, where `r(α)` is the leading
//! eigenvalue of the survival operator
//!
//! ```text
//! (T f)(u, v) = ∫_α^∞ κ(w | u, v) f(v, w) dw
//! ```
//!
//! with `κ` the conditional normal density of the next value. The critical
//! level solves `r(α_c) = 1/(d-1)`.
//!
//! The operator is discretized with Gauss–Legendre nodes on `[α, α + T]`.
//! Two Monte Carlo estimators of `P_k` that only use the full path
//! covariance serve as independent checks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::gaussian_wave::{gaussian_tail, supercritical_bound, WaveError, WaveModel};
use crate::linalg::pivoted_cholesky;
use crate::quadrature::gauss_legendre;
use crate::seed::task_rng;
use crate::spectral::SpectrumSupport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PercolationError {
    #[error("path kernel is degenerate: conditional variance {sigma2:e}")]
    DegenerateKernel { sigma2: f64 },
    #[error("power iteration did not converge in {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("truncation {truncation} still leaks {escape:e} of the mass after extension")]
    TruncationTooTight { truncation: f64, escape: f64 },
    #[error("growth rate does not straddle {target} on [{lo}, {hi}]: r(lo)={r_lo}, r(hi)={r_hi}")]
    BracketFailure { lo: f64, hi: f64, r_lo: f64, r_hi: f64, target: f64 },
    #[error("growth rate increases between alpha={a0} (r={r0}) and alpha={a1} (r={r1})")]
    NonMonotone { a0: f64, r0: f64, a1: f64, r1: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Regression of `X₂` on `(X₀, X₁)` for three consecutive path values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathKernel {
    /// Weight of the value two steps back.
    pub a: f64,
    /// Weight of the previous value.
    pub b: f64,
    pub sigma2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl PathKernel {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

pub fn path_kernel(model: &WaveModel) -> Result<PathKernel, PercolationError> {
    let phi1 = model.phi(1);
    let phi2 = model.phi(2);
    let det = 1.0 - phi1 * phi1;
    let a = (phi2 - phi1 * phi1) / det;
    let b = phi1 * (1.0 - phi2) / det;
    let sigma2 = 1.0 - a * phi2 - b * phi1;
    if !(sigma2 > 1e-12) {
        return Err(PercolationError::DegenerateKernel { sigma2 });
    }
    Ok(PathKernel { a, b, sigma2, phi1, phi2 })
}

pub const DEFAULT_QUAD_NODES: usize = 128;
pub const DEFAULT_TRUNCATION: f64 = 8.0;
pub const DEFAULT_TOL: f64 = 1e-3;
const MAX_EXTENSIONS: usize = 3;
const EXTENSION_FACTOR: f64 = 1.5;
const ESCAPE_TOL: f64 = 1e-10;
const POWER_TOL: f64 = 1e-10;
const MAX_POWER_ITERATIONS: usize = 10_000;
const RESIDUAL_TARGET: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub quad_nodes: usize,
    pub truncation: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self { quad_nodes: DEFAULT_QUAD_NODES, truncation: DEFAULT_TRUNCATION }
    }
}

impl OperatorOptions {
    pub fn validate(&self) -> Result<(), PercolationError> {
        if self.quad_nodes < 32 {
            return Err(PercolationError::InvalidParameter(format!(
                "quad_nodes={} must be at least 32",
                self.quad_nodes
            )));
        }
        if !(self.truncation >= 6.0) {
            return Err(PercolationError::InvalidParameter(format!(
                "truncation={} must be at least 6",
                self.truncation
            )));
        }
        Ok(())
    }
}

/// The survival operator discretized on a Gauss–Legendre grid.
///
/// State `(i, j)` stands for the last two path values `(x_i, x_j)`;
/// `entries[(i*N + j)*N + l] = w_l κ(x_l | x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct TransferKernel {
    pub alpha: f64,
    pub truncation: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    kernel: PathKernel,
    entries: Vec<f64>,
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of a standard bivariate normal with correlation `rho`.
fn bivariate_pdf(u: f64, v: f64, rho: f64) -> f64 {
    let det = 1.0 - rho * rho;
    (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * det)).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

impl TransferKernel {
    pub fn build(kernel: PathKernel, alpha: f64, quad_nodes: usize, truncation: f64) -> Self {
        let rule = gauss_legendre(quad_nodes).mapped(alpha, alpha + truncation);
        let n = quad_nodes;
        let sigma = kernel.sigma();
        let norm = 1.0 / sigma;
        let mut entries = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                let mean = kernel.a * rule.nodes[i] + kernel.b * rule.nodes[j];
                let row = &mut entries[(i * n + j) * n..(i * n + j + 1) * n];
                for (l, slot) in row.iter_mut().enumerate() {
                    *slot = rule.weights[l] * norm * normal_pdf((rule.nodes[l] - mean) / sigma);
                }
            }
        }
        Self { alpha, truncation, nodes: rule.nodes, weights: rule.weights, kernel, entries }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn upper(&self) -> f64 {
        self.alpha + self.truncation
    }

    /// Probability that the next value escapes above the grid, under the
    /// pair law of two surviving values restricted to the grid.
    pub fn escape_probability(&self) -> f64 {
        let n = self.size();
        let sigma = self.kernel.sigma();
        let (mut mass, mut escape) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w =
                    self.weights[i] * self.weights[j] * bivariate_pdf(self.nodes[i], self.nodes[j], self.kernel.phi1);
                let mean = self.kernel.a * self.nodes[i] + self.kernel.b * self.nodes[j];
                mass += w;
                escape += w * gaussian_tail((self.upper() - mean) / sigma);
            }
        }
        if mass > 0.0 {
            escape / mass
        } else {
            0.0
        }
    }

    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = self.size();
        out.par_chunks_mut(n).enumerate().for_each(|(i, out_row)| {
            for (j, slot) in out_row.iter_mut().enumerate() {
                let k = &self.entries[(i * n + j) * n..(i * n + j + 1) * n];
                let g = &f[j * n..(j + 1) * n];
                *slot = k.iter().zip(g).map(|(a, b)| a * b).sum();
            }
        });
    }

    /// `Σ_l K[i,j,l]` for every state.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.size();
        self.entries.chunks(n).map(|c| c.iter().sum()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weights of the two-value marginal at each state.
    fn pair_weights(&self) -> Vec<f64> {
        let n = self.size();
        (0..n * n)
            .map(|s| {
                let (i, j) = (s / n, s % n);
                self.weights[i] * self.weights[j] * bivariate_pdf(self.nodes[i], self.nodes[j], self.kernel.phi1)
            })
            .collect()
    }

    /// Leading eigenvalue by power iteration, optionally warm-started.
    pub fn leading_eigenvalue(&self, init: Option<&[f64]>) -> Result<(f64, Vec<f64>, usize), PercolationError> {
        let len = self.size() * self.size();
        let mut f: Vec<f64> = match init {
            Some(v) if v.len() == len && v.iter().all(|x| *x > 0.0) => v.to_vec(),
            _ => vec![1.0; len],
        };
        let total: f64 = f.iter().sum();
        f.iter_mut().for_each(|x| *x /= total);
        let mut g = vec![0.0; len];
        let mut estimate = f64::NAN;
        let mut change = f64::INFINITY;
        let mut calm = 0;
        for it in 1..=MAX_POWER_ITERATIONS {
            self.apply(&f, &mut g);
            let next: f64 = g.iter().sum();
            if !(next > 0.0) {
                return Ok((0.0, f, it));
            }
            change = ((next - estimate) / next).abs();
            estimate = next;
            for (a, b) in f.iter_mut().zip(&g) {
                *a = b / next;
            }
            calm = if change <= POWER_TOL { calm + 1 } else { 0 };
            if calm >= 3 {
                return Ok((estimate, f, it));
            }
        }
        Err(PercolationError::NoConvergence { iterations: MAX_POWER_ITERATIONS, change })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRate {
    pub r: f64,
    /// Truncation actually used after any automatic extension.
    pub truncation: f64,
    pub iterations: usize,
    pub escape: f64,
}

/// Builds the operator at level α, widening the truncation until the escape
/// probability is below 1e-10.
pub fn transfer_kernel(
    model: &WaveModel,
    alpha: f64,
    opts: &OperatorOptions,
) -> Result<TransferKernel, PercolationError> {
    opts.validate()?;
    let kernel = path_kernel(model)?;
    let mut truncation = opts.truncation;
    for attempt in 0..=MAX_EXTENSIONS {
        let op = TransferKernel::build(kernel, alpha, opts.quad_nodes, truncation);
        let escape = op.escape_probability();
        if escape <= ESCAPE_TOL {
            return Ok(op);
        }
        if attempt == MAX_EXTENSIONS {
            return Err(PercolationError::TruncationTooTight { truncation, escape });
        }
        truncation *= EXTENSION_FACTOR;
    }
    unreachable!()
}

pub fn growth_rate(model: &WaveModel, alpha: f64, quad_nodes: usize, truncation: f64) -> Result<f64, PercolationError> {
    Ok(growth_rate_with(model, alpha, &OperatorOptions { quad_nodes, truncation }, None)?.0.r)
}

/// Growth rate plus the converged eigenvector, for warm starts.
pub fn growth_rate_with(
    model: &WaveModel,
    alpha: f64,
    opts: &OperatorOptions,
    init: Option<&[f64]>,
) -> Result<(GrowthRate, Vec<f64>), PercolationError> {
    let op = transfer_kernel(model, alpha, opts)?;
    let (r, vec, iterations) = op.leading_eigenvalue(init)?;
    Ok((GrowthRate { r, truncation: op.truncation, iterations, escape: op.escape_probability() }, vec))
}

/// `P_k(α)` from the discretized operator: `P_0 = Q(α)`, and for `k ≥ 1`
/// the pair weights propagated through `T^{k-1}`.
pub fn path_survival(model: &WaveModel, alpha: f64, k: usize, opts: &OperatorOptions) -> Result<f64, PercolationError> {
    if k == 0 {
        return Ok(gaussian_tail(alpha));
    }
    let op = transfer_kernel(model, alpha, opts)?;
    let mut f = vec![1.0; op.size() * op.size()];
    let mut g = vec![0.0; f.len()];
    for _ in 1..k {
        op.apply(&f, &mut g);
        std::mem::swap(&mut f, &mut g);
    }
    Ok(op.pair_weights().iter().zip(&f).map(|(w, x)| w * x).sum())
}

/// Toeplitz covariance `φ(|i-j|)` of `len` consecutive path values.
pub fn path_covariance(model: &WaveModel, len: usize) -> DMatrix<f64> {
    let phis = model.phi_sequence(len.saturating_sub(1));
    DMatrix::from_fn(len, len, |i, j| phis[i.abs_diff(j)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub const MAX_PATH_LENGTH: usize = 32;
const MC_CHUNKS: u64 = 64;

fn check_path_length(k: usize) -> Result<(), PercolationError> {
    if k > MAX_PATH_LENGTH {
        return Err(PercolationError::InvalidParameter(format!("path length k={k} exceeds {MAX_PATH_LENGTH}")));
    }
    Ok(())
}

fn chunk_sizes(n_samples: usize) -> Vec<usize> {
    let chunks = MC_CHUNKS as usize;
    (0..chunks).map(|c| n_samples / chunks + usize::from(c < n_samples % chunks)).collect()
}

/// Hit-or-miss estimate of `P(X_0, …, X_k > α)` for `k+1` path values.
pub fn orthant_mc(
    model: &WaveModel,
    k: usize,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<OrthantEstimate, PercolationError> {
    check_path_length(k)?;
    if n_samples == 0 {
        return Err(PercolationError::InvalidParameter("n_samples must be positive".into()));
    }
    let cov = path_covariance(model, k + 1);
    let factor = pivoted_cholesky(&cov, 1e-10).map_err(WaveError::from)?;
    let hits: usize = chunk_sizes(n_samples)
        .into_par_iter()
        .enumerate()
        .map(|(c, count)| {
            let mut rng = task_rng(seed, c as u64);
            let mut z = vec![0.0; factor.rank()];
            let mut x = vec![0.0; k + 1];
            let mut hits = 0;
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                factor.apply(&z, &mut x);
                if x.iter().all(|&v| v > alpha) {
                    hits += 1;
                }
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let p = hits as f64 / n_samples as f64;
    Ok(OrthantEstimate { estimate: p, stderr: (p * (1.0 - p) / n_samples as f64).sqrt() })
}

/// Sequential-conditioning (GHK) estimates of every prefix probability
/// `P_0, …, P_k` from one set of draws through the Cholesky factor of the
/// full path covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialEstimate {
    n_samples: usize,
    /// `sum_w[m]` and `sum_w2[m]` over samples of the weight after `m+1` coordinates.
    sum_w: Vec<f64>,
    sum_w2: Vec<f64>,
    /// `sum_cross[m] = Σ w_m w_{m-1}` for `m ≥ 1`.
    sum_cross: Vec<f64>,
}

impl SequentialEstimate {
    pub fn prefix(&self, k: usize) -> OrthantEstimate {
        let n = self.n_samples as f64;
        let mean = self.sum_w[k] / n;
        let var = (self.sum_w2[k] / n - mean * mean).max(0.0);
        OrthantEstimate { estimate: mean, stderr: (var / n).sqrt() }
    }

    /// `P̂_k / P̂_{k-1}` with a delta-method standard error.
    pub fn ratio(&self, k: usize) -> OrthantEstimate {
        assert!(k >= 1);
        let n = self.n_samples as f64;
        let (mx, my) = (self.sum_w[k] / n, self.sum_w[k - 1] / n);
        let vx = self.sum_w2[k] / n - mx * mx;
        let vy = self.sum_w2[k - 1] / n - my * my;
        let cxy = self.sum_cross[k] / n - mx * my;
        let r = mx / my;
        let var = (vx - 2.0 * r * cxy + r * r * vy) / (my * my * n);
        OrthantEstimate { estimate: r, stderr: var.max(0.0).sqrt() }
    }
}

pub fn orthant_sequential(
    model: &WaveModel,
    k: usize,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SequentialEstimate, PercolationError> {
    check_path_length(k)?;
    if n_samples == 0 {
        return Err(PercolationError::InvalidParameter("n_samples must be positive".into()));
    }
    let len = k + 1;
    let chol = path_covariance(model, len)
        .cholesky()
        .ok_or(WaveError::NotPsd(crate::linalg::FactorError::NotPsd { index: 0, residual: f64::NAN }))?;
    let l = chol.l();
    let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = chunk_sizes(n_samples)
        .into_par_iter()
        .enumerate()
        .map(|(c, count)| {
            let mut rng = task_rng(seed, c as u64);
            let mut z = vec![0.0; len];
            let (mut s, mut s2, mut sx) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
            for _ in 0..count {
                let mut w = 1.0;
                for i in 0..len {
                    let mean: f64 = (0..i).map(|j| l[(i, j)] * z[j]).sum();
                    let cut = (alpha - mean) / l[(i, i)];
                    let p = gaussian_tail(cut);
                    let prev = w;
                    w *= p;
                    s[i] += w;
                    s2[i] += w * w;
                    if i > 0 {
                        sx[i] += w * prev;
                    }
                    if w == 0.0 {
                        break;
                    }
                    let u: f64 = rng.random::<f64>();
                    z[i] = upper_tail_quantile((u * p).max(f64::MIN_POSITIVE)).max(cut);
                }
            }
            (s, s2, sx)
        })
        .collect();
    let mut est =
        SequentialEstimate { n_samples, sum_w: vec![0.0; len], sum_w2: vec![0.0; len], sum_cross: vec![0.0; len] };
    for (s, s2, sx) in partials {
        for i in 0..len {
            est.sum_w[i] += s[i];
            est.sum_w2[i] += s2[i];
            est.sum_cross[i] += sx[i];
        }
    }
    Ok(est)
}

/// The `z` with `Q(z) = p`: Acklam's rational approximation refined by
/// Halley steps on the exact tail.
pub fn upper_tail_quantile(p: f64) -> f64 {
    -normal_quantile_lower(p)
}

/// Inverse of the lower tail `Φ(x) = p`.
#[allow(clippy::excessive_precision)]
fn normal_quantile_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    let p_low = 0.02425;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        // Φ(x) = Q(-x); work with whichever tail is small for accuracy
        let e = if x < 0.0 { gaussian_tail(-x) - p } else { (1.0 - p) - gaussian_tail(x) };
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalOptions {
    pub tol: f64,
    pub operator: OperatorOptions,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, operator: OperatorOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalResult {
    pub lambda: f64,
    pub d: usize,
    pub alpha_c: f64,
    /// `|r(α_c) - 1/(d-1)|`.
    pub r_residual: f64,
    pub quad_nodes: usize,
    /// Largest truncation used by any probe.
    pub truncation: f64,
    /// Number of growth-rate evaluations.
    pub iterations: usize,
    /// Final bracket `(lo, hi)` around the root.
    pub bracket: (f64, f64),
    pub probes: Vec<(f64, f64)>,
}

/// The analytic bracket `[supercritical(d) - 0.01, subcritical(λ, d) + 0.01]`.
pub fn analytic_bracket(model: &WaveModel) -> Result<(f64, f64), PercolationError> {
    Ok((supercritical_bound(model.d())? - 0.01, model.subcritical_bound() + 0.01))
}

/// Solves `r(α) = 1/(d-1)` by bracketed false position (Illinois variant)
/// with bisection fallback, starting from the analytic bracket.
pub fn critical_alpha(model: &WaveModel, opts: &CriticalOptions) -> Result<CriticalResult, PercolationError> {
    if !(opts.tol > 0.0) {
        return Err(PercolationError::InvalidParameter(format!("tol={} must be positive", opts.tol)));
    }
    let target = 1.0 / (model.d() as f64 - 1.0);
    let (mut lo, mut hi) = analytic_bracket(model)?;
    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut max_trunc: f64 = opts.operator.truncation;
    let mut eval =
        |alpha: f64, probes: &mut Vec<(f64, f64)>, warm: &mut Option<Vec<f64>>| -> Result<f64, PercolationError> {
            let (rate, vec) = growth_rate_with(model, alpha, &opts.operator, warm.as_deref())?;
            max_trunc = max_trunc.max(rate.truncation);
            probes.push((alpha, rate.r));
            *warm = Some(vec);
            Ok(rate.r)
        };
    let mut f_lo = eval(lo, &mut probes, &mut warm)? - target;
    let mut f_hi = eval(hi, &mut probes, &mut warm)? - target;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(PercolationError::BracketFailure { lo, hi, r_lo: f_lo + target, r_hi: f_hi + target, target });
    }
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut side = 0i8;
    for _ in 0..200 {
        if best.1.abs() <= RESIDUAL_TARGET || hi - lo <= opts.tol * 1e-6 {
            break;
        }
        let secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        // fall back to bisection when false position stalls near an end
        let x = if secant.is_finite() && secant > lo + 0.01 * (hi - lo) && secant < hi - 0.01 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fx = eval(x, &mut probes, &mut warm)? - target;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    check_monotone(&probes)?;
    let iterations = probes.len();
    Ok(CriticalResult {
        lambda: model.lambda(),
        d: model.d(),
        alpha_c: best.0,
        r_residual: best.1.abs(),
        quad_nodes: opts.operator.quad_nodes,
        truncation: max_trunc,
        iterations,
        bracket: (lo, hi),
        probes,
    })
}

/// Errors if `r` increases with α anywhere among the probes.
pub fn check_monotone(probes: &[(f64, f64)]) -> Result<(), PercolationError> {
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        let ((a0, r0), (a1, r1)) = (w[0], w[1]);
        if r1 > r0 + 1e-9 * r0.abs().max(1e-300) {
            return Err(PercolationError::NonMonotone { a0, r0, a1, r1 });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub lambda: f64,
    pub result: CriticalResult,
}

/// Critical level at each λ of the grid, which must lie strictly inside the tree spectrum.
pub fn model_curve(d: usize, lambda_grid: &[f64], opts: &CriticalOptions) -> Result<Vec<ModelPoint>, PercolationError> {
    let support = SpectrumSupport::new(d);
    if let Some(bad) = lambda_grid.iter().find(|l| !support.contains_strictly(**l)) {
        return Err(PercolationError::InvalidParameter(format!(
            "lambda={bad} not inside the open interval ({}, {})",
            support.lo, support.hi
        )));
    }
    lambda_grid
        .par_iter()
        .map(|&lambda| {
            let model = WaveModel::new(lambda, d)?;
            Ok(ModelPoint { lambda, result: critical_alpha(&model, opts)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(lambda: f64, d: usize) -> WaveModel {
        WaveModel::new(lambda, d).unwrap()
    }

    #[test]
    fn kernel_at_center() {
        let k = path_kernel(&model(0.0, 3)).unwrap();
        assert!((k.a + 0.5).abs() < 1e-15);
        assert!(k.b.abs() < 1e-15);
        assert!((k.sigma2 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn kernel_normal_equations_and_total_variance() {
        for d in [3, 4, 5, 12] {
            let edge = 2.0 * ((d - 1) as f64).sqrt();
            for i in 0..=10 {
                let m = model(-edge + 2.0 * edge * i as f64 / 10.0, d);
                let k = path_kernel(&m).unwrap();
                assert!((k.a + k.b * k.phi1 - k.phi2).abs() < 1e-12);
                assert!((k.a * k.phi1 + k.b - k.phi1).abs() < 1e-12);
                assert!(k.sigma2 > 0.0 && k.sigma2 <= 1.0);
                assert!(k.phi1.abs() < 1.0);
                // Var(aX₀ + bX₁) + σ² = 1
                let explained = k.a * k.a + k.b * k.b + 2.0 * k.a * k.b * k.phi1;
                assert!((explained + k.sigma2 - 1.0).abs() < 1e-12);
                // the regression is the tree recursion: a = -1/(d-1), b = λ/(d-1)
                assert!((k.a + 1.0 / (d as f64 - 1.0)).abs() < 1e-12);
                assert!((k.b - m.lambda() / (d as f64 - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn band_edge_kernel_is_finite() {
        let m = model(2.0 * 2f64.sqrt(), 3);
        let k = path_kernel(&m).unwrap();
        assert!((k.phi1 - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert!(k.a.is_finite() && k.b.is_finite() && k.sigma2 > 0.0);
    }

    #[test]
    fn quantile_inverts_tail() {
        for &p in &[1e-300, 1e-30, 1e-10, 1e-3, 0.02, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
            let z = upper_tail_quantile(p);
            let back = gaussian_tail(z);
            assert!(((back - p) / p).abs() < 1e-12, "p={p}: z={z} Q(z)={back}");
        }
    }

    #[test]
    fn operator_shape() {
        let op = transfer_kernel(&model(0.0, 3), 0.0, &OperatorOptions { quad_nodes: 32, truncation: 8.0 }).unwrap();
        assert!(op.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(op.weights.iter().all(|&w| w > 0.0));
        assert!(op.min_entry() >= 0.0);
        assert!(op.row_sums().iter().all(|&s| s <= 1.0 + 1e-8));
    }

    #[test]
    fn option_guards() {
        let m = model(0.0, 3);
        assert!(matches!(growth_rate(&m, 0.0, 16, 8.0), Err(PercolationError::InvalidParameter(_))));
        assert!(matches!(growth_rate(&m, 0.0, 64, 4.0), Err(PercolationError::InvalidParameter(_))));
        assert!(matches!(orthant_mc(&m, 33, 0.0, 10, 1), Err(PercolationError::InvalidParameter(_))));
    }

    #[test]
    fn deep_level_survives_almost_surely() {
        let r = growth_rate(&model(0.0, 3), -8.0, 128, 8.0).unwrap();
        assert!((0.999..=1.0 + 1e-9).contains(&r), "r={r}");
    }

    #[test]
    fn survival_small_k() {
        let m = model(0.0, 3);
        let opts = OperatorOptions::default();
        assert!((path_survival(&m, 0.0, 0, &opts).unwrap() - 0.5).abs() < 1e-15);
        // φ(1) = 0 at λ = 0: independent neighbors
        assert!((path_survival(&m, 0.0, 1, &opts).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn monotone_check() {
        assert!(check_monotone(&[(0.0, 0.5), (1.0, 0.4), (-1.0, 0.7)]).is_ok());
        assert!(matches!(check_monotone(&[(0.0, 0.5), (1.0, 0.6)]), Err(PercolationError::NonMonotone { .. })));
    }

    #[test]
    fn model_curve_rejects_edge_grid() {
        let edge = 2.0 * 2f64.sqrt();
        assert!(matches!(
            model_curve(3, &[edge], &CriticalOptions::default()),
            Err(PercolationError::InvalidParameter(_))
        ));
    }
}
