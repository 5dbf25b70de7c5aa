//! Superlevel-set sweeps and empirical critical levels.
//!
//! For a function `f` on the vertices, the induced graph at level α keeps the
//! vertices with `f(v) > α`. [`sweep_ratio_curve`] computes the size of the
//! induced graph and of its largest component at every distinct value of `f`
//! in one pass, by inserting vertices in decreasing order of `f` into a
//! union-find.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{generate_regular_with, GenerateOptions, Graph, GraphError};
use crate::seed::derive_seed;
use crate::spectral::{eigendecompose, EigenPair, SpectralError, SpectrumSupport};
use crate::union_find::UnionFind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelSetError {
    #[error("function has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("curve has {points} points, need at least {needed}")]
    TooFewPoints { points: usize, needed: usize },
    #[error("no transition: smoothed curve varies by only {variation:.3}")]
    NoTransition { variation: f64 },
    #[error("smoothing window must be a positive odd integer, got {0}")]
    InvalidWindow(usize),
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Exact largest-component curve of a vertex function.
///
/// Entry `i` describes the induced graph on `{v : f(v) >= thresholds[i]}`,
/// i.e. the state for any α in `[thresholds[i+1], thresholds[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub thresholds: Vec<f64>,
    pub induced_sizes: Vec<usize>,
    pub max_component_sizes: Vec<usize>,
}

impl RatioCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        *self.thresholds.last().expect("nonempty curve")
    }

    pub fn max_value(&self) -> f64 {
        self.thresholds[0]
    }

    /// Induced size and largest component after inserting every vertex with `f(v) > alpha`.
    pub fn state_at(&self, alpha: f64) -> (usize, usize) {
        let k = self.thresholds.partition_point(|&t| t > alpha);
        if k == 0 {
            (0, 0)
        } else {
            (self.induced_sizes[k - 1], self.max_component_sizes[k - 1])
        }
    }
}

pub fn sweep_ratio_curve(g: &Graph, f: &[f64]) -> Result<RatioCurve, LevelSetError> {
    let n = g.n();
    if f.len() != n {
        return Err(LevelSetError::LengthMismatch { expected: n, got: f.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));

    let mut uf = UnionFind::new(n);
    let mut inserted = vec![false; n];
    let mut curve = RatioCurve { thresholds: Vec::new(), induced_sizes: Vec::new(), max_component_sizes: Vec::new() };
    let mut largest = 0;
    for (count, &v) in order.iter().enumerate() {
        inserted[v] = true;
        let mut size = 1;
        for &u in g.neighbors(v) {
            if inserted[u as usize] {
                size = uf.union(v, u as usize);
            }
        }
        largest = largest.max(size);
        let last_of_group = order.get(count + 1).is_none_or(|&w| f[w] != f[v]);
        if last_of_group {
            curve.thresholds.push(f[v]);
            curve.induced_sizes.push(count + 1);
            curve.max_component_sizes.push(largest);
        }
    }
    Ok(curve)
}

/// `|largest component| / |induced graph|` at level α; 0 for an empty induced graph.
pub fn ratio_at(curve: &RatioCurve, alpha: f64) -> f64 {
    match curve.state_at(alpha) {
        (0, _) => 0.0,
        (induced, largest) => largest as f64 / induced as f64,
    }
}

pub const GRID_POINTS: usize = 512;
pub const DEFAULT_WINDOW: usize = 11;
const DESCENT_HIGH: f64 = 0.8;
const DESCENT_LOW: f64 = 0.2;
const MIN_VARIATION: f64 = 0.5;
const REBOUND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEstimate {
    pub alpha_c: f64,
    /// α where the smoothed ratio crosses 0.8 and 0.2 around `alpha_c`
    /// (`window.0 <= alpha_c <= window.1`).
    pub window: (f64, f64),
    pub n_points: usize,
}

impl ThresholdEstimate {
    pub fn window_width(&self) -> f64 {
        self.window.1 - self.window.0
    }
}

pub fn steepest_point(curve: &RatioCurve, smoothing_window: usize) -> Result<ThresholdEstimate, LevelSetError> {
    check_window(curve.len(), smoothing_window)?;
    let (lo, hi) = (curve.min_value(), curve.max_value());
    let grid = uniform_grid(lo, hi);
    let values: Vec<f64> = grid.iter().map(|&a| ratio_at(curve, a)).collect();
    estimate_on_grid(&grid, &values, smoothing_window, curve.len())
}

/// Steepest point of a sampled curve given as ascending `(alpha, ratio)`
/// pairs, read as a right-continuous step function.
pub fn steepest_point_sampled(
    alphas: &[f64],
    ratios: &[f64],
    smoothing_window: usize,
) -> Result<ThresholdEstimate, LevelSetError> {
    if alphas.len() != ratios.len() {
        return Err(LevelSetError::LengthMismatch { expected: alphas.len(), got: ratios.len() });
    }
    check_window(alphas.len(), smoothing_window)?;
    let grid = uniform_grid(alphas[0], alphas[alphas.len() - 1]);
    let values: Vec<f64> = grid
        .iter()
        .map(|&a| {
            let k = alphas.partition_point(|&x| x <= a);
            ratios[k.saturating_sub(1)]
        })
        .collect();
    estimate_on_grid(&grid, &values, smoothing_window, alphas.len())
}

fn check_window(points: usize, window: usize) -> Result<(), LevelSetError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(LevelSetError::InvalidWindow(window));
    }
    let needed = 2 * window;
    if points < needed {
        return Err(LevelSetError::TooFewPoints { points, needed });
    }
    Ok(())
}

fn uniform_grid(lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| if i + 1 == GRID_POINTS { hi } else { lo + step * i as f64 }).collect()
}

/// Centered moving average; the window shrinks symmetrically at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let reach = half.min(i).min(n - 1 - i);
            let slice = &values[i - reach..=i + reach];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

fn estimate_on_grid(
    grid: &[f64],
    values: &[f64],
    window: usize,
    n_points: usize,
) -> Result<ThresholdEstimate, LevelSetError> {
    let smooth = moving_average(values, window);
    let variation: f64 = smooth.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    if variation < MIN_VARIATION {
        return Err(LevelSetError::NoTransition { variation });
    }
    // Search only the first descent. Near max f the induced set is a handful
    // of vertices and the ratio climbs back toward 1; that tail is excluded.
    let end = descent_end(&smooth);
    let slopes: Vec<f64> = (1..end.max(2)).map(|i| (smooth[i + 1] - smooth[i - 1]).abs()).collect();
    let best = slopes.iter().cloned().fold(0.0_f64, f64::max);
    let first = slopes.iter().position(|&s| s >= best * (1.0 - 1e-9)).expect("maximum present");
    let mut last = first;
    while last + 1 < slopes.len() && slopes[last + 1] >= best * (1.0 - 1e-9) {
        last += 1;
    }
    // plateau of equal slopes: take its midpoint
    let center = 1 + first + (last - first) / 2;
    let alpha_c = if (last - first) % 2 == 1 { 0.5 * (grid[center] + grid[center + 1]) } else { grid[center] };

    let lo_window = crossing_left(grid, &smooth, center, DESCENT_HIGH);
    let hi_window = crossing_right(&grid[..=end], &smooth[..=end], center.min(end), DESCENT_LOW);
    Ok(ThresholdEstimate { alpha_c, window: (lo_window.min(alpha_c), hi_window.max(alpha_c)), n_points })
}

/// Index where the first descent bottoms out: from the first point at or below
/// one half, follow the running minimum until the curve rebounds by `REBOUND`.
fn descent_end(s: &[f64]) -> usize {
    let Some(start) = s.iter().position(|&v| v <= 0.5) else {
        return s.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i).clamp(1, s.len() - 2);
    };
    let mut best = start;
    for i in start..s.len() {
        if s[i] < s[best] {
            best = i;
        } else if s[i] > s[best] + REBOUND {
            break;
        }
    }
    best.clamp(1, s.len() - 2)
}

/// Walking left from `start`, the α where the curve rises through `level`.
fn crossing_left(grid: &[f64], s: &[f64], start: usize, level: f64) -> f64 {
    let mut i = start;
    while i > 0 && s[i] < level {
        i -= 1;
    }
    if s[i] < level || i == start {
        return grid[i];
    }
    interpolate(grid[i], s[i], grid[i + 1], s[i + 1], level)
}

/// Walking right from `start`, the α where the curve falls through `level`.
fn crossing_right(grid: &[f64], s: &[f64], start: usize, level: f64) -> f64 {
    let mut i = start;
    while i + 1 < grid.len() && s[i] > level {
        i += 1;
    }
    if s[i] > level || i == start {
        return grid[i];
    }
    interpolate(grid[i - 1], s[i - 1], grid[i], s[i], level)
}

fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Steepest points of `+f` and `-f` for every eigenpair strictly inside the
/// tree spectrum. Sign-flipped samples are returned as separate entries.
/// Vectors whose curves show no transition are skipped and counted.
pub fn eigenvector_thresholds(
    g: &Graph,
    pairs: &[EigenPair],
    smoothing_window: usize,
) -> Result<(Vec<(f64, ThresholdEstimate)>, usize), LevelSetError> {
    let support = SpectrumSupport::new(g.d());
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut flipped = vec![0.0; g.n()];
    for pair in pairs.iter().filter(|p| support.contains_strictly(p.lambda)) {
        for (slot, x) in flipped.iter_mut().zip(&pair.vector) {
            *slot = -x;
        }
        for f in [&pair.vector[..], &flipped[..]] {
            let curve = sweep_ratio_curve(g, f)?;
            match steepest_point(&curve, smoothing_window) {
                Ok(est) => out.push((pair.lambda, est)),
                Err(LevelSetError::NoTransition { .. }) | Err(LevelSetError::TooFewPoints { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((out, skipped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub d: usize,
    pub n: usize,
    pub realizations: usize,
    pub lambda_bins: usize,
    pub seed: u64,
    pub smoothing_window: usize,
    pub generate: GenerateOptions,
}

impl ExperimentParams {
    pub fn new(d: usize, n: usize, realizations: usize, lambda_bins: usize, seed: u64) -> Self {
        Self {
            d,
            n,
            realizations,
            lambda_bins,
            seed,
            smoothing_window: DEFAULT_WINDOW,
            generate: GenerateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalBin {
    pub lambda_center: f64,
    pub alpha_c_mean: f64,
    pub alpha_c_stderr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCurve {
    pub d: usize,
    pub bins: Vec<CriticalBin>,
    /// Eigenvector samples dropped because their curve had no transition.
    pub skipped: usize,
}

type Samples = (Vec<(f64, ThresholdEstimate)>, usize);

/// Per-realization samples: graph `r` uses seed `derive_seed(seed, r)`.
pub fn experiment_samples(params: &ExperimentParams) -> Result<(Vec<(f64, ThresholdEstimate)>, usize), LevelSetError> {
    if params.realizations == 0 || params.n == 0 {
        return Err(LevelSetError::InvalidParameter("n and realizations must be positive".into()));
    }
    let per_graph: Vec<Result<Samples, LevelSetError>> = (0..params.realizations)
        .into_par_iter()
        .map(|r| {
            let g = generate_regular_with(params.n, params.d, derive_seed(params.seed, r as u64), &params.generate)?;
            let pairs = eigendecompose(&g)?;
            eigenvector_thresholds(&g, &pairs, params.smoothing_window)
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = 0;
    for item in per_graph {
        let (s, k) = item?;
        samples.extend(s);
        skipped += k;
    }
    Ok((samples, skipped))
}

/// Bins samples by λ into equal-width bins over the tree spectrum.
pub fn bin_samples(d: usize, lambda_bins: usize, samples: &[(f64, f64)]) -> Vec<CriticalBin> {
    let support = SpectrumSupport::new(d);
    let width = support.width() / lambda_bins as f64;
    let mut sums = vec![(0usize, 0.0f64, 0.0f64); lambda_bins];
    for &(lambda, alpha) in samples {
        let b = (((lambda - support.lo) / width).floor() as isize).clamp(0, lambda_bins as isize - 1) as usize;
        sums[b].0 += 1;
        sums[b].1 += alpha;
        sums[b].2 += alpha * alpha;
    }
    sums.iter()
        .enumerate()
        .map(|(b, &(count, s, s2))| {
            let lambda_center = support.lo + (b as f64 + 0.5) * width;
            let mean = if count > 0 { s / count as f64 } else { f64::NAN };
            let stderr = if count > 1 {
                let var = ((s2 - s * s / count as f64) / (count as f64 - 1.0)).max(0.0);
                (var / count as f64).sqrt()
            } else {
                f64::NAN
            };
            CriticalBin { lambda_center, alpha_c_mean: mean, alpha_c_stderr: stderr, count }
        })
        .collect()
}

pub fn critical_curve_experiment(params: &ExperimentParams) -> Result<CriticalCurve, LevelSetError> {
    if params.lambda_bins == 0 {
        return Err(LevelSetError::InvalidParameter("lambda_bins must be positive".into()));
    }
    let (samples, skipped) = experiment_samples(params)?;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|(l, e)| (*l, e.alpha_c)).collect();
    Ok(CriticalCurve { d: params.d, bins: bin_samples(params.d, params.lambda_bins, &pairs), skipped })
}
