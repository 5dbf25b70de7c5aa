//! The Gaussian wave process on the `d`-regular tree.
//!
//! For λ in the tree spectrum the process has covariance
//! `Cov(ψ(v), ψ(v')) = φ(|v - v'|)`, with `φ` built from Chebyshev
//! polynomials of the second kind. Almost every realization is a
//! λ-eigenfunction of the tree adjacency, and `Var ψ(v) = 1`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{pivoted_cholesky, FactorError};
use crate::seed::rng_from_seed;
use crate::spectral::SpectrumSupport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("Chebyshev argument {0} outside [-1, 1]")]
    DomainError(f64),
    #[error("Chebyshev index {0} below -2")]
    IndexError(i64),
    #[error("lambda={lambda} lies outside the tree spectrum [-{edge}, {edge}] for d={d}")]
    OutsideSpectrum { lambda: f64, d: usize, edge: f64 },
    #[error("degree d={d} must be at least 3")]
    DegreeTooSmall { d: usize },
    #[error("ball of radius {radius} has {size} vertices, above the cap of {cap}")]
    BallTooLarge { radius: usize, size: usize, cap: usize },
    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(#[from] FactorError),
}

const CHEBYSHEV_SLACK: f64 = 1e-12;

/// `U_k(x)` by the three-term recurrence, with `U_{-2} = -1`, `U_{-1} = 0`.
pub fn chebyshev_u(k: i64, x: f64) -> Result<f64, WaveError> {
    if k < -2 {
        return Err(WaveError::IndexError(k));
    }
    if !(x.abs() <= 1.0 + CHEBYSHEV_SLACK) {
        return Err(WaveError::DomainError(x));
    }
    let x = x.clamp(-1.0, 1.0);
    Ok(match k {
        -2 => -1.0,
        -1 => 0.0,
        _ => {
            let (mut prev, mut cur) = (0.0, 1.0);
            for _ in 0..k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveModel {
    lambda: f64,
    d: usize,
}

impl WaveModel {
    pub fn new(lambda: f64, d: usize) -> Result<Self, WaveError> {
        if d < 3 {
            return Err(WaveError::DegreeTooSmall { d });
        }
        let edge = SpectrumSupport::new(d).hi;
        if !(lambda.abs() <= edge * (1.0 + CHEBYSHEV_SLACK)) {
            return Err(WaveError::OutsideSpectrum { lambda, d, edge });
        }
        Ok(Self { lambda, d })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn scaled_argument(&self) -> f64 {
        (self.lambda / (2.0 * (self.d as f64 - 1.0).sqrt())).clamp(-1.0, 1.0)
    }

    /// `φ(k) = (d-1)^{-k/2} ((d-1)/d U_k(x) - U_{k-2}(x)/d)`, `x = λ / 2√(d-1)`.
    pub fn phi(&self, k: usize) -> f64 {
        let x = self.scaled_argument();
        let df = self.d as f64;
        let uk = chebyshev_u(k as i64, x).expect("argument clamped");
        let uk2 = chebyshev_u(k as i64 - 2, x).expect("argument clamped");
        (df - 1.0).powf(-(k as f64) / 2.0) * ((df - 1.0) / df * uk - uk2 / df)
    }

    /// `φ(0..=k_max)`, sharing one Chebyshev recurrence.
    pub fn phi_sequence(&self, k_max: usize) -> Vec<f64> {
        let x = self.scaled_argument();
        let df = self.d as f64;
        let shrink = (df - 1.0).sqrt().recip();
        let mut out = Vec::with_capacity(k_max + 1);
        // u[0] = U_{k-2}, u[1] = U_{k-1}, u[2] = U_k
        let (mut u_m2, mut u_m1, mut u_k) = (-1.0, 0.0, 1.0);
        let mut scale = 1.0;
        for _ in 0..=k_max {
            out.push(scale * ((df - 1.0) / df * u_k - u_m2 / df));
            let next = 2.0 * x * u_k - u_m1;
            u_m2 = u_m1;
            u_m1 = u_k;
            u_k = next;
            scale *= shrink;
        }
        out
    }

    /// `Φ = φ(0) + 2 Σ_{j≥1} |φ(j)|`, truncated once the tail bound
    /// `(k+1)(d-1)^{-k/2}(1 + 1/(d-1))` is below 1e-14; the truncated tail is
    /// then added as twice that bound.
    pub fn phi_total(&self) -> f64 {
        let df = self.d as f64;
        let tail = |k: usize| (k as f64 + 1.0) * (df - 1.0).powf(-(k as f64) / 2.0) * (1.0 + 1.0 / (df - 1.0));
        let mut k_stop = 1;
        while tail(k_stop) >= 1e-14 {
            k_stop += 1;
        }
        let phis = self.phi_sequence(k_stop);
        let body: f64 = phis[1..k_stop].iter().map(|p| p.abs()).sum();
        phis[0] + 2.0 * body + 2.0 * tail(k_stop)
    }

    /// Above this level all level sets are finite: `√(2 Φ ln(d-1))`.
    pub fn subcritical_bound(&self) -> f64 {
        (2.0 * self.phi_total() * (self.d as f64 - 1.0).ln()).sqrt()
    }
}

/// Standard normal upper tail `Q(α) = P(Z > α)`.
pub fn gaussian_tail(alpha: f64) -> f64 {
    0.5 * libm::erfc(alpha / std::f64::consts::SQRT_2)
}

/// The α with `Q(α) = d / (2(d-1))`; below it the vertex survival
/// probability guarantees an infinite level set.
pub fn supercritical_bound(d: usize) -> Result<f64, WaveError> {
    if d < 3 {
        return Err(WaveError::DegreeTooSmall { d });
    }
    let df = d as f64;
    let target = df / (2.0 * (df - 1.0));
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gaussian_tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `C[i][j] = φ(distance[i][j])`.
pub fn covariance_matrix(model: &WaveModel, distances: &[Vec<usize>]) -> DMatrix<f64> {
    let n = distances.len();
    let k_max = distances.iter().flatten().cloned().max().unwrap_or(0);
    let phis = model.phi_sequence(k_max);
    DMatrix::from_fn(n, n, |i, j| phis[distances[i][j]])
}

/// A ball in the `d`-regular tree, vertices in breadth-first creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBall {
    pub d: usize,
    pub radius: usize,
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<usize>,
}

pub const MAX_BALL_SIZE: usize = 4096;

pub fn ball_size(d: usize, radius: usize) -> usize {
    if radius == 0 {
        return 1;
    }
    1 + d * ((d - 1).pow(radius as u32) - 1) / (d - 2)
}

impl TreeBall {
    pub fn new(d: usize, radius: usize) -> Self {
        let mut parent = vec![None];
        let mut depth = vec![0];
        let mut frontier = vec![0usize];
        for r in 1..=radius {
            let mut next = Vec::new();
            for &v in &frontier {
                let children = if v == 0 { d } else { d - 1 };
                for _ in 0..children {
                    parent.push(Some(v));
                    depth.push(r);
                    next.push(parent.len() - 1);
                }
            }
            frontier = next;
        }
        Self { d, radius, parent, depth }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn sphere_size(&self, k: usize) -> usize {
        self.depth.iter().filter(|&&r| r == k).count()
    }

    pub fn distance(&self, mut a: usize, mut b: usize) -> usize {
        let mut steps = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root");
            steps += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root");
            steps += 1;
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
            steps += 2;
        }
        steps
    }

    pub fn distance_matrix(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.distance(i, j)).collect()).collect()
    }

    /// Tree neighbors of `v` inside the ball.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.parent[v].into_iter().collect();
        out.extend((0..self.len()).filter(|&u| self.parent[u] == Some(v)));
        out
    }
}

#[derive(Debug, Clone)]
pub struct WaveSampleBatch {
    pub ball: TreeBall,
    /// One row per sample, one column per ball vertex.
    pub values: Vec<Vec<f64>>,
    pub lambda: f64,
    pub d: usize,
    pub seed: u64,
}

const FACTOR_TOL: f64 = 1e-10;

/// Exact samples of the process restricted to a ball, via a pivoted
/// Cholesky factor of the ball covariance.
pub fn sample_ball(model: &WaveModel, radius: usize, count: usize, seed: u64) -> Result<WaveSampleBatch, WaveError> {
    let size = ball_size(model.d(), radius);
    if size > MAX_BALL_SIZE {
        return Err(WaveError::BallTooLarge { radius, size, cap: MAX_BALL_SIZE });
    }
    let ball = TreeBall::new(model.d(), radius);
    let cov = covariance_matrix(model, &ball.distance_matrix());
    let factor = pivoted_cholesky(&cov, FACTOR_TOL)?;
    let mut rng = rng_from_seed(seed);
    let mut z = vec![0.0; factor.rank()];
    let values = (0..count)
        .map(|_| {
            z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let mut row = vec![0.0; ball.len()];
            factor.apply(&z, &mut row);
            row
        })
        .collect();
    Ok(WaveSampleBatch { ball, values, lambda: model.lambda(), d: model.d(), seed })
}

impl WaveSampleBatch {
    /// Largest `|Σ_{u~v} ψ(u) - λ ψ(v)|` over samples and vertices of depth below the radius.
    pub fn interior_residual(&self) -> f64 {
        let interior: Vec<(usize, Vec<usize>)> = (0..self.ball.len())
            .filter(|&v| self.ball.depth[v] < self.ball.radius)
            .map(|v| (v, self.ball.neighbors(v)))
            .collect();
        let mut worst = 0.0_f64;
        for row in &self.values {
            for (v, nb) in &interior {
                let s: f64 = nb.iter().map(|&u| row[u]).sum();
                worst = worst.max((s - self.lambda * row[*v]).abs());
            }
        }
        worst
    }
}
