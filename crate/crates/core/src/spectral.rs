//! Adjacency eigendecomposition and closed-form spectral references.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("graph with n={n} exceeds the dense decomposition cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("adjacency matrix is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("degree d={d} must be at least 3")]
    DegreeTooSmall { d: usize },
    #[error("eigenvector {index} failed its residual check ({residual:e})")]
    Residual { index: usize, residual: f64 },
}

pub const DEFAULT_SIZE_CAP: usize = 4000;

/// An eigenvalue with its eigenvector scaled so that `Σ f(v)² = n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub vector: Vec<f64>,
    /// `max_v |(A f)(v) - λ f(v)|`.
    pub residual: f64,
}

/// `[-2√(d-1), 2√(d-1)]`, the spectrum of the infinite `d`-regular tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSupport {
    pub lo: f64,
    pub hi: f64,
}

impl SpectrumSupport {
    pub fn new(d: usize) -> Self {
        let hi = 2.0 * ((d as f64) - 1.0).sqrt();
        Self { lo: -hi, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_strictly(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn adjacency_matrix(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            a[(u, v as usize)] = 1.0;
        }
    }
    a
}

pub fn eigendecompose(g: &Graph) -> Result<Vec<EigenPair>, SpectralError> {
    eigendecompose_capped(g, DEFAULT_SIZE_CAP)
}

/// All `n` eigenpairs, ascending in λ, each normalized to `Σ f² = n`.
pub fn eigendecompose_capped(g: &Graph, cap: usize) -> Result<Vec<EigenPair>, SpectralError> {
    let n = g.n();
    if n > cap {
        return Err(SpectralError::TooLarge { n, cap });
    }
    if n == 0 {
        return Err(SpectralError::EmptySpectrum);
    }
    let a = adjacency_matrix(g);
    for i in 0..n {
        for j in 0..i {
            if a[(i, j)] != a[(j, i)] {
                return Err(SpectralError::NotSymmetric { i, j });
            }
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    let scale_target = n as f64;
    let mut pairs = Vec::with_capacity(n);
    for (index, &col) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[col];
        let raw = eig.eigenvectors.column(col);
        let norm2: f64 = raw.iter().map(|x| x * x).sum();
        let scale = (scale_target / norm2).sqrt();
        let vector: Vec<f64> = raw.iter().map(|x| x * scale).collect();
        let residual = residual(g, lambda, &vector);
        let max_abs = vector.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if residual > 1e-8 * (g.d().max(1) as f64) * max_abs {
            return Err(SpectralError::Residual { index, residual });
        }
        pairs.push(EigenPair { lambda, vector, residual });
    }
    Ok(pairs)
}

/// `max_v |Σ_{u~v} f(u) - λ f(v)|`.
pub fn residual(g: &Graph, lambda: f64, f: &[f64]) -> f64 {
    (0..g.n())
        .map(|v| {
            let s: f64 = g.neighbors(v).iter().map(|&u| f[u as usize]).sum();
            (s - lambda * f[v]).abs()
        })
        .fold(0.0, f64::max)
}

/// Kesten–McKay density of the limiting spectrum of random `d`-regular graphs.
pub fn mckay_density(lambda: f64, d: usize) -> Result<f64, SpectralError> {
    if d < 3 {
        return Err(SpectralError::DegreeTooSmall { d });
    }
    let df = d as f64;
    let inner = 4.0 * (df - 1.0) - lambda * lambda;
    if inner <= 0.0 {
        return Ok(0.0);
    }
    Ok(df / (2.0 * std::f64::consts::PI) * inner.sqrt() / (df * df - lambda * lambda))
}

/// Mixing rate `γ = 1 - 2√(d-1)/d` of random walks on typical `d`-regular graphs.
pub fn mixing_exponent(d: usize) -> Result<f64, SpectralError> {
    if d < 3 {
        return Err(SpectralError::DegreeTooSmall { d });
    }
    let df = d as f64;
    Ok(1.0 - 2.0 * (df - 1.0).sqrt() / df)
}

/// The pair whose eigenvalue is closest to `target`; ties go to the smaller λ.
pub fn nearest_eigenpair(pairs: &[EigenPair], target: f64) -> Result<&EigenPair, SpectralError> {
    pairs
        .iter()
        .min_by(|a, b| {
            let da = (a.lambda - target).abs();
            let db = (b.lambda - target).abs();
            da.total_cmp(&db).then(a.lambda.total_cmp(&b.lambda))
        })
        .ok_or(SpectralError::EmptySpectrum)
}

/// Fraction of the Kesten–McKay mass in each of `bins` equal-width bins over
/// the support, by Gauss–Legendre on the angle substitution λ = 2√(d-1) cos θ.
pub fn mckay_bin_masses(d: usize, bins: usize) -> Vec<f64> {
    let support = SpectrumSupport::new(d);
    let width = support.width() / bins as f64;
    let rule = crate::quadrature::gauss_legendre(64);
    (0..bins)
        .map(|b| {
            let lo = support.lo + b as f64 * width;
            let hi = lo + width;
            // θ ranges are reversed relative to λ; density in θ is smooth.
            let t_lo = (hi / support.hi).clamp(-1.0, 1.0).acos();
            let t_hi = (lo / support.hi).clamp(-1.0, 1.0).acos();
            rule.mapped(t_lo, t_hi).integrate(|t| {
                let lam = support.hi * t.cos();
                mckay_density(lam, d).unwrap_or(0.0) * support.hi * t.sin()
            })
        })
        .collect()
}
