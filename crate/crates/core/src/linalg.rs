//! Symmetric factorizations used by the Gaussian samplers.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("matrix is not positive semidefinite: residual diagonal {residual:e} at index {index}")]
    NotPsd { index: usize, residual: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Residual diagonals below `-NEGATIVE_SLACK * max_diag` mean the input was indefinite.
const NEGATIVE_SLACK: f64 = 1e-8;

/// A factor `L` (n x rank) with `C ≈ L Lᵀ`, stored column by column.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl LowRankFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    /// Writes `L z` into `out`; `z` must have length `rank()`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rank());
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (col, &zk) in self.columns.iter().zip(z) {
            for (o, &l) in out.iter_mut().zip(col) {
                *o += l * zk;
            }
        }
    }

    /// Reconstructs `L Lᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for col in &self.columns {
            for i in 0..self.n {
                if col[i] == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    m[(i, j)] += col[i] * col[j];
                }
            }
        }
        m
    }
}

/// Diagonally pivoted Cholesky. Stops once every remaining residual
/// diagonal is below `tol`, which makes it work for semidefinite input.
pub fn pivoted_cholesky(c: &DMatrix<f64>, tol: f64) -> Result<LowRankFactor, FactorError> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(FactorError::NotSquare { rows: n, cols: c.ncols() });
    }
    let mut residual: Vec<f64> = (0..n).map(|i| c[(i, i)]).collect();
    let max_diag = residual.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
    let mut done = vec![false; n];
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for _ in 0..n {
        let (pivot, &best) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !done[*i])
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("remaining index");
        if best < tol {
            break;
        }
        let root = best.sqrt();
        let mut col = vec![0.0; n];
        col[pivot] = root;
        done[pivot] = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let mut s = c[(i, pivot)];
            for prev in &columns {
                s -= prev[i] * prev[pivot];
            }
            let l = s / root;
            col[i] = l;
            residual[i] -= l * l;
        }
        residual[pivot] = 0.0;
        columns.push(col);
    }

    for i in 0..n {
        if !done[i] && residual[i] < -NEGATIVE_SLACK * max_diag {
            return Err(FactorError::NotPsd { index: i, residual: residual[i] });
        }
    }
    Ok(LowRankFactor { n, columns })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(c: &DMatrix<f64>) -> f64 {
    c.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}
