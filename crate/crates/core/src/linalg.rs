//! Small dense linear-algebra kernels on `f64` slices.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub(crate) fn check_vector(name: &str, x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::invalid(format!(
            "{name} has dimension {}, expected {dim}",
            x.len()
        )));
    }
    if !all_finite(x) {
        return Err(Error::invalid(format!("{name} contains non-finite entries")));
    }
    Ok(())
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has length {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        if !all_finite(&data) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(DenseMatrix { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in diag.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        DenseMatrix { dim, data }
    }

    /// `Σ_r a_r a_rᵀ` over the given rows (a Gram matrix, always PSD).
    pub fn gram(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for a in rows {
            for i in 0..dim {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    data[i * dim + j] += a[i] * a[j];
                }
            }
        }
        DenseMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.dim).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }
}

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX_ITERS: usize = 10_000;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Stops once the eigen-residual `‖Av − θv‖` falls below `rel_tol · θ`;
/// the Rayleigh quotient error is then of order residual² / gap.
pub fn power_iteration(a: &DenseMatrix, rel_tol: f64, max_iters: usize) -> f64 {
    let d = a.dim();
    // Fixed, non-symmetric start so no eigenvector is orthogonal to it by accident.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64).collect();
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);
    let mut av = vec![0.0; d];
    let mut theta = 0.0;
    for _ in 0..max_iters {
        a.mul_vec_into(&v, &mut av);
        theta = dot(&v, &av);
        let anorm = norm(&av);
        if anorm == 0.0 {
            return 0.0;
        }
        let residual = av
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - theta * y).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= rel_tol * theta.abs() {
            break;
        }
        for (vi, ai) in v.iter_mut().zip(&av) {
            *vi = ai / anorm;
        }
    }
    theta
}

/// Smallest eigenvalue via power iteration on the shifted matrix `λ_max I − A`.
pub fn smallest_eigenvalue(a: &DenseMatrix, lambda_max: f64) -> f64 {
    let d = a.dim();
    let mut shifted = a.scaled(-1.0);
    for i in 0..d {
        shifted.data[i * d + i] += lambda_max;
    }
    lambda_max - power_iteration(&shifted, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITERS)
}

/// Conjugate gradient for a consistent PSD system `Ax = b`, started at `x`.
///
/// Iterates stay in `x₀ + range(A)`, so on a singular but consistent system
/// the limit is the solution closest to the starting point.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> f64 {
    let d = b.len();
    let mut ax = vec![0.0; d];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; d];
    let mut rr = norm_sq(&r);
    for it in 0..max_iters {
        if rr.sqrt() <= tol {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        axpy(step, &p, x);
        // Periodically recompute the true residual to stop drift.
        if it % 50 == 49 {
            apply(x, &mut ax);
            for i in 0..d {
                r[i] = b[i] - ax[i];
            }
        } else {
            axpy(-step, &ap, &mut r);
        }
        let rr_new = norm_sq(&r);
        let beta = rr_new / rr;
        for i in 0..d {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    rr.sqrt()
}
