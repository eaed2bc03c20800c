//! High-accuracy reference optima used for Δ₀ = f(x₀) − f* and R₀ = ‖x₀ − x*‖.

use crate::error::{Error, Result};
use crate::linalg::{self, conjugate_gradient};
use crate::objective::FiniteSum;

#[derive(Debug, Clone)]
pub struct ReferenceOptimum {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `‖∇f(x*)‖` actually reached.
    pub grad_norm: f64,
}

impl ReferenceOptimum {
    /// `f(x₀) − f*`, clamped at zero.
    pub fn delta0(&self, obj: &dyn FiniteSum, x0: &[f64]) -> f64 {
        (obj.value(x0) - self.f_star).max(0.0)
    }

    /// `‖x₀ − x*‖`
    pub fn r0(&self, x0: &[f64]) -> f64 {
        linalg::dist_sq(x0, &self.x_star).sqrt()
    }
}

pub const REFERENCE_GRAD_TOL: f64 = 1e-12;
pub const REFERENCE_MAX_ITERS: usize = 500_000;

/// Reference optimum with the default tolerance `‖∇f‖ ≤ 1e-12`.
///
/// Quadratics are solved by conjugate gradients from `x₀`, which lands on the
/// minimizer closest to `x₀` when the Hessian is singular. Everything else
/// runs Nesterov's method with gradient-based adaptive restart.
pub fn reference_optimum(obj: &dyn FiniteSum, x0: &[f64]) -> Result<ReferenceOptimum> {
    reference_optimum_with(obj, x0, REFERENCE_GRAD_TOL, REFERENCE_MAX_ITERS)
}

pub fn reference_optimum_with(
    obj: &dyn FiniteSum,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<ReferenceOptimum> {
    linalg::check_vector("x0", x0, obj.dim())?;
    let x = match obj.as_quadratic() {
        Some(q) => {
            let mut x = x0.to_vec();
            let h = q.mean_hessian();
            conjugate_gradient(
                |v, out| h.mul_vec_into(v, out),
                q.mean_linear(),
                &mut x,
                tol * 1e-2,
                max_iters.min(50 * obj.dim() + 1000),
            );
            x
        }
        None => restarted_nag(obj, x0, tol, max_iters),
    };
    let grad_norm = linalg::norm(&obj.full_grad(&x));
    let loose = tol.max(1e-8) * obj.smoothness().max(1.0);
    if !grad_norm.is_finite() || grad_norm > loose {
        return Err(Error::invalid(format!(
            "reference solve stalled at gradient norm {grad_norm:e}; the objective may have no minimizer"
        )));
    }
    Ok(ReferenceOptimum {
        f_star: obj.value(&x),
        x_star: x,
        grad_norm,
    })
}

fn restarted_nag(obj: &dyn FiniteSum, x0: &[f64], tol: f64, max_iters: usize) -> Vec<f64> {
    let d = obj.dim();
    let l = obj.smoothness();
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut t = 1.0f64;
    let mut best = x.clone();
    let mut best_norm = f64::INFINITY;
    for _ in 0..max_iters {
        obj.full_grad_into(&y, &mut g);
        let gn = linalg::norm(&g);
        if gn < best_norm {
            best_norm = gn;
            best.copy_from_slice(&y);
        }
        if gn <= tol {
            break;
        }
        x_prev.copy_from_slice(&x);
        for i in 0..d {
            x[i] = y[i] - g[i] / l;
        }
        // Restart momentum when it points uphill.
        let uphill: f64 = (0..d).map(|i| g[i] * (x[i] - x_prev[i])).sum();
        if uphill > 0.0 {
            t = 1.0;
            y.copy_from_slice(&x);
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for i in 0..d {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        t = t_next;
    }
    best
}
