//! Smooth convex finite-sum objectives `f(x) = (1/n) Σ f_i(x)`.

use crate::data::{SparseDataset, SparseRow};
use crate::error::{Error, Result};
use crate::linalg::{
    self, check_vector, power_iteration, smallest_eigenvalue, DenseMatrix, POWER_ITERATION_MAX_ITERS,
    POWER_ITERATION_TOL,
};

/// A finite sum of `n` convex components, each `L`-smooth with the `L`
/// reported by [`FiniteSum::smoothness`].
///
/// Implementations are immutable and may be shared across threads; all
/// oracle accounting happens in [`crate::CountingOracle`].
pub trait FiniteSum: Send + Sync {
    fn n_components(&self) -> usize;

    fn dim(&self) -> usize;

    /// Smoothness constant shared by every component.
    fn smoothness(&self) -> f64;

    /// Strong-convexity modulus of the average (0 when only convex).
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// `out += alpha * ∇f_i(x)`
    fn accumulate_component_grad(&self, i: usize, x: &[f64], alpha: f64, out: &mut [f64]);

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.accumulate_component_grad(i, x, 1.0, out);
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.n_components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    fn full_grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = self.n_components();
        for i in 0..n {
            self.accumulate_component_grad(i, x, 1.0, out);
        }
        linalg::scale(1.0 / n as f64, out);
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.full_grad_into(x, &mut g);
        g
    }

    /// Quadratic objectives expose their structure so reference optima can
    /// be computed in closed form.
    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticComponent {
    pub hessian: DenseMatrix,
    pub linear: Vec<f64>,
}

/// Average of components `f_i(x) = ½ xᵀA_i x − b_iᵀx` with PSD `A_i`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    components: Vec<QuadraticComponent>,
    mean_hessian: DenseMatrix,
    mean_linear: Vec<f64>,
    smoothness: f64,
    component_smoothness: Vec<f64>,
    min_eigenvalue: f64,
}

/// Relative tolerance below zero tolerated on the smallest eigenvalue.
const PSD_TOL: f64 = 1e-9;

fn check_psd(a: &DenseMatrix, what: &str) -> Result<f64> {
    if !a.is_symmetric(1e-12) {
        return Err(Error::invalid(format!("{what} is not symmetric")));
    }
    let lmax = power_iteration(a, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITERS);
    let scale = a.row(0).len() as f64;
    let frob = (0..a.dim())
        .flat_map(|i| a.row(i).iter().copied())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let lmin = smallest_eigenvalue(a, lmax.max(frob));
    if lmin < -PSD_TOL * frob.max(f64::MIN_POSITIVE) * scale.max(1.0) {
        return Err(Error::invalid(format!(
            "{what} is indefinite (smallest eigenvalue {lmin:e})"
        )));
    }
    Ok(lmax)
}

impl Quadratic {
    pub fn from_components(components: Vec<QuadraticComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("quadratic needs at least one component"))?;
        let d = first.hessian.dim();
        let mut component_smoothness = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if c.hessian.dim() != d {
                return Err(Error::invalid(format!("component {i} has mismatched dimension")));
            }
            check_vector(&format!("linear term of component {i}"), &c.linear, d)?;
            component_smoothness.push(check_psd(&c.hessian, &format!("component {i} Hessian"))?);
        }
        let n = components.len() as f64;
        let mut rows = vec![vec![0.0; d]; d];
        let mut mean_linear = vec![0.0; d];
        for c in &components {
            for (i, row) in rows.iter_mut().enumerate() {
                linalg::axpy(1.0 / n, c.hessian.row(i), row);
            }
            linalg::axpy(1.0 / n, &c.linear, &mut mean_linear);
        }
        let mean_hessian = DenseMatrix::from_rows(&rows)?;
        let lmax_mean = power_iteration(&mean_hessian, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITERS);
        let min_eigenvalue = smallest_eigenvalue(&mean_hessian, lmax_mean).max(0.0);
        let smoothness = component_smoothness.iter().cloned().fold(0.0, f64::max);
        if smoothness <= 0.0 {
            return Err(Error::invalid("quadratic has zero curvature; smoothness must be positive"));
        }
        Ok(Quadratic {
            components,
            mean_hessian,
            mean_linear,
            smoothness,
            component_smoothness,
            min_eigenvalue,
        })
    }

    pub fn components(&self) -> &[QuadraticComponent] {
        &self.components
    }

    pub fn mean_hessian(&self) -> &DenseMatrix {
        &self.mean_hessian
    }

    pub fn mean_linear(&self) -> &[f64] {
        &self.mean_linear
    }

    pub fn component_smoothness(&self) -> &[f64] {
        &self.component_smoothness
    }
}

impl FiniteSum for Quadratic {
    fn n_components(&self) -> usize {
        self.components.len()
    }

    fn dim(&self) -> usize {
        self.mean_linear.len()
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn strong_convexity(&self) -> f64 {
        self.min_eigenvalue
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.components[i];
        let ax = c.hessian.mul_vec(x);
        0.5 * linalg::dot(x, &ax) - linalg::dot(&c.linear, x)
    }

    fn accumulate_component_grad(&self, i: usize, x: &[f64], alpha: f64, out: &mut [f64]) {
        let c = &self.components[i];
        for (j, o) in out.iter_mut().enumerate() {
            *o += alpha * (linalg::dot(c.hessian.row(j), x) - c.linear[j]);
        }
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// Single-component quadratic `½ xᵀAx − bᵀx`; `L` is the largest eigenvalue
/// of `A` by power iteration.
pub fn make_quadratic(a: DenseMatrix, b: Vec<f64>) -> Result<Quadratic> {
    Quadratic::from_components(vec![QuadraticComponent {
        hessian: a,
        linear: b,
    }])
}

/// Least-squares style quadratic with Hessian `A = MᵀM`, split by row blocks.
///
/// The rows of `M` are partitioned into `n` contiguous blocks `B_i` and
/// component `i` gets Hessian `n · M_{B_i}ᵀ M_{B_i}` and linear term `b`, so
/// the components average to `½ xᵀAx − bᵀx`. The reported `L` is the largest
/// component smoothness.
pub fn make_quadratic_row_blocks(m_rows: &[Vec<f64>], b: Vec<f64>, n: usize) -> Result<Quadratic> {
    let d = b.len();
    if n == 0 || m_rows.len() < n {
        return Err(Error::invalid("row-block split needs 1 <= n <= number of rows"));
    }
    if m_rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("row length does not match dimension of b"));
    }
    let rows = m_rows.len();
    let mut components = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = rows / n + usize::from(i < rows % n);
        let block = &m_rows[start..start + len];
        start += len;
        components.push(QuadraticComponent {
            hessian: DenseMatrix::gram(block, d).scaled(n as f64),
            linear: b.clone(),
        });
    }
    Quadratic::from_components(components)
}

/// Binary logistic loss `f_i(x) = log(1 + exp(−b_i⟨a_i, x⟩))`.
#[derive(Debug, Clone)]
pub struct Logistic {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
    smoothness: f64,
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + e^t)` without overflow.
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl Logistic {
    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

/// Logistic regression objective over a dataset; `L = max_i ‖a_i‖² / 4`.
pub fn make_logistic(ds: &SparseDataset) -> Result<Logistic> {
    if let Some(b) = ds.labels().iter().find(|&&b| b != 1.0 && b != -1.0) {
        return Err(Error::invalid(format!("label {b} is not in {{-1, +1}}")));
    }
    let max_row = ds.rows().iter().map(SparseRow::norm_sq).fold(0.0, f64::max);
    if max_row <= 0.0 {
        return Err(Error::invalid("all rows are zero; smoothness would vanish"));
    }
    Ok(Logistic {
        rows: ds.rows().to_vec(),
        labels: ds.labels().to_vec(),
        dim: ds.dim(),
        smoothness: max_row / 4.0,
    })
}

impl FiniteSum for Logistic {
    fn n_components(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.labels[i] * self.rows[i].dot(x))
    }

    fn accumulate_component_grad(&self, i: usize, x: &[f64], alpha: f64, out: &mut [f64]) {
        let b = self.labels[i];
        let margin = b * self.rows[i].dot(x);
        self.rows[i].axpy_into(-alpha * b * sigmoid_neg(margin), out);
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.accumulate_component_grad(i, x, 1.0, out);
    }
}

/// `f^δ(x) = f(x) + (δ/2)‖x − x₀‖²`, applied to every component.
pub struct Regularized<'a> {
    base: &'a dyn FiniteSum,
    anchor: Vec<f64>,
    delta: f64,
}

impl<'a> Regularized<'a> {
    pub fn base(&self) -> &'a dyn FiniteSum {
        self.base
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Recovers `∇f(x) = ∇f^δ(x) − δ(x − x₀)` from a regularized gradient.
    pub fn base_grad_from(&self, x: &[f64], reg_grad: &[f64]) -> Vec<f64> {
        reg_grad
            .iter()
            .zip(x)
            .zip(&self.anchor)
            .map(|((g, xi), ai)| g - self.delta * (xi - ai))
            .collect()
    }
}

impl std::fmt::Debug for Regularized<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Regularized")
            .field("delta", &self.delta)
            .field("dim", &self.anchor.len())
            .finish()
    }
}

pub fn regularize<'a>(base: &'a dyn FiniteSum, anchor: &[f64], delta: f64) -> Result<Regularized<'a>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("regularization δ must be positive, got {delta}")));
    }
    check_vector("anchor", anchor, base.dim())?;
    Ok(Regularized {
        base,
        anchor: anchor.to_vec(),
        delta,
    })
}

impl FiniteSum for Regularized<'_> {
    fn n_components(&self) -> usize {
        self.base.n_components()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn smoothness(&self) -> f64 {
        self.base.smoothness() + self.delta
    }

    fn strong_convexity(&self) -> f64 {
        self.delta
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.base.component_value(i, x) + 0.5 * self.delta * linalg::dist_sq(x, &self.anchor)
    }

    fn accumulate_component_grad(&self, i: usize, x: &[f64], alpha: f64, out: &mut [f64]) {
        self.base.accumulate_component_grad(i, x, alpha, out);
        for ((o, xi), ai) in out.iter_mut().zip(x).zip(&self.anchor) {
            *o += alpha * self.delta * (xi - ai);
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + 0.5 * self.delta * linalg::dist_sq(x, &self.anchor)
    }

    fn full_grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.full_grad_into(x, out);
        for ((o, xi), ai) in out.iter_mut().zip(x).zip(&self.anchor) {
            *o += self.delta * (xi - ai);
        }
    }
}

/// Worst relative error between central differences of `f` along each
/// coordinate and the analytic full gradient.
///
/// Errors are measured relative to `‖∇f(x)‖_∞`, floored at `√ε_mach` so a
/// vanishing gradient does not blow up the ratio.
pub fn finite_difference_check(obj: &dyn FiniteSum, x: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let g = obj.full_grad(x);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::EPSILON.sqrt());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let fp = obj.value(&probe);
        probe[j] = x[j] - h;
        let fm = obj.value(&probe);
        probe[j] = x[j];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / scale);
    }
    worst
}

/// Same check for a single component `f_i`.
pub fn component_finite_difference_check(obj: &dyn FiniteSum, i: usize, x: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut g = vec![0.0; x.len()];
    obj.component_grad_into(i, x, &mut g);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::EPSILON.sqrt());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let fp = obj.component_value(i, &probe);
        probe[j] = x[j] - h;
        let fm = obj.component_value(i, &probe);
        probe[j] = x[j];
        worst = worst.max(((fp - fm) / (2.0 * h) - g[j]).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm, LabelMode};

    fn tiny_dataset() -> SparseDataset {
        parse_libsvm("+1 1:0.5 2:-1\n-1 1:2 3:0.25\n+1 2:1.5 3:-0.5\n".as_bytes(), LabelMode::Strict)
            .unwrap()
    }

    #[test]
    fn logistic_at_origin() {
        let ds = tiny_dataset();
        let f = make_logistic(&ds).unwrap();
        assert!((f.value(&[0.0; 3]) - 2f64.ln()).abs() < 1e-15);
        let g = f.full_grad(&[0.0; 3]);
        let mut expected = vec![0.0; 3];
        for (row, &b) in ds.rows().iter().zip(ds.labels()) {
            row.axpy_into(-b / (2.0 * ds.len() as f64), &mut expected);
        }
        for (a, e) in g.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_scalar_value() {
        let ds = parse_libsvm("+1 1:1\n".as_bytes(), LabelMode::Strict).unwrap();
        let f = make_logistic(&ds).unwrap();
        // log(1 + e^{-10})
        let expected = (-10f64).exp().ln_1p();
        assert!((f.value(&[10.0]) - expected).abs() < 1e-18);
        assert!((f.value(&[10.0]) - 4.5398899e-5).abs() < 1e-12);
        assert!((f.smoothness() - 0.25).abs() < 1e-16);
    }

    #[test]
    fn logistic_extreme_margins_are_finite() {
        let ds = parse_libsvm("+1 1:1\n-1 1:1\n".as_bytes(), LabelMode::Strict).unwrap();
        let f = make_logistic(&ds).unwrap();
        for x in [-1e4, 1e4] {
            assert!(f.value(&[x]).is_finite());
            assert!(f.full_grad(&[x])[0].is_finite());
        }
    }

    #[test]
    fn quadratic_identity() {
        let q = make_quadratic(DenseMatrix::identity(3), vec![0.0; 3]).unwrap();
        assert!((q.smoothness() - 1.0).abs() < 1e-12);
        let x = [1.5, -2.0, 0.25];
        assert_eq!(q.full_grad(&x), x.to_vec());
    }

    #[test]
    fn quadratic_diagonal_spectrum() {
        let q = make_quadratic(DenseMatrix::diagonal(&[1.0, 4.0]), vec![0.0; 2]).unwrap();
        assert!((q.smoothness() - 4.0).abs() < 4e-10);
        assert!((q.strong_convexity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadratic_rejects_bad_matrices() {
        let asym = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(make_quadratic(asym, vec![0.0; 2]).is_err());
        let indef = DenseMatrix::diagonal(&[1.0, -0.5]);
        assert!(make_quadratic(indef, vec![0.0; 2]).is_err());
    }

    #[test]
    fn row_blocks_average_to_gram() {
        let m = vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![1.0, 1.0],
            vec![0.5, -1.0],
            vec![2.0, 0.0],
        ];
        let q = make_quadratic_row_blocks(&m, vec![1.0, -1.0], 2).unwrap();
        let gram = DenseMatrix::gram(&m, 2);
        for i in 0..2 {
            for j in 0..2 {
                assert!((q.mean_hessian().get(i, j) - gram.get(i, j)).abs() < 1e-14);
            }
        }
        let max_comp = q.component_smoothness().iter().cloned().fold(0.0, f64::max);
        assert_eq!(q.smoothness(), max_comp);
    }

    #[test]
    fn regularized_identities() {
        let q = make_quadratic(DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
        let r = regularize(&q, &[0.0, 0.0], 1.0).unwrap();
        let x = [0.5, -3.0];
        assert_eq!(r.full_grad(&x), vec![1.0, -6.0]);
        assert!((r.smoothness() - 2.0).abs() < 1e-12);
        assert_eq!(r.strong_convexity(), 1.0);

        let anchor = [2.0, 1.0];
        let r = regularize(&q, &anchor, 0.3).unwrap();
        assert_eq!(r.value(&anchor), q.value(&anchor));
        assert!(regularize(&q, &anchor, 0.0).is_err());
        assert!(regularize(&q, &anchor, -1.0).is_err());
    }

    #[test]
    fn finite_differences() {
        let q = make_quadratic(DenseMatrix::diagonal(&[1.0, 4.0, 2.0]), vec![1.0, 0.0, -1.0]).unwrap();
        assert!(finite_difference_check(&q, &[0.3, -1.2, 2.0], 1e-3) <= 1e-9);
        let f = make_logistic(&tiny_dataset()).unwrap();
        assert!(finite_difference_check(&f, &[0.0; 3], 1e-6) <= 1e-6);
        for i in 0..3 {
            assert!(component_finite_difference_check(&f, i, &[0.1, -0.4, 0.7], 1e-6) <= 1e-6);
        }
    }
}
