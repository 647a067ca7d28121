//! Central finite differences.
//!
//! First derivatives use the 4th-order five-point stencil at steps `h` and
//! `2h`, combined by one Richardson level into an O(h^6) estimate:
//!
//! ```text
//! D(h)  = (-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / (12 h)
//! D'    = (16 D(h) - D(2h)) / 15
//! ```

use nalgebra::{DMatrix, DVector};

/// Default step for first derivatives of analytic data.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Default outer step for nested (second-order) differentiation.
pub const DEFAULT_OUTER_STEP: f64 = 1e-2;

fn five_point(fp1: &DVector<f64>, fm1: &DVector<f64>, fp2: &DVector<f64>, fm2: &DVector<f64>, h: f64) -> DVector<f64> {
    (fp1 - fm1) * (8.0 / (12.0 * h)) - (fp2 - fm2) * (1.0 / (12.0 * h))
}

/// Derivative at `t = 0` of a vector-valued function of one variable.
pub fn derivative<F>(mut f: F, h: f64) -> DVector<f64>
where
    F: FnMut(f64) -> DVector<f64>,
{
    let p1 = f(h);
    let m1 = f(-h);
    let p2 = f(2.0 * h);
    let m2 = f(-2.0 * h);
    let p4 = f(4.0 * h);
    let m4 = f(-4.0 * h);
    let fine = five_point(&p1, &m1, &p2, &m2, h);
    let coarse = five_point(&p2, &m2, &p4, &m4, 2.0 * h);
    (fine * 16.0 - coarse) / 15.0
}

/// Scalar version of [`derivative`].
pub fn derivative_scalar<F>(mut f: F, h: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    derivative(|t| DVector::from_element(1, f(t)), h)[0]
}

/// Directional derivative of `f` at `p` along `dir`.
pub fn directional<F>(mut f: F, p: &DVector<f64>, dir: &DVector<f64>, h: f64) -> f64
where
    F: FnMut(&DVector<f64>) -> f64,
{
    derivative_scalar(|t| f(&(p + dir * t)), h)
}

/// Partial derivative along coordinate `axis`.
pub fn partial<F>(mut f: F, p: &DVector<f64>, axis: usize, h: f64) -> f64
where
    F: FnMut(&DVector<f64>) -> f64,
{
    derivative_scalar(
        |t| {
            let mut q = p.clone();
            q[axis] += t;
            f(&q)
        },
        h,
    )
}

pub fn gradient<F>(mut f: F, p: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    DVector::from_iterator(p.len(), (0..p.len()).map(|i| partial(&mut f, p, i, h)))
}

/// Jacobian `J[(i, j)] = ∂_j f_i`.
pub fn jacobian<F>(mut f: F, p: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let n = p.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        columns.push(derivative(
            |t| {
                let mut q = p.clone();
                q[j] += t;
                f(&q)
            },
            h,
        ));
    }
    DMatrix::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_derivative_is_sixth_order_accurate() {
        let d = derivative_scalar(|t| (0.3 + t).exp(), 1e-2);
        assert!((d - 0.3_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn error_falls_at_least_eightfold_when_step_halves() {
        let exact = 1.2_f64.cos();
        let e1 = (derivative_scalar(|t| (1.2 + t).sin(), 0.2) - exact).abs();
        let e2 = (derivative_scalar(|t| (1.2 + t).sin(), 0.1) - exact).abs();
        assert!(e1 / e2 > 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn jacobian_of_linear_map() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.5, 0.0]);
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let j = jacobian(|q| &a * q, &p, 1e-3);
        assert!((j - a).norm() < 1e-12);
    }

    #[test]
    fn quartic_polynomials_are_differentiated_exactly() {
        let f = |t: f64| 3.0 * t.powi(4) - t.powi(3) + 2.0 * t;
        let d = derivative_scalar(|t| f(0.7 + t), 0.25);
        let exact = 12.0 * 0.7_f64.powi(3) - 3.0 * 0.49 + 2.0;
        assert!((d - exact).abs() < 1e-12);
    }
}
