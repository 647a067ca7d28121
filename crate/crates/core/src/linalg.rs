//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

/// Result of a thresholded singular value decomposition.
#[derive(Debug, Clone)]
pub struct Nullspace {
    /// Orthonormal basis of the numerical nullspace, one vector per column.
    pub basis: DMatrix<f64>,
    /// All singular values, sorted in descending order.
    pub singular_values: Vec<f64>,
    /// Absolute threshold that was applied (`rel_tol * sigma_max`).
    pub threshold: f64,
}

impl Nullspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Numerical nullspace of `a`: right singular vectors whose singular value is
/// at most `rel_tol * sigma_max`. Tall matrices are first reduced by QR so the
/// SVD only ever sees a square factor.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> Nullspace {
    let n = a.ncols();
    if n == 0 {
        return Nullspace {
            basis: DMatrix::zeros(0, 0),
            singular_values: Vec::new(),
            threshold: 0.0,
        };
    }
    let square = if a.nrows() > n {
        a.clone().qr().r()
    } else {
        let mut padded = DMatrix::zeros(n, n);
        padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values[0];
    let threshold = rel_tol * sigma_max;

    let null_rows: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] <= threshold)
        .collect();
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (c, &i) in null_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    Nullspace {
        basis,
        singular_values,
        threshold,
    }
}

/// Modified Gram-Schmidt on the given vectors, dropping any whose residual
/// norm falls below `tol`.
pub fn gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
        let norm = w.norm();
        if norm > tol {
            out.push(w / norm);
        }
    }
    out
}

/// Ratio of extreme singular values; infinite for rank-deficient input.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let ns = nullspace(a, 0.0);
    let max = ns.singular_values.first().copied().unwrap_or(0.0);
    let min = ns.singular_values.last().copied().unwrap_or(0.0);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, -2.0, -3.0]);
        let ns = nullspace(&a, 1e-12);
        assert_eq!(ns.dim(), 2);
        let residual = &a * &ns.basis;
        assert!(residual.norm() < 1e-12);
        let gram = ns.basis.transpose() * &ns.basis;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn tall_and_wide_inputs() {
        let tall = DMatrix::from_fn(10, 3, |i, j| if j == 2 { 0.0 } else { (i * (j + 1)) as f64 });
        assert_eq!(nullspace(&tall, 1e-10).dim(), 2);
        let wide = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
        let ns = nullspace(&wide, 1e-10);
        assert_eq!(ns.dim(), 2);
        assert_eq!(ns.singular_values.len(), 3);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let vs = vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![2.0, 2.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0]),
        ];
        let q = gram_schmidt(&vs, 1e-12);
        assert_eq!(q.len(), 2);
        assert!(q[0].dot(&q[1]).abs() < 1e-14);
    }
}
