//! Finite-difference tensor calculus on a coordinate chart.
//!
//! Everything here works with a [`Metric`] given pointwise by its coordinate
//! matrix. Lie derivatives use
//!
//! ```text
//! (L_ξ g)_{μν} = ξ^λ ∂_λ g_{μν} + g_{λν} ∂_μ ξ^λ + g_{μλ} ∂_ν ξ^λ
//! ```
//!
//! with metric derivatives taken by Richardson-extrapolated central
//! differences (see [`crate::fd`]). Curvature nests a second level of
//! differences on top of the Christoffel symbols.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::fd;
use crate::space::{DamekRicciSpace, S0Subframe};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("non-finite value encountered while evaluating {0}")]
    NonFinite(&'static str),
    #[error("metric is singular at the evaluation point")]
    SingularMetric,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("point outside the chart domain: {0}")]
    Domain(String),
}

/// A Riemannian metric on an open subset of `R^n`.
pub trait Metric: Send + Sync {
    fn dim(&self) -> usize;
    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError>;
}

impl Metric for DamekRicciSpace {
    fn dim(&self) -> usize {
        DamekRicciSpace::dim(self)
    }

    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError> {
        DamekRicciSpace::metric_at(self, p).map_err(|e| TensorError::Domain(e.to_string()))
    }
}

/// Adapter turning a closure into a [`Metric`].
pub struct FnMetric<F> {
    dim: usize,
    f: F,
}

impl<F> FnMetric<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Metric for FnMetric<F>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError> {
        Ok((self.f)(p))
    }
}

/// Flat metric on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean(pub usize);

impl Metric for Euclidean {
    fn dim(&self) -> usize {
        self.0
    }

    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError> {
        check_dim(p, self.0)?;
        Ok(DMatrix::identity(self.0, self.0))
    }
}

pub(crate) fn check_dim(p: &DVector<f64>, n: usize) -> Result<(), TensorError> {
    if p.len() != n {
        return Err(TensorError::DimensionMismatch(format!(
            "point has length {}, expected {n}",
            p.len()
        )));
    }
    Ok(())
}

type ComponentFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A vector field given by its coordinate components, optionally with an
/// analytic Jacobian `J[(μ, ν)] = ∂_ν ξ^μ`.
#[derive(Clone)]
pub struct CoordinateVectorField {
    dim: usize,
    components: Arc<ComponentFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl std::fmt::Debug for CoordinateVectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoordinateVectorField")
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl CoordinateVectorField {
    pub fn new<F>(dim: usize, components: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            components: Arc::new(components),
            jacobian: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Constant coordinate field `Σ c_μ ∂_μ`.
    pub fn constant(c: DVector<f64>) -> Self {
        let n = c.len();
        Self::new(n, move |_| c.clone()).with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    /// Linear field `p ↦ M p + b`.
    pub fn affine(m: DMatrix<f64>, b: DVector<f64>) -> Self {
        let n = b.len();
        let jac = m.clone();
        Self::new(n, move |p| &m * p + &b).with_jacobian(move |_| jac.clone())
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, p: &DVector<f64>) -> DVector<f64> {
        (self.components)(p)
    }

    /// Analytic Jacobian when available, central differences otherwise.
    pub fn jacobian_at(&self, p: &DVector<f64>, h: f64) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(p),
            None => self.fd_jacobian(p, h),
        }
    }

    pub fn fd_jacobian(&self, p: &DVector<f64>, h: f64) -> DMatrix<f64> {
        fd::jacobian(|q| self.eval(q), p, h)
    }

    /// Same components, Jacobian forced through finite differences.
    pub fn without_jacobian(&self) -> Self {
        Self {
            dim: self.dim,
            components: self.components.clone(),
            jacobian: None,
        }
    }

    /// Largest entrywise gap between analytic and differenced Jacobians.
    pub fn jacobian_mismatch(&self, p: &DVector<f64>, h: f64) -> Option<f64> {
        let analytic = self.jacobian.as_ref()?(p);
        let numeric = self.fd_jacobian(p, h);
        Some((analytic - numeric).amax())
    }

    pub fn sum(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "fields live on different charts");
        let (a, b) = (self.clone(), other.clone());
        let field = Self::new(self.dim, move |p| a.eval(p) + b.eval(p));
        match (&self.jacobian, &other.jacobian) {
            (Some(ja), Some(jb)) => {
                let (ja, jb) = (ja.clone(), jb.clone());
                field.with_jacobian(move |p| ja(p) + jb(p))
            }
            _ => field,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let a = self.clone();
        let field = Self::new(self.dim, move |p| a.eval(p) * c);
        match &self.jacobian {
            Some(j) => {
                let j = j.clone();
                field.with_jacobian(move |p| j(p) * c)
            }
            None => field,
        }
    }

    /// Pointwise product `f ξ` with a scalar function (FD Jacobian).
    pub fn times_function<F>(&self, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        let a = self.clone();
        Self::new(self.dim, move |p| a.eval(p) * f(p))
    }
}

/// Pointwise conformal defect of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalDefect {
    /// `trace_g(L_ξ g) / (2 n)`.
    pub rho: f64,
    /// `||L_ξ g - 2ρ g||_F` in coordinates.
    pub tracefree_norm: f64,
}

/// `∂_λ g` for every coordinate direction `λ`.
pub fn metric_derivatives(metric: &dyn Metric, p: &DVector<f64>, h: f64) -> Result<Vec<DMatrix<f64>>, TensorError> {
    let n = metric.dim();
    check_dim(p, n)?;
    let mut out = Vec::with_capacity(n);
    for axis in 0..n {
        let mut failure = None;
        let d = fd::derivative(
            |t| {
                let mut q = p.clone();
                q[axis] += t;
                match metric.metric_at(&q) {
                    Ok(g) => DVector::from_column_slice(g.as_slice()),
                    Err(e) => {
                        failure.get_or_insert(e);
                        DVector::from_element(n * n, f64::NAN)
                    }
                }
            },
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite("metric derivative"));
        }
        out.push(DMatrix::from_column_slice(n, n, d.as_slice()));
    }
    Ok(out)
}

/// `L_ξ g` from precomputed pointwise data.
pub fn lie_derivative_from_parts(
    g: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
    xi: &DVector<f64>,
    jac: &DMatrix<f64>,
) -> DMatrix<f64> {
    let gj = g * jac;
    let mut out = &gj + gj.transpose();
    for (lambda, d) in dg.iter().enumerate() {
        if xi[lambda] != 0.0 {
            out += d * xi[lambda];
        }
    }
    out
}

/// Coordinate components of `L_ξ g` at `p`.
pub fn lie_derivative_metric(
    metric: &dyn Metric,
    field: &CoordinateVectorField,
    p: &DVector<f64>,
    h: f64,
) -> Result<DMatrix<f64>, TensorError> {
    let n = metric.dim();
    if field.dim() != n {
        return Err(TensorError::DimensionMismatch(format!(
            "field has dimension {}, metric {n}",
            field.dim()
        )));
    }
    let g = metric.metric_at(p)?;
    let dg = metric_derivatives(metric, p, h)?;
    let xi = field.eval(p);
    let jac = field.jacobian_at(p, h);
    if xi.iter().chain(jac.iter()).any(|x| !x.is_finite()) {
        return Err(TensorError::NonFinite("vector field"));
    }
    Ok(lie_derivative_from_parts(&g, &dg, &xi, &jac))
}

/// Splits a symmetric 2-tensor into its conformal part `2ρ g` and the
/// Frobenius norm of the remainder.
pub fn defect_of(lie: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<ConformalDefect, TensorError> {
    let n = g.nrows();
    let g_inv = g.clone().try_inverse().ok_or(TensorError::SingularMetric)?;
    let rho = (g_inv * lie).trace() / (2.0 * n as f64);
    let tracefree_norm = (lie - g * (2.0 * rho)).norm();
    Ok(ConformalDefect { rho, tracefree_norm })
}

pub fn conformal_defect(
    metric: &dyn Metric,
    field: &CoordinateVectorField,
    p: &DVector<f64>,
    h: f64,
) -> Result<ConformalDefect, TensorError> {
    let lie = lie_derivative_metric(metric, field, p, h)?;
    defect_of(&lie, &metric.metric_at(p)?)
}

/// Residual `||L_{fξ} g - f L_ξ g - 2 sym(df ⊗ ξ♭)||_F` at `p`.
pub fn lie_derivative_identity_check<F>(
    metric: &dyn Metric,
    f: F,
    field: &CoordinateVectorField,
    p: &DVector<f64>,
    h: f64,
) -> Result<f64, TensorError>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync + Clone + 'static,
{
    let product = field.times_function(f.clone());
    let lhs = lie_derivative_metric(metric, &product, p, h)?;
    let base = lie_derivative_metric(metric, field, p, h)?;
    let g = metric.metric_at(p)?;
    let df = fd::gradient(|q| f(q), p, h);
    let flat = &g * field.eval(p);
    let outer = &df * flat.transpose();
    let rhs = base * f(p) + &outer + outer.transpose();
    Ok((lhs - rhs).norm())
}

/// Re-expresses a bilinear form in the frame whose columns are `frame`.
pub fn to_frame_basis(form: &DMatrix<f64>, frame: &DMatrix<f64>) -> DMatrix<f64> {
    frame.transpose() * form * frame
}

/// Names of the `s0` table directions, in table order.
pub const S0_TABLE_NAMES: [&str; 4] = ["V", "J_ZV", "Z", "A"];

/// `L_X g` on `s0` in the orthonormal frame, for `X` running over the
/// left-invariant frame fields `V, J_Z V, Z, A`. Entry `(a, b)` of table `i`
/// pairs the `s0` frame vectors `a` and `b`.
pub fn s0_lie_tables(
    space: &DamekRicciSpace,
    s0: &S0Subframe,
    p: &DVector<f64>,
    h: f64,
) -> Result<[DMatrix<f64>; 4], TensorError> {
    let n = space.dim();
    let frame = space.frame_at(p).map_err(|e| TensorError::Domain(e.to_string()))?;
    let idx = s0.indices();
    let mut out: [DMatrix<f64>; 4] = Default::default();
    for (table, &i) in out.iter_mut().zip(&idx) {
        let sp = space.clone();
        let field = CoordinateVectorField::new(n, move |q| match sp.frame_at(q) {
            Ok(f) => f.column(i).into_owned(),
            Err(_) => DVector::from_element(n, f64::NAN),
        });
        let full = to_frame_basis(&lie_derivative_metric(space, &field, p, h)?, &frame);
        *table = DMatrix::from_fn(4, 4, |a, b| full[(idx[a], idx[b])]);
    }
    Ok(out)
}

/// The exact `s0` tables, from `(L_X g)(Y, W) = -<[X, Y], W> - <Y, [X, W]>`.
pub fn s0_expected_tables() -> [DMatrix<f64>; 4] {
    let sym = |entries: &[(usize, usize, f64)]| {
        let mut m = DMatrix::zeros(4, 4);
        for &(a, b, v) in entries {
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        m
    };
    [
        sym(&[(0, 3, 0.5), (1, 2, -1.0)]),
        sym(&[(0, 2, 1.0), (1, 3, 0.5)]),
        sym(&[(2, 3, 1.0)]),
        sym(&[(0, 0, -1.0), (1, 1, -1.0), (2, 2, -2.0)]),
    ]
}

/// Christoffel symbols `Γ[λ][(μ, ν)] = Γ^λ_{μν}`.
pub fn christoffel(metric: &dyn Metric, p: &DVector<f64>, h: f64) -> Result<Vec<DMatrix<f64>>, TensorError> {
    let n = metric.dim();
    let g = metric.metric_at(p)?;
    let g_inv = g.try_inverse().ok_or(TensorError::SingularMetric)?;
    let dg = metric_derivatives(metric, p, h)?;
    // lowered[σ][(μ, ν)] = ½ (∂_μ g_{σν} + ∂_ν g_{σμ} - ∂_σ g_{μν})
    let mut lowered = vec![DMatrix::zeros(n, n); n];
    for (sigma, low) in lowered.iter_mut().enumerate() {
        for mu in 0..n {
            for nu in 0..n {
                low[(mu, nu)] = 0.5 * (dg[mu][(sigma, nu)] + dg[nu][(sigma, mu)] - dg[sigma][(mu, nu)]);
            }
        }
    }
    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for (lambda, gl) in gamma.iter_mut().enumerate() {
        for (sigma, low) in lowered.iter().enumerate() {
            let c = g_inv[(lambda, sigma)];
            if c != 0.0 {
                *gl += low * c;
            }
        }
    }
    Ok(gamma)
}

/// Riemann and Ricci tensors at a point, from nested differences.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub dim: usize,
    /// `R^ρ_{σμν}` stored at `((ρ n + σ) n + μ) n + ν`, with
    /// `R(∂_μ, ∂_ν) ∂_σ = R^ρ_{σμν} ∂_ρ`.
    pub riemann: Vec<f64>,
    /// `Ric_{σν} = R^ρ_{σρν}`.
    pub ricci: DMatrix<f64>,
    pub metric: DMatrix<f64>,
}

impl Curvature {
    fn r(&self, rho: usize, sigma: usize, mu: usize, nu: usize) -> f64 {
        let n = self.dim;
        self.riemann[((rho * n + sigma) * n + mu) * n + nu]
    }

    /// Sectional curvature of the plane spanned by `x`, `y`.
    pub fn sectional(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let n = self.dim;
        // R(X, Y) Y
        let mut ry = DVector::zeros(n);
        for rho in 0..n {
            let mut acc = 0.0;
            for sigma in 0..n {
                for mu in 0..n {
                    for nu in 0..n {
                        acc += self.r(rho, sigma, mu, nu) * y[sigma] * x[mu] * y[nu];
                    }
                }
            }
            ry[rho] = acc;
        }
        let g = &self.metric;
        let num = (g * ry).dot(x);
        let gxx = (g * x).dot(x);
        let gyy = (g * y).dot(y);
        let gxy = (g * x).dot(y);
        num / (gxx * gyy - gxy * gxy)
    }
}

pub fn curvature_at(metric: &dyn Metric, p: &DVector<f64>, h: f64, h_outer: f64) -> Result<Curvature, TensorError> {
    let n = metric.dim();
    check_dim(p, n)?;
    let gamma = christoffel(metric, p, h)?;
    let flatten = |gam: &[DMatrix<f64>]| -> DVector<f64> {
        DVector::from_iterator(n * n * n, gam.iter().flat_map(|m| m.iter().copied()))
    };
    // dgamma[κ] flattened like `flatten`, entry (λ, μ, ν) at λ n² + μ + ν n.
    let mut dgamma = Vec::with_capacity(n);
    for kappa in 0..n {
        let mut failure = None;
        let d = fd::derivative(
            |t| {
                let mut q = p.clone();
                q[kappa] += t;
                match christoffel(metric, &q, h) {
                    Ok(g) => flatten(&g),
                    Err(e) => {
                        failure.get_or_insert(e);
                        DVector::from_element(n * n * n, f64::NAN)
                    }
                }
            },
            h_outer,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        dgamma.push(d);
    }
    let dg = |kappa: usize, lambda: usize, mu: usize, nu: usize| dgamma[kappa][lambda * n * n + mu + nu * n];
    let gm = |lambda: usize, mu: usize, nu: usize| gamma[lambda][(mu, nu)];

    let mut riemann = vec![0.0; n * n * n * n];
    for rho in 0..n {
        for sigma in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    let mut val = dg(mu, rho, nu, sigma) - dg(nu, rho, mu, sigma);
                    for lambda in 0..n {
                        val +=
                            gm(rho, mu, lambda) * gm(lambda, nu, sigma) - gm(rho, nu, lambda) * gm(lambda, mu, sigma);
                    }
                    riemann[((rho * n + sigma) * n + mu) * n + nu] = val;
                }
            }
        }
    }
    let mut ricci = DMatrix::zeros(n, n);
    for sigma in 0..n {
        for nu in 0..n {
            ricci[(sigma, nu)] = (0..n).map(|rho| riemann[((rho * n + sigma) * n + rho) * n + nu]).sum();
        }
    }
    if riemann.iter().any(|x| !x.is_finite()) {
        return Err(TensorError::NonFinite("curvature"));
    }
    Ok(Curvature {
        dim: n,
        riemann,
        ricci,
        metric: metric.metric_at(p)?,
    })
}

pub fn ricci_at(metric: &dyn Metric, p: &DVector<f64>, h: f64, h_outer: f64) -> Result<DMatrix<f64>, TensorError> {
    Ok(curvature_at(metric, p, h, h_outer)?.ricci)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinReport {
    /// Mean of the pointwise Einstein constants.
    pub lambda: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `lambda_max - lambda_min`.
    pub spread: f64,
    /// Largest `||Ric - λ_p g||_F` over the points.
    pub max_dev: f64,
    /// Largest asymmetry `||Ric - Ric^T||_F` seen.
    pub max_asymmetry: f64,
}

/// Fits `Ric = λ g` pointwise and reports how constant `λ` is.
pub fn einstein_check(
    metric: &dyn Metric,
    points: &[DVector<f64>],
    h: f64,
    h_outer: f64,
) -> Result<EinsteinReport, TensorError> {
    let n = metric.dim() as f64;
    let mut lambdas = Vec::with_capacity(points.len());
    let mut max_dev = 0.0_f64;
    let mut max_asymmetry = 0.0_f64;
    for p in points {
        let curv = curvature_at(metric, p, h, h_outer)?;
        let g = &curv.metric;
        let g_inv = g.clone().try_inverse().ok_or(TensorError::SingularMetric)?;
        let lambda = (&g_inv * &curv.ricci).trace() / n;
        max_dev = max_dev.max((&curv.ricci - g * lambda).norm());
        max_asymmetry = max_asymmetry.max((&curv.ricci - curv.ricci.transpose()).norm());
        lambdas.push(lambda);
    }
    if lambdas.is_empty() {
        return Err(TensorError::DimensionMismatch("no points given".into()));
    }
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EinsteinReport {
        lambda: lambdas.iter().sum::<f64>() / lambdas.len() as f64,
        lambda_min,
        lambda_max,
        spread: lambda_max - lambda_min,
        max_dev,
        max_asymmetry,
    })
}
