//! Explicit conformal fields on the simply connected space forms.
//!
//! * Euclidean space: `ξ(x) = a + A x + b₁ x + ½|x|² b₂ - <b₂, x> x`,
//!   potential `b₁ - <b₂, x>`.
//! * Unit sphere, in the stereographic chart from the north pole: the
//!   ambient field `ξ(x) = A x + b - <b, x> x` pushed forward to the chart,
//!   potential `-<b, x>`.
//! * Hyperbolic space in the upper half-space model `(x, y)`, `y > 0`:
//!   `ξ = (a₀, b₀) + [[A, -b₁], [b₁ᵀ, 0]] (x, y) + a₁ (x, y)
//!   + (|x|² + y²)(a₂, b₂) - 2 <(a₂, b₂), (x, y)> (x, y)`,
//!   potential `-(b₀ + <x, b₁> + b₂ (|x|² + y²)) / y`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{self, check_dim, CoordinateVectorField, Metric, TensorError};

/// Chart points with `|u|` beyond this are too close to the projection pole.
pub const POLE_RADIUS: f64 = 1e3;

const SKEW_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceFormError {
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rotation parameter is not skew-symmetric (deviation {0:e})")]
    NotSkew(f64),
    #[error("chart point too close to the projection pole (|u| = {0})")]
    ChartPole(f64),
    #[error("half-space point must have y > 0, got {0}")]
    NonPositiveY(f64),
    #[error("dimension {0} is not supported for this model")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Potential = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Model space and its chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Euclidean,
    SphereStereographic,
    HyperbolicHalfspace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanParams {
    pub a: Vec<f64>,
    /// Skew matrix, row-major.
    pub rot: Vec<Vec<f64>>,
    pub b1: f64,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    /// Skew `(n+1)×(n+1)` matrix, row-major.
    pub rot: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicParams {
    pub a0: Vec<f64>,
    pub b0: f64,
    /// Skew `(n-1)×(n-1)` matrix, row-major.
    pub rot: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub a1: f64,
    pub a2: Vec<f64>,
    pub b2: f64,
}

/// A parametrised conformal field on one of the model spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpaceFormField {
    Euclidean(EuclideanParams),
    SphereStereographic(SphereParams),
    HyperbolicHalfspace(HyperbolicParams),
}

/// Round metric `4 (1 + |u|²)^{-2} δ` in the stereographic chart.
#[derive(Debug, Clone, Copy)]
pub struct StereographicSphere(pub usize);

impl Metric for StereographicSphere {
    fn dim(&self) -> usize {
        self.0
    }

    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError> {
        check_dim(p, self.0)?;
        let r = p.norm();
        if !(r <= POLE_RADIUS) {
            return Err(TensorError::Domain(SpaceFormError::ChartPole(r).to_string()));
        }
        let s = 2.0 / (1.0 + r * r);
        Ok(DMatrix::identity(self.0, self.0) * (s * s))
    }
}

/// Hyperbolic metric `y^{-2} δ` on the upper half-space; `y` is the last
/// coordinate.
#[derive(Debug, Clone, Copy)]
pub struct HalfSpace(pub usize);

impl Metric for HalfSpace {
    fn dim(&self) -> usize {
        self.0
    }

    fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, TensorError> {
        check_dim(p, self.0)?;
        let y = p[self.0 - 1];
        if !(y > 0.0) {
            return Err(TensorError::Domain(SpaceFormError::NonPositiveY(y).to_string()));
        }
        Ok(DMatrix::identity(self.0, self.0) / (y * y))
    }
}

impl Model {
    pub fn metric(self, n: usize) -> Box<dyn Metric> {
        match self {
            Model::Euclidean => Box::new(tensor::Euclidean(n)),
            Model::SphereStereographic => Box::new(StereographicSphere(n)),
            Model::HyperbolicHalfspace => Box::new(HalfSpace(n)),
        }
    }

    /// Checks a chart point against the model's domain.
    pub fn check_point(self, p: &DVector<f64>) -> Result<(), SpaceFormError> {
        match self {
            Model::Euclidean => Ok(()),
            Model::SphereStereographic => {
                let r = p.norm();
                if r > POLE_RADIUS {
                    Err(SpaceFormError::ChartPole(r))
                } else {
                    Ok(())
                }
            }
            Model::HyperbolicHalfspace => {
                let y = p[p.len() - 1];
                if y > 0.0 {
                    Ok(())
                } else {
                    Err(SpaceFormError::NonPositiveY(y))
                }
            }
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, SpaceFormError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(SpaceFormError::ShapeMismatch(format!("{what} must be {n}x{n}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let m = DMatrix::from_row_slice(n, n, &flat);
    let dev = (&m + m.transpose()).amax();
    if dev > SKEW_TOL {
        return Err(SpaceFormError::NotSkew(dev));
    }
    Ok(m)
}

fn to_vector(xs: &[f64], n: usize, what: &str) -> Result<DVector<f64>, SpaceFormError> {
    if xs.len() != n {
        return Err(SpaceFormError::ShapeMismatch(format!(
            "{what} has length {}, expected {n}",
            xs.len()
        )));
    }
    Ok(DVector::from_column_slice(xs))
}

impl SpaceFormField {
    pub fn model(&self) -> Model {
        match self {
            SpaceFormField::Euclidean(_) => Model::Euclidean,
            SpaceFormField::SphereStereographic(_) => Model::SphereStereographic,
            SpaceFormField::HyperbolicHalfspace(_) => Model::HyperbolicHalfspace,
        }
    }

    /// Chart dimension implied by the parameters.
    pub fn dim(&self) -> usize {
        match self {
            SpaceFormField::Euclidean(p) => p.a.len(),
            SpaceFormField::SphereStereographic(p) => p.b.len().saturating_sub(1),
            SpaceFormField::HyperbolicHalfspace(p) => p.a0.len() + 1,
        }
    }

    /// The field with its closed-form potential.
    pub fn build(&self) -> Result<(CoordinateVectorField, Potential), SpaceFormError> {
        match self {
            SpaceFormField::Euclidean(p) => euclidean_field(p),
            SpaceFormField::SphereStereographic(p) => sphere_field(p),
            SpaceFormField::HyperbolicHalfspace(p) => hyperbolic_field(p),
        }
    }

    /// Random parameters with entries uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(model: Model, n: usize, rng: &mut R) -> Self {
        let mut vec = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let skew = |vals: Vec<f64>, len: usize| -> Vec<Vec<f64>> {
            let mut m = vec![vec![0.0; len]; len];
            let mut it = vals.into_iter();
            #[allow(clippy::needless_range_loop)]
            for i in 0..len {
                for j in (i + 1)..len {
                    let x = it.next().unwrap();
                    m[i][j] = x;
                    m[j][i] = -x;
                }
            }
            m
        };
        let pairs = |len: usize| len * len.saturating_sub(1) / 2;
        match model {
            Model::Euclidean => {
                let a = vec(n);
                let rot = skew(vec(pairs(n)), n);
                let b1 = vec(1)[0];
                let b2 = vec(n);
                SpaceFormField::Euclidean(EuclideanParams { a, rot, b1, b2 })
            }
            Model::SphereStereographic => {
                let rot = skew(vec(pairs(n + 1)), n + 1);
                let b = vec(n + 1);
                SpaceFormField::SphereStereographic(SphereParams { rot, b })
            }
            Model::HyperbolicHalfspace => {
                let a0 = vec(n - 1);
                let b0 = vec(1)[0];
                let rot = skew(vec(pairs(n - 1)), n - 1);
                let b1 = vec(n - 1);
                let a1 = vec(1)[0];
                let a2 = vec(n - 1);
                let b2 = vec(1)[0];
                SpaceFormField::HyperbolicHalfspace(HyperbolicParams {
                    a0,
                    b0,
                    rot,
                    b1,
                    a1,
                    a2,
                    b2,
                })
            }
        }
    }
}

pub fn euclidean_field(params: &EuclideanParams) -> Result<(CoordinateVectorField, Potential), SpaceFormError> {
    let n = params.a.len();
    if n == 0 {
        return Err(SpaceFormError::UnsupportedDimension(0));
    }
    let a = to_vector(&params.a, n, "a")?;
    let rot = to_matrix(&params.rot, n, "A")?;
    let b1 = params.b1;
    let b2 = to_vector(&params.b2, n, "b2")?;

    let (rot_j, b2_j) = (rot.clone(), b2.clone());
    let b2_p = b2.clone();
    let field = CoordinateVectorField::new(n, move |x| {
        &a + &rot * x + x * b1 + &b2 * (0.5 * x.norm_squared()) - x * b2.dot(x)
    })
    .with_jacobian(move |x| {
        let eye = DMatrix::<f64>::identity(n, n);
        &rot_j + &eye * (b1 - b2_j.dot(x)) + &b2_j * x.transpose() - x * b2_j.transpose()
    });
    let potential: Potential = Arc::new(move |x| b1 - b2_p.dot(x));
    Ok((field, potential))
}

/// Inverse stereographic projection from the north pole.
pub fn chart_to_sphere(u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    let s = u.norm_squared();
    let mut x = DVector::zeros(n + 1);
    for i in 0..n {
        x[i] = 2.0 * u[i] / (1.0 + s);
    }
    x[n] = (s - 1.0) / (1.0 + s);
    x
}

pub fn sphere_field(params: &SphereParams) -> Result<(CoordinateVectorField, Potential), SpaceFormError> {
    let n1 = params.b.len();
    if n1 < 3 {
        return Err(SpaceFormError::UnsupportedDimension(n1.saturating_sub(1)));
    }
    let n = n1 - 1;
    let rot = to_matrix(&params.rot, n1, "A")?;
    let b = to_vector(&params.b, n1, "b")?;
    let bp = b.clone();
    let field = CoordinateVectorField::new(n, move |u| {
        let x = chart_to_sphere(u);
        let amb = &rot * &x + &b - &x * b.dot(&x);
        // u = x' / (1 - t) with t = x_{n+1}
        let one_minus_t = 1.0 - x[n];
        let xt = amb[n];
        DVector::from_iterator(
            n,
            (0..n).map(|i| amb[i] / one_minus_t + x[i] * xt / (one_minus_t * one_minus_t)),
        )
    });
    let potential: Potential = Arc::new(move |u| -bp.dot(&chart_to_sphere(u)));
    Ok((field, potential))
}

pub fn hyperbolic_field(params: &HyperbolicParams) -> Result<(CoordinateVectorField, Potential), SpaceFormError> {
    let nm1 = params.a0.len();
    if nm1 == 0 {
        return Err(SpaceFormError::UnsupportedDimension(1));
    }
    let n = nm1 + 1;
    let a0 = to_vector(&params.a0, nm1, "a0")?;
    let rot = to_matrix(&params.rot, nm1, "A")?;
    let b1 = to_vector(&params.b1, nm1, "b1")?;
    let a2 = to_vector(&params.a2, nm1, "a2")?;
    let (b0, a1, b2) = (params.b0, params.a1, params.b2);

    let mut c = DVector::zeros(n);
    c.rows_mut(0, nm1).copy_from(&a0);
    c[nm1] = b0;
    let mut middle = DMatrix::zeros(n, n);
    middle.view_mut((0, 0), (nm1, nm1)).copy_from(&rot);
    for i in 0..nm1 {
        middle[(i, nm1)] = -b1[i];
        middle[(nm1, i)] = b1[i];
    }
    let mut big_b = DVector::zeros(n);
    big_b.rows_mut(0, nm1).copy_from(&a2);
    big_b[nm1] = b2;

    let (middle_j, big_b_j) = (middle.clone(), big_b.clone());
    let field = CoordinateVectorField::new(n, move |p| {
        &c + &middle * p + p * a1 + &big_b * p.norm_squared() - p * (2.0 * big_b.dot(p))
    })
    .with_jacobian(move |p| {
        let eye = DMatrix::<f64>::identity(n, n);
        &middle_j + &eye * (a1 - 2.0 * big_b_j.dot(p)) + &big_b_j * (2.0 * p.transpose())
            - p * (2.0 * big_b_j.transpose())
    });
    let potential: Potential = Arc::new(move |p| {
        let y = p[nm1];
        let x = p.rows(0, nm1);
        -(b0 + x.dot(&b1) + b2 * p.norm_squared()) / y
    });
    Ok((field, potential))
}

/// Worst-case agreement of a field with its closed-form potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceFormCheck {
    pub max_tracefree_norm: f64,
    pub max_rho_error: f64,
    pub points: usize,
}

pub fn verify_field(field: &SpaceFormField, points: &[DVector<f64>], h: f64) -> Result<SpaceFormCheck, SpaceFormError> {
    let model = field.model();
    let metric = model.metric(field.dim());
    let (xi, potential) = field.build()?;
    let mut out = SpaceFormCheck {
        max_tracefree_norm: 0.0,
        max_rho_error: 0.0,
        points: points.len(),
    };
    for p in points {
        model.check_point(p)?;
        let d = tensor::conformal_defect(metric.as_ref(), &xi, p, h)?;
        out.max_tracefree_norm = out.max_tracefree_norm.max(d.tracefree_norm);
        out.max_rho_error = out.max_rho_error.max((d.rho - potential(p)).abs());
    }
    Ok(out)
}

/// Sample points inside the default verification box of each model.
pub fn sample_points<R: Rng + ?Sized>(model: Model, n: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| {
            DVector::from_iterator(
                n,
                (0..n).map(|i| match model {
                    Model::Euclidean => rng.random_range(-1.0..1.0),
                    Model::SphereStereographic => rng.random_range(-2.0..2.0),
                    Model::HyperbolicHalfspace if i == n - 1 => rng.random_range(0.5..2.0),
                    Model::HyperbolicHalfspace => rng.random_range(-1.0..1.0),
                }),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::DEFAULT_STEP;
    use crate::tensor::conformal_defect;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn zeros(n: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; n]; n]
    }

    fn euclid(a: Vec<f64>, b1: f64, b2: Vec<f64>) -> EuclideanParams {
        let n = a.len();
        EuclideanParams {
            a,
            rot: zeros(n),
            b1,
            b2,
        }
    }

    fn defect(field: &SpaceFormField, p: &DVector<f64>) -> (f64, f64, f64) {
        let (xi, pot) = field.build().unwrap();
        let m = field.model().metric(field.dim());
        let d = conformal_defect(m.as_ref(), &xi, p, DEFAULT_STEP).unwrap();
        (d.rho, d.tracefree_norm, pot(p))
    }

    #[test]
    fn translation_has_zero_potential() {
        let f = SpaceFormField::Euclidean(euclid(vec![1.0, 0.0, 0.0], 0.0, vec![0.0; 3]));
        let (rho, tf, formula) = defect(&f, &v(&[0.3, 0.2, 0.1]));
        assert!(rho.abs() < 1e-12 && tf < 1e-12 && formula == 0.0);
    }

    #[test]
    fn dilation_has_unit_potential() {
        let f = SpaceFormField::Euclidean(euclid(vec![0.0; 3], 1.0, vec![0.0; 3]));
        let (rho, _, formula) = defect(&f, &v(&[0.3, -0.2, 0.9]));
        assert!((rho - 1.0).abs() < 1e-12 && formula == 1.0);
    }

    #[test]
    fn special_conformal_at_two_e1() {
        let f = SpaceFormField::Euclidean(euclid(vec![0.0; 3], 0.0, vec![1.0, 0.0, 0.0]));
        let (rho, tf, formula) = defect(&f, &v(&[2.0, 0.0, 0.0]));
        assert!((rho + 2.0).abs() < 1e-10);
        assert!(tf < 1e-8);
        assert_eq!(formula, -2.0);
    }

    #[test]
    fn shape_and_skew_errors() {
        let mut p = euclid(vec![0.0; 3], 0.0, vec![0.0; 2]);
        assert!(matches!(euclidean_field(&p), Err(SpaceFormError::ShapeMismatch(_))));
        p.b2 = vec![0.0; 3];
        p.rot[0][1] = 1.0;
        assert!(matches!(euclidean_field(&p), Err(SpaceFormError::NotSkew(_))));
    }

    #[test]
    fn sphere_rotation_is_killing() {
        let mut rot = zeros(3);
        rot[0][1] = -1.0;
        rot[1][0] = 1.0;
        let f = SpaceFormField::SphereStereographic(SphereParams { rot, b: vec![0.0; 3] });
        let (rho, tf, _) = defect(&f, &v(&[0.4, -0.7]));
        assert!(rho.abs() < 1e-10 && tf < 1e-10);
    }

    #[test]
    fn sphere_height_field_potential_at_chart_origin() {
        // Chart origin is the south pole x = -e_3; with b = e_3 the gradient
        // field of the height function has potential -<b, x> = +1 there.
        let f = SpaceFormField::SphereStereographic(SphereParams {
            rot: zeros(3),
            b: vec![0.0, 0.0, 1.0],
        });
        let (rho, tf, formula) = defect(&f, &v(&[0.0, 0.0]));
        assert!((rho - 1.0).abs() < 1e-10, "rho = {rho}");
        assert!(tf < 1e-10);
        assert!((formula - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ambient_field_is_tangent() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..20 {
            let rot = {
                let m = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
                &m - m.transpose()
            };
            let b = DVector::<f64>::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let x = DVector::<f64>::from_fn(4, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let amb = &rot * &x + &b - &x * b.dot(&x);
            assert!(amb.dot(&x).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_needs_two_dimensions() {
        let p = SphereParams {
            rot: zeros(2),
            b: vec![0.0; 2],
        };
        assert!(matches!(sphere_field(&p), Err(SpaceFormError::UnsupportedDimension(1))));
    }

    #[test]
    fn pole_is_rejected() {
        let m = StereographicSphere(2);
        assert!(m.metric_at(&v(&[2e3, 0.0])).is_err());
        assert!(matches!(
            Model::SphereStereographic.check_point(&v(&[2e3, 0.0])),
            Err(SpaceFormError::ChartPole(_))
        ));
    }

    fn hyper(n: usize) -> HyperbolicParams {
        HyperbolicParams {
            a0: vec![0.0; n - 1],
            b0: 0.0,
            rot: zeros(n - 1),
            b1: vec![0.0; n - 1],
            a1: 0.0,
            a2: vec![0.0; n - 1],
            b2: 0.0,
        }
    }

    #[test]
    fn hyperbolic_dilation_is_killing() {
        let mut p = hyper(3);
        p.a1 = 1.0;
        let (rho, tf, formula) = defect(&SpaceFormField::HyperbolicHalfspace(p), &v(&[0.2, -0.5, 1.3]));
        assert!(rho.abs() < 1e-10 && tf < 1e-10 && formula == 0.0);
    }

    #[test]
    fn hyperbolic_vertical_translation() {
        let mut p = hyper(2);
        p.b0 = 1.0;
        let (rho, tf, formula) = defect(&SpaceFormField::HyperbolicHalfspace(p), &v(&[0.3, 0.8]));
        assert!((rho + 1.0 / 0.8).abs() < 1e-10);
        assert!(tf < 1e-8);
        assert!((formula + 1.0 / 0.8).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_b2_on_axis() {
        let mut p = hyper(2);
        p.b2 = 1.0;
        let y = 1.7;
        let f = SpaceFormField::HyperbolicHalfspace(p);
        let (xi, _) = f.build().unwrap();
        // (0, y): ξ = y² e_y - 2 y (0, y) = (0, -y²)
        assert!((xi.eval(&v(&[0.0, y])) - v(&[0.0, -y * y])).norm() < 1e-14);
        let (rho, tf, _) = defect(&f, &v(&[0.0, y]));
        assert!((rho + y).abs() < 1e-9 && tf < 1e-8);
    }

    #[test]
    fn hyperbolic_rejects_lower_half() {
        let f = SpaceFormField::HyperbolicHalfspace(hyper(2));
        assert!(matches!(
            verify_field(&f, &[v(&[0.0, -1.0])], DEFAULT_STEP),
            Err(SpaceFormError::NonPositiveY(_))
        ));
    }

    #[test]
    fn analytic_jacobians_agree_with_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        for model in [Model::Euclidean, Model::HyperbolicHalfspace] {
            let f = SpaceFormField::random(model, 3, &mut rng);
            let (xi, _) = f.build().unwrap();
            for p in sample_points(model, 3, 5, &mut rng) {
                assert!(xi.jacobian_mismatch(&p, DEFAULT_STEP).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn random_fields_verify() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        for (model, n) in [
            (Model::Euclidean, 3),
            (Model::SphereStereographic, 2),
            (Model::SphereStereographic, 3),
            (Model::HyperbolicHalfspace, 2),
            (Model::HyperbolicHalfspace, 3),
        ] {
            let f = SpaceFormField::random(model, n, &mut rng);
            let pts = sample_points(model, n, 10, &mut rng);
            let check = verify_field(&f, &pts, DEFAULT_STEP).unwrap();
            assert!(check.max_tracefree_norm < 1e-7, "{model:?}: {check:?}");
            assert!(check.max_rho_error < 1e-7, "{model:?}: {check:?}");
        }
    }

    #[test]
    fn json_shape() {
        let f = SpaceFormField::Euclidean(euclid(vec![1.0, 0.0], 0.5, vec![0.0, 1.0]));
        let json = serde_json::to_value(&f).unwrap();
        assert_eq!(json["model"], "euclidean");
        let back: SpaceFormField = serde_json::from_value(json).unwrap();
        assert_eq!(back, f);
    }
}
