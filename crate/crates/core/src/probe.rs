//! Least-squares search for conformal fields inside a finite ansatz.
//!
//! The ansatz spans `q(p) e^{j a / 2} ∂_μ` for polynomials `q` of bounded
//! degree in a chosen set of coordinates, exponents `j` on a grid and
//! included components `μ`. Each sample point contributes the upper triangle of the
//! trace-free part of `F^T (L_ξ g) F`, with `F` an orthonormal frame from
//! the Cholesky factor of `g`. Columns are whitened against the sampled
//! field norms, so null vectors correspond to unit-RMS fields.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd::DEFAULT_STEP;
use crate::linalg;
use crate::poly::{monomials_up_to, Exponents};
use crate::space::DamekRicciSpace;
use crate::tensor::{self, CoordinateVectorField, Metric, TensorError};

/// Largest accepted condition number of the field Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("ansatz has no basis fields")]
    EmptyBasis,
    #[error("basis Gram matrix has condition number {0:e} (limit {MAX_GRAM_CONDITION:e})")]
    IllConditionedBasis(f64),
    #[error("{rows} rows for {columns} columns; at least twice as many rows are required")]
    Undersampled { rows: usize, columns: usize },
    #[error("nullspace dimension changed from {base} to {doubled} when samples were doubled")]
    InconclusiveSampling { base: usize, doubled: usize },
    #[error("ansatz does not fit the chart: {0}")]
    BadAnsatz(String),
    #[error("tolerances must be positive")]
    InvalidTolerance,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Field ansatz: polynomials in `poly_vars` up to `degree`, times
/// `e^{j x_{exp_var} / 2}` for `j` in `j_min..=j_max`, along each included
/// coordinate direction.
///
/// The span is represented by products of Legendre polynomials and by
/// combinations of the exponentials that are orthonormal on `[-1, 1]`; the
/// raw monomial-exponential products are too collinear to whiten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub degree: u32,
    #[serde(default)]
    pub j_min: i32,
    #[serde(default)]
    pub j_max: i32,
    pub poly_vars: Vec<usize>,
    #[serde(default)]
    pub exp_var: Option<usize>,
    /// Per-coordinate inclusion flags; all included when absent.
    #[serde(default)]
    pub components: Option<Vec<bool>>,
}

impl AnsatzSpec {
    /// Polynomials in `(v, z)` times `e^{ja/2}`, every component.
    pub fn damek_ricci(space: &DamekRicciSpace, degree: u32, j_min: i32, j_max: i32) -> Self {
        Self {
            degree,
            j_min,
            j_max,
            poly_vars: (0..space.dim() - 1).collect(),
            exp_var: Some(space.a_index()),
            components: None,
        }
    }

    /// Plain polynomial fields on an `n`-dimensional chart.
    pub fn polynomial(n: usize, degree: u32) -> Self {
        Self {
            degree,
            j_min: 0,
            j_max: 0,
            poly_vars: (0..n).collect(),
            exp_var: None,
            components: None,
        }
    }

    fn validate(&self, n: usize) -> Result<(), ProbeError> {
        let bad = |msg: String| Err(ProbeError::BadAnsatz(msg));
        if self.poly_vars.iter().chain(self.exp_var.iter()).any(|&i| i >= n) {
            return bad(format!("coordinate index out of range for dimension {n}"));
        }
        if self.j_min > self.j_max {
            return bad("j_min exceeds j_max".into());
        }
        if self.exp_var.is_none() && (self.j_min, self.j_max) != (0, 0) {
            return bad("exponential grid needs exp_var".into());
        }
        if let Some(c) = &self.components {
            if c.len() != n {
                return bad(format!("{} component flags for dimension {n}", c.len()));
            }
        }
        Ok(())
    }

    /// Enumerates basis fields in a fixed order: component, exponent, monomial.
    pub fn basis(&self, n: usize) -> Result<AnsatzBasis, ProbeError> {
        self.validate(n)?;
        let monomials = monomials_up_to(self.poly_vars.len(), self.degree);
        let exp_mix = exponential_mix(self.j_min, self.j_max);
        let mut terms = Vec::new();
        for mu in 0..n {
            if self.components.as_ref().is_some_and(|c| !c[mu]) {
                continue;
            }
            for exp in 0..exp_mix.nrows() {
                for mono in 0..monomials.len() {
                    terms.push(BasisTerm {
                        component: mu,
                        exp,
                        mono,
                    });
                }
            }
        }
        if terms.is_empty() {
            return Err(ProbeError::EmptyBasis);
        }
        Ok(AnsatzBasis {
            dim: n,
            spec: self.clone(),
            monomials,
            exp_mix,
            terms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisTerm {
    pub component: usize,
    /// Index into the orthonormalized exponential family.
    pub exp: usize,
    /// Index into the Legendre product family.
    pub mono: usize,
}

/// `P_0..P_d` and their derivatives at `x`.
fn legendre(d: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![1.0; d + 1];
    let mut dp = vec![0.0; d + 1];
    if d >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for k in 1..d {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

/// Rows give `e^{ja/2}`-combinations orthonormal in `L²([-1, 1], da/2)`.
fn exponential_mix(j_min: i32, j_max: i32) -> DMatrix<f64> {
    let js: Vec<i32> = (j_min..=j_max).collect();
    let gram = DMatrix::from_fn(js.len(), js.len(), |r, c| {
        let s = 0.5 * (js[r] + js[c]) as f64;
        if s == 0.0 {
            1.0
        } else {
            s.sinh() / s
        }
    });
    // gram = L L^T; rows of L^{-1} are the orthonormal combinations.
    let l = gram.cholesky().expect("exponentials are independent").l();
    l.try_inverse().expect("triangular factor is invertible")
}

#[derive(Debug, Clone)]
pub struct AnsatzBasis {
    dim: usize,
    spec: AnsatzSpec,
    monomials: Vec<Exponents>,
    exp_mix: DMatrix<f64>,
    terms: Vec<BasisTerm>,
}

// Scalar factor values and gradients at one point.
struct ScalarTable {
    value: Vec<Vec<f64>>,
    grad: Vec<Vec<DVector<f64>>>,
}

impl AnsatzBasis {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    // value[exp][mono], grad likewise.
    fn table(&self, p: &DVector<f64>) -> ScalarTable {
        let vars = &self.spec.poly_vars;
        let d = self.spec.degree as usize;
        let legendre: Vec<(Vec<f64>, Vec<f64>)> = vars.iter().map(|&i| legendre(d, p[i])).collect();
        let mono_val: Vec<f64> = self
            .monomials
            .iter()
            .map(|e| e.iter().zip(&legendre).map(|(&k, (v, _))| v[k as usize]).product())
            .collect();
        let mono_grad: Vec<DVector<f64>> = self
            .monomials
            .iter()
            .map(|e| {
                let mut g = DVector::zeros(self.dim);
                for (t, &var) in vars.iter().enumerate() {
                    if e[t] == 0 {
                        continue;
                    }
                    g[var] += e
                        .iter()
                        .zip(&legendre)
                        .enumerate()
                        .map(|(s, (&k, (v, dv)))| if s == t { dv[k as usize] } else { v[k as usize] })
                        .product::<f64>();
                }
                g
            })
            .collect();
        let mut value = Vec::new();
        let mut grad = Vec::new();
        for row in 0..self.exp_mix.nrows() {
            let (e, de) = match self.spec.exp_var {
                Some(a) => {
                    let (mut e, mut de) = (0.0, 0.0);
                    for (c, j) in (self.spec.j_min..=self.spec.j_max).enumerate() {
                        let half = 0.5 * j as f64;
                        let w = self.exp_mix[(row, c)] * (half * p[a]).exp();
                        e += w;
                        de += half * w;
                    }
                    (e, Some((a, de)))
                }
                None => (1.0, None),
            };
            value.push(mono_val.iter().map(|v| v * e).collect());
            grad.push(
                mono_val
                    .iter()
                    .zip(&mono_grad)
                    .map(|(v, g)| {
                        let mut out = g * e;
                        if let Some((a, de)) = de {
                            out[a] += v * de;
                        }
                        out
                    })
                    .collect(),
            );
        }
        ScalarTable { value, grad }
    }

    fn scalar(&self, t: &ScalarTable, term: &BasisTerm) -> (f64, DVector<f64>) {
        (t.value[term.exp][term.mono], t.grad[term.exp][term.mono].clone())
    }

    /// Field `Σ c_b ξ_b` with analytic Jacobian.
    pub fn field(&self, coefficients: &DVector<f64>) -> CoordinateVectorField {
        assert_eq!(coefficients.len(), self.len());
        let (b1, c1) = (self.clone(), coefficients.clone());
        let (b2, c2) = (self.clone(), coefficients.clone());
        CoordinateVectorField::new(self.dim, move |p| {
            let t = b1.table(p);
            let mut out = DVector::zeros(b1.dim);
            for (term, &c) in b1.terms.iter().zip(c1.iter()) {
                if c != 0.0 {
                    out[term.component] += c * t.value[term.exp][term.mono];
                }
            }
            out
        })
        .with_jacobian(move |p| {
            let t = b2.table(p);
            let mut out = DMatrix::zeros(b2.dim, b2.dim);
            for (term, &c) in b2.terms.iter().zip(c2.iter()) {
                if c != 0.0 {
                    let (_, g) = b2.scalar(&t, term);
                    let mut row = out.row_mut(term.component);
                    row += g.transpose() * c;
                }
            }
            out
        })
    }
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    /// `x ∈ [-1, 1]^{n-1}`, `y ∈ [0.5, 2]`.
    pub fn half_space(n: usize) -> Self {
        let mut b = Self::cube(n, -1.0, 1.0);
        b.lo[n - 1] = 0.5;
        b.hi[n - 1] = 2.0;
        b
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
        (0..count)
            .map(|_| {
                DVector::from_iterator(
                    self.lo.len(),
                    self.lo
                        .iter()
                        .zip(&self.hi)
                        .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..h) }),
                )
            })
            .collect()
    }
}

/// Orthonormal frame `F = L^{-T}` from `g = L L^T`, and the coframe `L^T`.
fn cholesky_frame(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), ProbeError> {
    let chol = g.clone().cholesky().ok_or(TensorError::SingularMetric)?;
    let l = chol.l();
    let coframe = l.transpose();
    let frame = coframe.clone().try_inverse().ok_or(TensorError::SingularMetric)?;
    Ok((frame, coframe))
}

fn upper_triangle(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut r = 0;
    for i in 0..n {
        for j in i..n {
            out[r] = if i == j {
                m[(i, j)]
            } else {
                std::f64::consts::SQRT_2 * m[(i, j)]
            };
            r += 1;
        }
    }
}

/// Defect rows and field-value rows for one sample.
fn sample_rows(
    metric: &dyn Metric,
    basis: &AnsatzBasis,
    p: &DVector<f64>,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ProbeError> {
    let n = basis.dim;
    let g = metric.metric_at(p)?;
    let dg = tensor::metric_derivatives(metric, p, h)?;
    let (frame, coframe) = cholesky_frame(&g)?;
    let table = basis.table(p);
    let tri = n * (n + 1) / 2;
    let mut defect = DMatrix::zeros(tri, basis.len());
    let mut values = DMatrix::zeros(n, basis.len());
    let mut buf = vec![0.0; tri];
    let eye = DMatrix::<f64>::identity(n, n);
    for (b, term) in basis.terms.iter().enumerate() {
        let (s, grad) = basis.scalar(&table, term);
        let mu = term.component;
        // L = s ∂_μ g + g_{·μ} ⊗ ∇s + ∇s ⊗ g_{μ·}
        let outer = g.column(mu) * grad.transpose();
        let lie = &dg[mu] * s + &outer + outer.transpose();
        let m = frame.transpose() * lie * &frame;
        let tf = &m - &eye * (m.trace() / n as f64);
        upper_triangle(&tf, &mut buf);
        defect.column_mut(b).copy_from_slice(&buf);
        values.set_column(b, &(coframe.column(mu) * s));
    }
    if defect.iter().any(|x| !x.is_finite()) {
        return Err(TensorError::NonFinite("defect operator").into());
    }
    Ok((defect, values))
}

/// Defect operator and field-value matrix, stacked in sample order.
pub struct Assembled {
    pub defect: DMatrix<f64>,
    pub values: DMatrix<f64>,
}

pub fn assemble(
    metric: &dyn Metric,
    basis: &AnsatzBasis,
    samples: &[DVector<f64>],
    h: f64,
) -> Result<Assembled, ProbeError> {
    if basis.is_empty() {
        return Err(ProbeError::EmptyBasis);
    }
    let blocks: Vec<(DMatrix<f64>, DMatrix<f64>)> = samples
        .par_iter()
        .map(|p| sample_rows(metric, basis, p, h))
        .collect::<Result<_, _>>()?;
    let n = basis.dim;
    let tri = n * (n + 1) / 2;
    let cols = basis.len();
    let mut defect = DMatrix::zeros(tri * samples.len(), cols);
    let mut values = DMatrix::zeros(n * samples.len(), cols);
    for (i, (d, v)) in blocks.iter().enumerate() {
        defect.view_mut((i * tri, 0), (tri, cols)).copy_from(d);
        values.view_mut((i * n, 0), (n, cols)).copy_from(v);
    }
    Ok(Assembled { defect, values })
}

/// Change of basis to sample-orthonormal fields.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// Coefficients of whitened field `i` in column `i`.
    pub transform: DMatrix<f64>,
    pub gram_condition: f64,
}

/// Whitening from the field-value matrix. Columns are equilibrated first,
/// so the reported condition number is that of the scaled Gram matrix.
pub fn whiten(values: &DMatrix<f64>, sample_count: usize) -> Result<Whitening, ProbeError> {
    let cols = values.ncols();
    if values.nrows() < cols {
        return Err(ProbeError::IllConditionedBasis(f64::INFINITY));
    }
    let scale: Vec<f64> = (0..cols).map(|c| values.column(c).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(ProbeError::IllConditionedBasis(f64::INFINITY));
    }
    let mut scaled = values.clone();
    for (c, s) in scale.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / s);
    }
    let r = if scaled.nrows() > cols { scaled.qr().r() } else { scaled };
    let svd = r.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0_f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let gram_condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(gram_condition <= MAX_GRAM_CONDITION) {
        return Err(ProbeError::IllConditionedBasis(gram_condition));
    }
    // Unit RMS norm per sample: V T has orthogonal columns of norm sqrt(N).
    let root_n = (sample_count as f64).sqrt();
    let mut transform = v_t.transpose();
    for (c, s) in svd.singular_values.iter().enumerate() {
        transform.column_mut(c).scale_mut(root_n / s);
    }
    for (r, s) in scale.iter().enumerate() {
        transform.row_mut(r).scale_mut(1.0 / s);
    }
    Ok(Whitening {
        transform,
        gram_condition,
    })
}

/// Defect operator in the whitened basis.
pub fn assemble_defect_operator(
    metric: &dyn Metric,
    ansatz: &AnsatzSpec,
    samples: &[DVector<f64>],
    h: f64,
) -> Result<(DMatrix<f64>, Whitening, AnsatzBasis), ProbeError> {
    let basis = ansatz.basis(metric.dim())?;
    let asm = assemble(metric, &basis, samples, h)?;
    if asm.defect.nrows() < 2 * basis.len() {
        return Err(ProbeError::Undersampled {
            rows: asm.defect.nrows(),
            columns: basis.len(),
        });
    }
    let w = whiten(&asm.values, samples.len())?;
    Ok((&asm.defect * &w.transform, w, basis))
}

/// Sample count giving `oversampling` times as many defect rows as basis
/// fields, and as many evaluations per component as fields along it; the
/// second bound keeps the basis Gram matrix well conditioned.
pub fn default_sample_count(n: usize, basis_len: usize, oversampling: f64) -> usize {
    let rows_per_sample = n * (n + 1) / 2;
    let per_rows = oversampling * basis_len as f64 / rows_per_sample as f64;
    let per_component = oversampling * basis_len as f64 / n as f64;
    per_rows.max(per_component).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeTolerances {
    /// Relative singular-value threshold.
    pub svd: f64,
    pub rho: f64,
    pub defect: f64,
    pub h: f64,
}

impl Default for ProbeTolerances {
    fn default() -> Self {
        Self {
            svd: 1e-7,
            rho: 1e-6,
            defect: 1e-6,
            h: DEFAULT_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Rigid,
    NonRigid,
    Inconclusive,
}

/// Classification of a null field against the Killing fields of the
/// group structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KillingMatch {
    /// Frame components at the identity.
    pub at_identity: Vec<f64>,
    /// Least-squares coefficients on the right-invariant generators.
    pub right_invariant: Vec<f64>,
    /// Index of the dominant generator.
    pub best: usize,
    /// Relative residual of the fit over the test points.
    pub residual: f64,
    pub in_right_invariant_span: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullField {
    pub max_abs_rho: f64,
    pub max_tracefree_norm: f64,
    pub rms_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub killing_match: Option<KillingMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    pub samples: usize,
    pub validation_points: usize,
    pub basis_size: usize,
    pub rows: usize,
    pub gram_condition: f64,
    pub threshold: f64,
    pub singular_values: Vec<f64>,
    pub nullspace_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doubled_nullspace_dim: Option<usize>,
    pub fields: Vec<NullField>,
    pub verdict: Verdict,
}

/// Nullspace fields as coefficient vectors in the raw ansatz basis, each
/// scaled to unit RMS frame-norm over `points`.
pub struct ProbeRun {
    pub report: RigidityReport,
    pub basis: AnsatzBasis,
    pub fields: Vec<DVector<f64>>,
}

impl ProbeRun {
    pub fn field(&self, i: usize) -> CoordinateVectorField {
        self.basis.field(&self.fields[i])
    }
}

fn rms_frame_norm(
    metric: &dyn Metric,
    field: &CoordinateVectorField,
    points: &[DVector<f64>],
) -> Result<f64, ProbeError> {
    let mut acc = 0.0;
    for p in points {
        let g = metric.metric_at(p)?;
        let xi = field.eval(p);
        acc += (xi.transpose() * g * &xi)[0];
    }
    Ok((acc / points.len() as f64).sqrt())
}

/// Null fields from one assembled operator.
fn null_fields(
    metric: &dyn Metric,
    ansatz: &AnsatzSpec,
    samples: &[DVector<f64>],
    tol: &ProbeTolerances,
) -> Result<(linalg::Nullspace, Whitening, AnsatzBasis, usize), ProbeError> {
    let (op, w, basis) = assemble_defect_operator(metric, ansatz, samples, tol.h)?;
    let rows = op.nrows();
    Ok((linalg::nullspace(&op, tol.svd), w, basis, rows))
}

/// Searches the ansatz for conformal fields and measures their potentials on
/// held-out points. `doubled` is an independent sample set of twice the
/// size, used to check that the nullspace dimension is stable.
pub fn probe_rigidity(
    metric: &dyn Metric,
    ansatz: &AnsatzSpec,
    samples: &[DVector<f64>],
    doubled: Option<&[DVector<f64>]>,
    validation: &[DVector<f64>],
    tol: &ProbeTolerances,
) -> Result<ProbeRun, ProbeError> {
    if !(tol.svd > 0.0 && tol.rho > 0.0 && tol.defect > 0.0 && tol.h > 0.0) {
        return Err(ProbeError::InvalidTolerance);
    }
    let (ns, w, basis, rows) = null_fields(metric, ansatz, samples, tol)?;
    let doubled_dim = match doubled {
        Some(pts) => {
            let d = null_fields(metric, ansatz, pts, tol)?.0.dim();
            if d != ns.dim() {
                return Err(ProbeError::InconclusiveSampling {
                    base: ns.dim(),
                    doubled: d,
                });
            }
            Some(d)
        }
        None => None,
    };

    let fields: Vec<(DVector<f64>, NullField)> = (0..ns.dim())
        .into_par_iter()
        .map(|c| -> Result<_, ProbeError> {
            let mut coeffs = &w.transform * ns.basis.column(c);
            let raw = basis.field(&coeffs);
            let rms = rms_frame_norm(metric, &raw, validation)?;
            coeffs /= rms;
            // Validation differences the components directly.
            let field = basis.field(&coeffs).without_jacobian();
            let mut nf = NullField {
                max_abs_rho: 0.0,
                max_tracefree_norm: 0.0,
                rms_norm: 1.0,
                killing_match: None,
            };
            for p in validation {
                let d = tensor::conformal_defect(metric, &field, p, tol.h)?;
                nf.max_abs_rho = nf.max_abs_rho.max(d.rho.abs());
                nf.max_tracefree_norm = nf.max_tracefree_norm.max(d.tracefree_norm);
            }
            Ok((coeffs, nf))
        })
        .collect::<Result<_, _>>()?;

    let conformal = |f: &NullField| f.max_tracefree_norm < tol.defect;
    let verdict = if fields.is_empty() || !fields.iter().all(|(_, f)| conformal(f)) {
        Verdict::Inconclusive
    } else if fields.iter().all(|(_, f)| f.max_abs_rho < tol.rho) {
        Verdict::Rigid
    } else {
        Verdict::NonRigid
    };

    let report = RigidityReport {
        samples: samples.len(),
        validation_points: validation.len(),
        basis_size: basis.len(),
        rows,
        gram_condition: w.gram_condition,
        threshold: ns.threshold,
        singular_values: ns.singular_values.clone(),
        nullspace_dim: ns.dim(),
        doubled_nullspace_dim: doubled_dim,
        fields: fields.iter().map(|(_, f)| f.clone()).collect(),
        verdict,
    };
    Ok(ProbeRun {
        report,
        basis,
        fields: fields.into_iter().map(|(c, _)| c).collect(),
    })
}

/// Attaches Killing-field classifications to a Damek-Ricci probe run.
pub fn classify_fields(space: &DamekRicciSpace, run: &mut ProbeRun, points: &[DVector<f64>]) {
    for i in 0..run.fields.len() {
        run.report.fields[i].killing_match = match_killing(space, &run.field(i), points);
    }
}

/// Projects a field onto the frame at the identity and onto the span of the
/// right-invariant generators over `points`. `None` for a vanishing field.
pub fn match_killing(
    space: &DamekRicciSpace,
    field: &CoordinateVectorField,
    points: &[DVector<f64>],
) -> Option<KillingMatch> {
    let n = space.dim();
    let identity = DVector::zeros(n);
    let at_identity = field.eval(&identity);
    let mut stacked_gen = DMatrix::zeros(n * (points.len() + 1), n);
    let mut stacked_field = DVector::zeros(n * (points.len() + 1));
    for (s, p) in std::iter::once(&identity).chain(points).enumerate() {
        let xi = field.eval(p);
        stacked_field.rows_mut(s * n, n).copy_from(&xi);
        for g in 0..n {
            stacked_gen
                .view_mut((s * n, g), (n, 1))
                .copy_from(&space.right_invariant(g, p));
        }
    }
    let norm = stacked_field.norm();
    if !(norm > 1e-12) {
        return None;
    }
    let coeffs = stacked_gen.clone().svd(true, true).solve(&stacked_field, 1e-12).ok()?;
    let residual = (&stacked_gen * &coeffs - &stacked_field).norm() / norm;
    let best = coeffs.iamax();
    Some(KillingMatch {
        at_identity: at_identity.iter().copied().collect(),
        right_invariant: coeffs.iter().copied().collect(),
        best,
        residual,
        in_right_invariant_span: residual < 1e-6,
    })
}

/// Least-squares fit of `ρ y = -(b₀ + <x, b₁> + b₂ (|x|² + y²))` on the
/// half-space, `y` being the last coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbolicFit {
    pub b0: f64,
    pub b1: Vec<f64>,
    pub b2: f64,
    pub max_abs_rho: f64,
    pub max_residual: f64,
}

impl HyperbolicFit {
    pub fn rho(&self, p: &DVector<f64>) -> f64 {
        let n = p.len();
        let y = p[n - 1];
        let lin: f64 = self.b1.iter().zip(p.iter()).map(|(b, x)| b * x).sum();
        -(self.b0 + lin + self.b2 * p.norm_squared()) / y
    }
}

pub fn fit_hyperbolic_potential(points: &[DVector<f64>], rho: &[f64]) -> Option<HyperbolicFit> {
    let n = points.first()?.len();
    let cols = n + 1;
    let mut a = DMatrix::zeros(points.len(), cols);
    let mut b = DVector::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        let y = p[n - 1];
        a[(i, 0)] = -1.0 / y;
        for j in 0..n - 1 {
            a[(i, 1 + j)] = -p[j] / y;
        }
        a[(i, n)] = -p.norm_squared() / y;
        b[i] = rho[i];
    }
    let coeffs = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let mut fit = HyperbolicFit {
        b0: coeffs[0],
        b1: coeffs.rows(1, n - 1).iter().copied().collect(),
        b2: coeffs[n],
        max_abs_rho: rho.iter().fold(0.0, |m, r| m.max(r.abs())),
        max_residual: 0.0,
    };
    fit.max_residual = points
        .iter()
        .zip(rho)
        .fold(0.0, |m, (p, r)| m.max((fit.rho(p) - r).abs()));
    Some(fit)
}

/// The null field with the largest potential (top right singular vector of
/// the potential-sample matrix), normalized to unit RMS frame-norm.
pub fn strongest_conformal_field(
    metric: &dyn Metric,
    run: &ProbeRun,
    points: &[DVector<f64>],
    h: f64,
) -> Result<Option<(CoordinateVectorField, Vec<f64>)>, ProbeError> {
    if run.fields.is_empty() {
        return Ok(None);
    }
    let mut rho = DMatrix::zeros(points.len(), run.fields.len());
    for c in 0..run.fields.len() {
        let f = run.field(c).without_jacobian();
        for (i, p) in points.iter().enumerate() {
            rho[(i, c)] = tensor::conformal_defect(metric, &f, p, h)?.rho;
        }
    }
    let svd = rho.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let top = svd.singular_values.imax();
    let mut coeffs = DVector::zeros(run.basis.len());
    for c in 0..run.fields.len() {
        coeffs += &run.fields[c] * v_t[(top, c)];
    }
    let raw = run.basis.field(&coeffs);
    coeffs /= rms_frame_norm(metric, &raw, points)?;
    let field = run.basis.field(&coeffs).without_jacobian();
    let values = points
        .iter()
        .map(|p| tensor::conformal_defect(metric, &field, p, h).map(|d| d.rho))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some((field, values)))
}
