//! The conformal equation restricted to the four-dimensional block
//! `s0 = span{V, J_Z V, Z, A}` with `V = V_1`, `J_Z V = V_2`, `Z = Z_1`.
//!
//! Writing `x = v_1`, `y = v_2`, `z = z_1` and
//!
//! ```text
//! D_x = ∂_x - ½ Σ_{r≥2} Σ_j A^r_{1j} v_j ∂_{z_r}
//! D_y = ∂_y - ½ Σ_{r≥2} Σ_j A^r_{2j} v_j ∂_{z_r}
//! ```
//!
//! the frame fields read `V = e^{a/2}(D_x - (y/2)∂_z)` and
//! `J_Z V = e^{a/2}(D_y + (x/2)∂_z)`.
//!
//! The s0-block of `L_ξ g - 2ρ g`, with `ξ = f₁V + f₂J_ZV + f₃Z + f₄A + …`,
//! splits into three 2×2 equations:
//!
//! ```text
//! (11) [ -f₄ + 2Vf₁ - 2ρ        Vf₂ + J_ZVf₁       ]
//!      [ Vf₂ + J_ZVf₁           -f₄ + 2J_ZVf₂ - 2ρ ]
//! (21) [ f₂ + Vf₃ + Zf₁         -f₁ + J_ZVf₃ + Zf₂ ]
//!      [ ½f₁ + Vf₄ + Af₁        ½f₂ + J_ZVf₄ + Af₂ ]
//! (22) [ -2f₄ + 2Zf₃ - 2ρ       f₃ + Zf₄ + Af₃     ]
//!      [ f₃ + Zf₄ + Af₃         2Af₄ - 2ρ          ]
//! ```
//!
//! Rows of (11) and (22) are indexed by (V, J_ZV) and (Z, A); (21) pairs
//! rows (Z, A) with columns (V, J_ZV).

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd;
use crate::poly::Poly;
use crate::space::{DamekRicciSpace, SpaceError, MAX_ABS_A};
use crate::tensor::CoordinateVectorField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfsysError {
    #[error("basis is not aligned: J_1 V_1 must equal V_2")]
    BasisNotAligned,
    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),
    #[error("w must be positive, got {0}")]
    NonPositiveW(f64),
    #[error("expansion overflows at a = {0}")]
    Overflow(f64),
    #[error("expansion is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

fn aligned(space: &DamekRicciSpace) -> Result<(), ConfsysError> {
    if space.algebra().is_aligned(1e-12) {
        Ok(())
    } else {
        Err(ConfsysError::BasisNotAligned)
    }
}

// Coordinate direction of D_x (i = 0) or D_y (i = 1) at p.
fn d_direction(space: &DamekRicciSpace, i: usize, p: &DVector<f64>) -> DVector<f64> {
    let (k, m) = (space.k(), space.m());
    let alg = space.algebra();
    let mut dir = DVector::zeros(space.dim());
    dir[i] = 1.0;
    for r in 1..m {
        let c: f64 = (0..k).map(|j| alg.structure_constant(r, i, j) * p[j]).sum();
        dir[space.z_index(r)] = -0.5 * c;
    }
    dir
}

/// Coordinate components of `D_x` at `p`.
pub fn dx_direction(space: &DamekRicciSpace, p: &DVector<f64>) -> Result<DVector<f64>, ConfsysError> {
    aligned(space)?;
    space.check_point(p)?;
    Ok(d_direction(space, 0, p))
}

/// Coordinate components of `D_y` at `p`.
pub fn dy_direction(space: &DamekRicciSpace, p: &DVector<f64>) -> Result<DVector<f64>, ConfsysError> {
    aligned(space)?;
    space.check_point(p)?;
    Ok(d_direction(space, 1, p))
}

pub fn dx_apply<F>(space: &DamekRicciSpace, f: F, p: &DVector<f64>, h: f64) -> Result<f64, ConfsysError>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let dir = dx_direction(space, p)?;
    Ok(fd::directional(f, p, &dir, h))
}

pub fn dy_apply<F>(space: &DamekRicciSpace, f: F, p: &DVector<f64>, h: f64) -> Result<f64, ConfsysError>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let dir = dy_direction(space, p)?;
    Ok(fd::directional(f, p, &dir, h))
}

/// Frame components of a field along `V, J_Z V, Z, A`.
#[derive(Clone)]
pub struct S0FieldData {
    pub f1: ScalarFn,
    pub f2: ScalarFn,
    pub f3: ScalarFn,
    pub f4: ScalarFn,
    pub rho: Option<ScalarFn>,
}

impl std::fmt::Debug for S0FieldData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("S0FieldData")
            .field("rho", &self.rho.is_some())
            .finish_non_exhaustive()
    }
}

impl S0FieldData {
    pub fn new(f1: ScalarFn, f2: ScalarFn, f3: ScalarFn, f4: ScalarFn) -> Self {
        Self {
            f1,
            f2,
            f3,
            f4,
            rho: None,
        }
    }

    pub fn zero() -> Self {
        let z: ScalarFn = Arc::new(|_| 0.0);
        Self::new(z.clone(), z.clone(), z.clone(), z)
    }

    pub fn with_rho(mut self, rho: ScalarFn) -> Self {
        self.rho = Some(rho);
        self
    }

    /// Frame components `W ξ` of a coordinate field, restricted to s0.
    /// Points outside the chart evaluate to NaN.
    pub fn from_field(space: &DamekRicciSpace, field: &CoordinateVectorField) -> Result<Self, ConfsysError> {
        let s0 = space.s0_subframe().map_err(|e| match e {
            SpaceError::BasisNotAligned => ConfsysError::BasisNotAligned,
            other => ConfsysError::Space(other),
        })?;
        let component = |idx: usize| -> ScalarFn {
            let (space, field) = (space.clone(), field.clone());
            Arc::new(move |p| match space.coframe_at(p) {
                Ok(w) => (w.row(idx) * field.eval(p))[0],
                Err(_) => f64::NAN,
            })
        };
        Ok(Self::new(
            component(s0.v),
            component(s0.jzv),
            component(s0.z),
            component(s0.a),
        ))
    }

    fn get(&self, i: usize) -> &ScalarFn {
        match i {
            0 => &self.f1,
            1 => &self.f2,
            2 => &self.f3,
            _ => &self.f4,
        }
    }
}

/// The three matrix equations, as residual matrices indexed `[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockResiduals {
    pub b11: [[f64; 2]; 2],
    pub b21: [[f64; 2]; 2],
    pub b22: [[f64; 2]; 2],
}

impl BlockResiduals {
    pub fn max_abs(&self) -> f64 {
        [self.b11, self.b21, self.b22]
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

// d[i][j] = (frame field j) f_{i+1} at p, frame order (V, J_ZV, Z, A).
fn frame_derivatives(
    space: &DamekRicciSpace,
    data: &S0FieldData,
    p: &DVector<f64>,
    h: f64,
) -> Result<[[f64; 4]; 4], ConfsysError> {
    let s0 = space.s0_subframe()?;
    let frame = space.frame_at(p)?;
    let mut d = [[0.0; 4]; 4];
    for (i, row) in d.iter_mut().enumerate() {
        let f = data.get(i);
        for (j, &idx) in s0.indices().iter().enumerate() {
            let dir = frame.column(idx).into_owned();
            row[j] = fd::directional(|q| f(q), p, &dir, h);
        }
    }
    Ok(d)
}

pub fn block_residuals<R>(
    space: &DamekRicciSpace,
    data: &S0FieldData,
    rho: R,
    p: &DVector<f64>,
    h: f64,
) -> Result<BlockResiduals, ConfsysError>
where
    R: Fn(&DVector<f64>) -> f64,
{
    aligned(space)?;
    let d = frame_derivatives(space, data, p, h)?;
    let [f1, f2, f3, f4] = [0, 1, 2, 3].map(|i| data.get(i)(p));
    let rho = rho(p);
    const V: usize = 0;
    const JV: usize = 1;
    const Z: usize = 2;
    const A: usize = 3;

    let off11 = d[1][V] + d[0][JV];
    let b11 = [
        [-f4 + 2.0 * d[0][V] - 2.0 * rho, off11],
        [off11, -f4 + 2.0 * d[1][JV] - 2.0 * rho],
    ];
    let b21 = [
        [f2 + d[2][V] + d[0][Z], -f1 + d[2][JV] + d[1][Z]],
        [0.5 * f1 + d[3][V] + d[0][A], 0.5 * f2 + d[3][JV] + d[1][A]],
    ];
    let off22 = f3 + d[3][Z] + d[2][A];
    let b22 = [
        [-2.0 * f4 + 2.0 * d[2][Z] - 2.0 * rho, off22],
        [off22, 2.0 * d[3][A] - 2.0 * rho],
    ];
    let out = BlockResiduals { b11, b21, b22 };
    if !out.max_abs().is_finite() {
        return Err(ConfsysError::NonFinite("block residuals"));
    }
    Ok(out)
}

/// `ρ = ∂f₄/∂a`, the last coordinate being `a`.
pub fn potential_from_f4(data: &S0FieldData, p: &DVector<f64>, h: f64) -> f64 {
    let a = p.len() - 1;
    fd::partial(|q| (data.f4)(q), p, a, h)
}

/// Residuals `(∂F₃/∂z - ∂F₄/∂w, ∂F₃/∂w + ∂F₄/∂z)` at `(z, w)`.
pub fn cauchy_riemann_residual<F3, F4>(
    f3: F3,
    f4: F4,
    z: f64,
    w: f64,
    n0: &[f64],
    h: f64,
) -> Result<(f64, f64), ConfsysError>
where
    F3: Fn(f64, f64, &[f64]) -> f64,
    F4: Fn(f64, f64, &[f64]) -> f64,
{
    if !(w > 0.0) {
        return Err(ConfsysError::NonPositiveW(w));
    }
    // Keep the stencil inside w > 0.
    let h = h.min(w / 8.0);
    let dz = |f: &dyn Fn(f64, f64, &[f64]) -> f64| fd::derivative_scalar(|t| f(z + t, w, n0), h);
    let dw = |f: &dyn Fn(f64, f64, &[f64]) -> f64| fd::derivative_scalar(|t| f(z, w + t, n0), h);
    let r1 = dz(&f3) - dw(&f4);
    let r2 = dw(&f3) + dz(&f4);
    if !(r1.is_finite() && r2.is_finite()) {
        return Err(ConfsysError::NonFinite("Cauchy-Riemann residual"));
    }
    Ok((r1, r2))
}

/// `(cos(πk/2), sin(πk/2))` without rounding.
pub fn quarter_turn(k: usize) -> (f64, f64) {
    match k % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(F₃^[m], F₄^[m]) = (Re, Im)[(C₁ + iC₂)(z + iw)^m]`, summed over the
/// binomial expansion.
pub fn harmonic_component(m: usize, c1: f64, c2: f64, z: f64, w: f64) -> (f64, f64) {
    let (mut f3, mut f4) = (0.0, 0.0);
    for k in 0..=m {
        let (cos, sin) = quarter_turn(k);
        let mono = binomial(m, k) * z.powi((m - k) as i32) * w.powi(k as i32);
        f3 += mono * (c1 * cos - c2 * sin);
        f4 += mono * (c1 * sin + c2 * cos);
    }
    (f3, f4)
}

/// Truncated series `f₃ + i f₄ = e^{-a}(Σ_m (C₁^[m] + iC₂^[m])(ζ)^m + C₃ + iC₄)`
/// with `ζ = (z - α) + i(w - β)`, `w = e^a`. Coefficients are polynomials
/// in `n0 = (v_1..v_k, z_2..z_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicExpansion {
    #[serde(rename = "M")]
    pub truncation: usize,
    #[serde(default)]
    pub offset: [f64; 2],
    #[serde(rename = "C1")]
    pub c1: Vec<Poly>,
    #[serde(rename = "C2")]
    pub c2: Vec<Poly>,
    #[serde(rename = "C3")]
    pub c3: Poly,
    #[serde(rename = "C4")]
    pub c4: Poly,
    #[serde(rename = "C5", default, skip_serializing_if = "Option::is_none")]
    pub c5: Option<Poly>,
}

/// Default truncation of the harmonic series.
pub const DEFAULT_TRUNCATION: usize = 8;

impl HarmonicExpansion {
    pub fn zero(truncation: usize, n0_len: usize) -> Self {
        Self {
            truncation,
            offset: [0.0, 0.0],
            c1: vec![Poly::zero(n0_len); truncation],
            c2: vec![Poly::zero(n0_len); truncation],
            c3: Poly::zero(n0_len),
            c4: Poly::zero(n0_len),
            c5: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfsysError> {
        if self.c1.len() != self.truncation || self.c2.len() != self.truncation {
            return Err(ConfsysError::Malformed(format!(
                "C1 and C2 must hold M = {} polynomials",
                self.truncation
            )));
        }
        Ok(())
    }

    /// Checks that every polynomial is over `n0_len` variables (`C₅` over
    /// `n0_len + 1`, with `z` last). Zero polynomials fit any arity.
    pub fn check_arity(&self, n0_len: usize) -> Result<(), ConfsysError> {
        let base = self.c1.iter().chain(&self.c2).chain([&self.c3, &self.c4]);
        let bad = base
            .map(|p| (p, n0_len))
            .chain(self.c5.iter().map(|p| (p, n0_len + 1)))
            .any(|(p, n)| !p.is_zero() && p.nvars() != n);
        if bad {
            return Err(ConfsysError::Malformed(format!(
                "coefficient polynomials must be over {n0_len} variables (C5 over {})",
                n0_len + 1
            )));
        }
        Ok(())
    }

    /// Largest total degree among the coefficient polynomials.
    pub fn degree(&self) -> u32 {
        self.c1
            .iter()
            .chain(&self.c2)
            .chain([&self.c3, &self.c4])
            .filter_map(Poly::degree)
            .max()
            .unwrap_or(0)
    }

    /// `(F₃, F₄) = (Σ F₃^[m] + C₃, Σ F₄^[m] + C₄)` at `(z, w, n0)`.
    pub fn big_f(&self, z: f64, w: f64, n0: &[f64]) -> (f64, f64) {
        let (zz, ww) = (z - self.offset[0], w - self.offset[1]);
        let mut f3 = self.c3.eval(n0);
        let mut f4 = self.c4.eval(n0);
        for m in 1..=self.truncation {
            let (c1, c2) = (self.c1[m - 1].eval(n0), self.c2[m - 1].eval(n0));
            if c1 == 0.0 && c2 == 0.0 {
                continue;
            }
            let (a, b) = harmonic_component(m, c1, c2, zz, ww);
            f3 += a;
            f4 += b;
        }
        (f3, f4)
    }
}

/// Reduced variables `n0 = (v_1..v_k, z_2..z_m)` of a full point.
pub fn n0_of(space: &DamekRicciSpace, p: &DVector<f64>) -> Vec<f64> {
    let (k, m) = (space.k(), space.m());
    p.iter()
        .take(k)
        .chain(p.iter().skip(k + 1).take(m - 1))
        .copied()
        .collect()
}

pub fn assemble_f3_f4(
    exp: &HarmonicExpansion,
    space: &DamekRicciSpace,
    p: &DVector<f64>,
) -> Result<(f64, f64), ConfsysError> {
    exp.validate()?;
    let a = p[space.a_index()];
    if !(a.abs() <= MAX_ABS_A) {
        return Err(ConfsysError::Overflow(a));
    }
    let z = p[space.z_index(0)];
    let (f3, f4) = exp.big_f(z, a.exp(), &n0_of(space, p));
    let scale = (-a).exp();
    let out = (scale * f3, scale * f4);
    if !(out.0.is_finite() && out.1.is_finite()) {
        return Err(ConfsysError::Overflow(a));
    }
    Ok(out)
}

/// Residuals (LHS - RHS) of the seven scalar equations
///
/// ```text
/// (D_x - y/2 ∂_z) f₁ = e^{-a} ∂_a(e^{a/2} f₄)
/// (D_y + x/2 ∂_z) f₁ + (D_x - y/2 ∂_z) f₂ = 0
/// (D_y + x/2 ∂_z) f₂ = e^{-a} ∂_a(e^{a/2} f₄)
/// e^a ∂_z f₁ + e^{a/2}(D_x - y/2 ∂_z) f₃ + f₂ = 0
/// e^a ∂_z f₂ + e^{a/2}(D_y + x/2 ∂_z) f₃ - f₁ = 0
/// e^a (D_x - y/2 ∂_z) f₄ + ∂_a(e^{a/2} f₁) = 0
/// e^a (D_y + x/2 ∂_z) f₄ + ∂_a(e^{a/2} f₂) = 0
/// ```
pub fn subsystem_residuals(
    space: &DamekRicciSpace,
    data: &S0FieldData,
    p: &DVector<f64>,
    h: f64,
) -> Result<[f64; 7], ConfsysError> {
    aligned(space)?;
    space.check_point(p)?;
    let (zi, ai) = (space.z_index(0), space.a_index());
    let (x, y, a) = (p[0], p[1], p[ai]);
    let mut ex = d_direction(space, 0, p);
    ex[zi] -= 0.5 * y;
    let mut ey = d_direction(space, 1, p);
    ey[zi] += 0.5 * x;
    let mut ez = DVector::zeros(p.len());
    ez[zi] = 1.0;

    let along = |f: &ScalarFn, dir: &DVector<f64>| fd::directional(|q| f(q), p, dir, h);
    // ∂_a(e^{a/2} f)
    let da_weighted = |f: &ScalarFn| {
        fd::derivative_scalar(
            |t| {
                let mut q = p.clone();
                q[ai] += t;
                (0.5 * (a + t)).exp() * f(&q)
            },
            h,
        )
    };
    let (ea, ea_half) = (a.exp(), (0.5 * a).exp());
    let rhs = (-a).exp() * da_weighted(&data.f4);
    let (f1, f2) = ((data.f1)(p), (data.f2)(p));

    let out = [
        along(&data.f1, &ex) - rhs,
        along(&data.f1, &ey) + along(&data.f2, &ex),
        along(&data.f2, &ey) - rhs,
        ea * along(&data.f1, &ez) + ea_half * along(&data.f3, &ex) + f2,
        ea * along(&data.f2, &ez) + ea_half * along(&data.f3, &ey) - f1,
        ea * along(&data.f4, &ex) + da_weighted(&data.f1),
        ea * along(&data.f4, &ey) + da_weighted(&data.f2),
    ];
    if out.iter().any(|r| !r.is_finite()) {
        return Err(ConfsysError::NonFinite("subsystem residuals"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Family, GeneralizedHeisenbergAlgebra};
    use crate::fd::DEFAULT_STEP;
    use crate::tensor::conformal_defect;
    use rand::{RngExt, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    const H: f64 = DEFAULT_STEP;

    fn space(family: Family) -> DamekRicciSpace {
        DamekRicciSpace::new(GeneralizedHeisenbergAlgebra::catalog(family, 1).unwrap())
    }

    fn random_point(rng: &mut Xoshiro256PlusPlus, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn scalar<F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static>(f: F) -> ScalarFn {
        Arc::new(f)
    }

    fn test_function(n: usize) -> impl Fn(&DVector<f64>) -> f64 + Clone {
        move |q: &DVector<f64>| {
            (0..n).map(|i| ((i + 1) as f64 * 0.3 * q[i]).sin()).sum::<f64>() + q[0] * q[n - 1] * q[1]
        }
    }

    #[test]
    fn dx_of_x_is_one() {
        let s = space(Family::Quaternionic);
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.1]);
        assert!((dx_apply(&s, |q| q[0], &p, H).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_dx_is_plain_partial() {
        let s = space(Family::Heisenberg);
        let p = DVector::from_vec(vec![0.3, -0.4, 0.2, 0.5]);
        let d = dx_direction(&s, &p).unwrap();
        assert_eq!(d, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn d_operators_avoid_z1_and_a() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        for fam in [Family::Clifford2, Family::Quaternionic, Family::Octonionic] {
            let s = space(fam);
            let p = random_point(&mut rng, s.dim());
            let mut q = p.clone();
            q[s.z_index(0)] += 0.7;
            q[s.a_index()] -= 0.4;
            for d in [dx_direction(&s, &p).unwrap(), dy_direction(&s, &p).unwrap()] {
                assert_eq!(d[s.z_index(0)], 0.0);
                assert_eq!(d[s.a_index()], 0.0);
            }
            assert_eq!(dx_direction(&s, &p).unwrap(), dx_direction(&s, &q).unwrap());
            assert_eq!(dy_direction(&s, &p).unwrap(), dy_direction(&s, &q).unwrap());
        }
    }

    #[test]
    fn operator_identity_with_frame() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for fam in [Family::Heisenberg, Family::Clifford2, Family::Quaternionic] {
            let s = space(fam);
            let f = test_function(s.dim());
            for _ in 0..10 {
                let p = random_point(&mut rng, s.dim());
                let frame = s.frame_at(&p).unwrap();
                let half = (0.5 * p[s.a_index()]).exp();
                let zi = s.z_index(0);
                let mut dz = DVector::zeros(s.dim());
                dz[zi] = 1.0;
                let fz = fd::directional(&f, &p, &dz, H);
                let lhs1 = half * (dx_apply(&s, &f, &p, H).unwrap() - 0.5 * p[1] * fz);
                let lhs2 = half * (dy_apply(&s, &f, &p, H).unwrap() + 0.5 * p[0] * fz);
                let v1 = fd::directional(&f, &p, &frame.column(0).into_owned(), H);
                let v2 = fd::directional(&f, &p, &frame.column(1).into_owned(), H);
                assert!((lhs1 - v1).abs() < 1e-8, "{fam}: {lhs1} vs {v1}");
                assert!((lhs2 - v2).abs() < 1e-8, "{fam}: {lhs2} vs {v2}");
            }
        }
    }

    #[test]
    fn misaligned_basis_is_rejected() {
        let q = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 1).unwrap();
        let perm = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        let maps = q.j_maps().iter().map(|j| perm.transpose() * j * &perm).collect();
        let s = DamekRicciSpace::new(GeneralizedHeisenbergAlgebra::new(maps, 1e-10).unwrap());
        let p = DVector::zeros(8);
        assert_eq!(dx_apply(&s, |q| q[0], &p, H), Err(ConfsysError::BasisNotAligned));
    }

    #[test]
    fn a_frame_field_block_22() {
        let s = space(Family::Heisenberg);
        let one = scalar(|_| 1.0);
        let zero = scalar(|_| 0.0);
        let data = S0FieldData::new(zero.clone(), zero.clone(), zero, one);
        let p = DVector::from_vec(vec![0.2, 0.1, -0.3, 0.4]);
        let b = block_residuals(&s, &data, |_| 0.0, &p, H).unwrap();
        assert!((b.b22[0][0] + 2.0).abs() < 1e-12);
        assert!(b.b22[1][1].abs() < 1e-12);
    }

    #[test]
    fn zero_data_has_zero_residuals() {
        let s = space(Family::Clifford2);
        let p = DVector::from_element(s.dim(), 0.3);
        let data = S0FieldData::zero();
        assert_eq!(block_residuals(&s, &data, |_| 0.0, &p, H).unwrap().max_abs(), 0.0);
        assert_eq!(subsystem_residuals(&s, &data, &p, H).unwrap(), [0.0; 7]);
    }

    #[test]
    fn right_invariant_fields_satisfy_all_blocks() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        for fam in [Family::Heisenberg, Family::Clifford2] {
            let s = space(fam);
            for idx in 0..s.dim() {
                let sp = s.clone();
                let field = CoordinateVectorField::new(s.dim(), move |p| sp.right_invariant(idx, p));
                let data = S0FieldData::from_field(&s, &field).unwrap();
                for _ in 0..3 {
                    let p = random_point(&mut rng, s.dim());
                    assert!(conformal_defect(&s, &field, &p, H).unwrap().rho.abs() < 1e-9);
                    let b = block_residuals(&s, &data, |_| 0.0, &p, H).unwrap();
                    assert!(b.max_abs() < 1e-8, "{fam} idx {idx}: {b:?}");
                    let sub = subsystem_residuals(&s, &data, &p, H).unwrap();
                    assert!(sub.iter().all(|r| r.abs() < 1e-8), "{fam} idx {idx}: {sub:?}");
                }
            }
        }
    }

    #[test]
    fn f1_alone_hits_the_minus_f1_term() {
        let s = space(Family::Heisenberg);
        let one = scalar(|_| 1.0);
        let zero = scalar(|_| 0.0);
        let data = S0FieldData::new(one, zero.clone(), zero.clone(), zero);
        let p = DVector::from_vec(vec![0.2, 0.1, -0.3, 0.4]);
        let sub = subsystem_residuals(&s, &data, &p, H).unwrap();
        assert!((sub[4] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn subsystem_matches_block_entries() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        for fam in [Family::Heisenberg, Family::Quaternionic] {
            let s = space(fam);
            let n = s.dim();
            let f = test_function(n);
            let g = move |q: &DVector<f64>| (q[n - 1] * 0.7).exp() * q[1] + q[0] * q[0];
            let data = S0FieldData::new(
                scalar(f.clone()),
                scalar(g),
                scalar(move |q| q[0] * q[n - 2] - q[n - 1]),
                scalar(move |q| (q[n - 1]).exp() * q[1] + f(q)),
            );
            for _ in 0..5 {
                let p = random_point(&mut rng, n);
                let rho = potential_from_f4(&data, &p, H);
                let b = block_residuals(&s, &data, |_| rho, &p, H).unwrap();
                let sub = subsystem_residuals(&s, &data, &p, H).unwrap();
                let a = p[s.a_index()];
                let (em, ep) = ((-0.5 * a).exp(), (0.5 * a).exp());
                let expected = [
                    0.5 * em * b.b11[0][0],
                    em * b.b11[0][1],
                    0.5 * em * b.b11[1][1],
                    b.b21[0][0],
                    b.b21[0][1],
                    ep * b.b21[1][0],
                    ep * b.b21[1][1],
                ];
                for (x, y) in sub.iter().zip(expected) {
                    assert!((x - y).abs() < 1e-10, "{fam}: {sub:?} vs {expected:?}");
                }
            }
        }
    }

    #[test]
    fn potential_examples() {
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.5]);
        let zero = scalar(|_| 0.0);
        let mut data = S0FieldData::new(zero.clone(), zero.clone(), zero, scalar(|q| q[0] + q[2]));
        assert!(potential_from_f4(&data, &p, H).abs() < 1e-14);
        data.f4 = scalar(|q| q[3].exp());
        assert!((potential_from_f4(&data, &p, H) - 0.5_f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn cauchy_riemann_examples() {
        let r = cauchy_riemann_residual(|z, w, _| z * z - w * w, |z, w, _| 2.0 * z * w, 0.4, 1.2, &[], H).unwrap();
        assert!(r.0.abs() < 1e-10 && r.1.abs() < 1e-10);
        let r = cauchy_riemann_residual(|z, _, _| z, |_, _, _| 0.0, 0.4, 1.2, &[], H).unwrap();
        assert!((r.0 - 1.0).abs() < 1e-12);
        assert!(matches!(
            cauchy_riemann_residual(|z, _, _| z, |_, _, _| 0.0, 0.4, 0.0, &[], H),
            Err(ConfsysError::NonPositiveW(_))
        ));
        let r = cauchy_riemann_residual(
            |z, w, _| harmonic_component(3, 1.0, 2.0, z, w).0,
            |z, w, _| harmonic_component(3, 1.0, 2.0, z, w).1,
            0.3,
            0.9,
            &[],
            H,
        )
        .unwrap();
        assert!(r.0.abs() < 1e-8 && r.1.abs() < 1e-8);
    }

    fn complex_oracle(m: usize, c1: f64, c2: f64, z: f64, w: f64) -> (f64, f64) {
        // (c1 + i c2)(z + i w)^m by repeated multiplication
        let (mut re, mut im) = (c1, c2);
        for _ in 0..m {
            (re, im) = (re * z - im * w, re * w + im * z);
        }
        (re, im)
    }

    #[test]
    fn harmonic_component_examples() {
        assert_eq!(harmonic_component(0, 0.7, -0.2, 3.0, 4.0), (0.7, -0.2));
        assert_eq!(harmonic_component(1, 1.0, 0.0, 2.0, 3.0), (2.0, 3.0));
        assert_eq!(harmonic_component(2, 0.0, 1.0, 1.0, 1.0), (-2.0, 0.0));
    }

    #[test]
    fn harmonic_component_matches_complex_arithmetic() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        for m in 0..=12 {
            for _ in 0..50 {
                let [c1, c2, z, w] = [(); 4].map(|_| rng.random_range(-1.0..1.0));
                let (a, b) = harmonic_component(m, c1, c2, z, w);
                let (x, y) = complex_oracle(m, c1, c2, z, w);
                assert!((a - x).abs() < 1e-12 && (b - y).abs() < 1e-12, "m = {m}");
            }
        }
    }

    #[test]
    fn assemble_examples() {
        let s = space(Family::Heisenberg);
        let p = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let mut exp = HarmonicExpansion::zero(3, 2);
        assert_eq!(assemble_f3_f4(&exp, &s, &p).unwrap(), (0.0, 0.0));

        exp.c4 = Poly::constant(2, 2.5);
        let (_, f4) = assemble_f3_f4(&exp, &s, &p).unwrap();
        assert!((f4 - 2.5 * (-0.4_f64).exp()).abs() < 1e-15);

        let mut exp = HarmonicExpansion::zero(3, 2);
        exp.c1[0] = Poly::constant(2, 1.0);
        let (f3, f4) = assemble_f3_f4(&exp, &s, &p).unwrap();
        assert!((f4 - 1.0).abs() < 1e-15);
        assert!((f3 - 0.3 * (-0.4_f64).exp()).abs() < 1e-15);

        let far = DVector::from_vec(vec![0.0, 0.0, 0.0, 50.0]);
        assert!(matches!(assemble_f3_f4(&exp, &s, &far), Err(ConfsysError::Overflow(_))));
    }

    #[test]
    fn expansion_is_holomorphic_in_z_w() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let n0_len = 2;
        let mut exp = HarmonicExpansion::zero(5, n0_len);
        for m in 0..5 {
            exp.c1[m] = &Poly::constant(n0_len, rng.random_range(-1.0..1.0))
                + &Poly::var(n0_len, 0).scale(rng.random_range(-1.0..1.0));
            exp.c2[m] = Poly::var(n0_len, 1).scale(rng.random_range(-1.0..1.0));
        }
        exp.c3 = Poly::var(n0_len, 0);
        exp.offset = [0.2, 0.5];
        let n0 = [0.3, -0.6];
        for _ in 0..20 {
            let z = rng.random_range(-1.0..1.0);
            let w = rng.random_range(0.4..2.5);
            let (r1, r2) = cauchy_riemann_residual(
                |z, w, n| exp.big_f(z, w, n).0,
                |z, w, n| exp.big_f(z, w, n).1,
                z,
                w,
                &n0,
                H,
            )
            .unwrap();
            assert!(r1.abs() < 1e-7 && r2.abs() < 1e-7);
        }
    }

    #[test]
    fn expansion_json_schema() {
        let mut exp = HarmonicExpansion::zero(2, 2);
        exp.c1[1] = Poly::constant(2, 1.0);
        let v = serde_json::to_value(&exp).unwrap();
        assert_eq!(v["M"], 2);
        assert_eq!(v["offset"], serde_json::json!([0.0, 0.0]));
        assert_eq!(v["C1"][1], serde_json::json!([[[0, 0], 1.0]]));
        assert!(v.get("C5").is_none());
        let back: HarmonicExpansion = serde_json::from_value(v).unwrap();
        assert_eq!(back, exp);
    }
}
