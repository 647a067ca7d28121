//! The coefficient constraints on the harmonic expansion of `(f₃, f₄)` as a
//! finite linear system.
//!
//! Unknowns are the coefficients of the polynomials `C₁^[m]`, `C₂^[m]`
//! (`m = 1..M`) and `C₄` in `n0` up to degree `d`, plus `C₅(n0, z)` up to
//! degree `d + 1`. With
//!
//! ```text
//! 𝒞^{(p)}_{[m,k]} = sin(πk/2) D^p C₁^[m] + cos(πk/2) D^p C₂^[m],   C^[m] = 0 for m > M
//! ```
//!
//! the constraints, each required to vanish identically in `(n0, z)`, are
//!
//! ```text
//! (mk) C(m,k)/k 𝒞^{(2)}_{[m,k]} - y C(m+1,k)(m-k+1)/k 𝒞^{(1)}_{[m+1,k]}
//!      + y²/4 C(m+2,k)(m-k+2)(m-k+1)/k 𝒞^{(0)}_{[m+2,k]}
//!      + C(m+1,k+1)(k+½) 𝒞^{(0)}_{[m+1,k+1]}                 k = 1..M, m = k..M
//! (1)  Σ_m { z^m D²C₂^[m] + m z^{m-1}(-y D C₂^[m] + (m+1)/4 y² C₂^[m+1]) } + D²C₄
//! (2)  Σ_m z^m C₂^[m] + C₄
//! (3)  ½ Σ_m m z^{m-1} C₁^[m] - D C₅ + (y/2) ∂_z C₅
//! ```
//!
//! with `D = D_x`. The mirrored rows use `D = D_y` with `-y ↦ +x` and
//! `y² ↦ x²` in (mk) and (1).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::confsys::{binomial, quarter_turn, HarmonicExpansion};
use crate::fd;
use crate::linalg;
use crate::poly::{monomials_up_to, Derivation, Exponents, Poly};
use crate::space::DamekRicciSpace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffsysError {
    #[error("truncation M = {0} is too small; at least 3 is needed")]
    TruncationTooSmall(usize),
    #[error("coefficient degree must be at least 1")]
    DegreeTooSmall,
    #[error("basis is not aligned: J_1 V_1 must equal V_2")]
    BasisNotAligned,
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Which identity a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Constraint {
    Mk { k: usize, m: usize, mirrored: bool },
    One { mirrored: bool },
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowLabel {
    pub constraint: Constraint,
    /// Monomial in `(n0, z)` whose coefficient the row extracts.
    pub monomial: Exponents,
}

/// Column layout of the unknown vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout {
    pub truncation: usize,
    pub degree: u32,
    /// Number of reduced variables; the polynomial ring also carries `z`
    /// as its last variable.
    pub n0_len: usize,
    pub base_monomials: Vec<Exponents>,
    pub c5_monomials: Vec<Exponents>,
}

impl Layout {
    fn nvars(&self) -> usize {
        self.n0_len + 1
    }

    fn block(&self) -> usize {
        self.base_monomials.len()
    }

    pub fn columns(&self) -> usize {
        (2 * self.truncation + 1) * self.block() + self.c5_monomials.len()
    }

    fn c1_offset(&self, m: usize) -> usize {
        (2 * (m - 1)) * self.block()
    }

    fn c2_offset(&self, m: usize) -> usize {
        (2 * (m - 1) + 1) * self.block()
    }

    fn c4_offset(&self) -> usize {
        2 * self.truncation * self.block()
    }

    fn c5_offset(&self) -> usize {
        self.c4_offset() + self.block()
    }

    fn poly_at(&self, u: &DVector<f64>, offset: usize, monos: &[Exponents]) -> Poly {
        let mut p = Poly::zero(self.nvars());
        for (i, e) in monos.iter().enumerate() {
            p.add_term(e.clone(), u[offset + i]);
        }
        p
    }

    pub fn decode(&self, u: &DVector<f64>) -> Result<Coefficients, CoeffsysError> {
        if u.len() != self.columns() {
            return Err(CoeffsysError::DimensionMismatch {
                got: u.len(),
                expected: self.columns(),
            });
        }
        let b = &self.base_monomials;
        Ok(Coefficients {
            c1: (1..=self.truncation)
                .map(|m| self.poly_at(u, self.c1_offset(m), b))
                .collect(),
            c2: (1..=self.truncation)
                .map(|m| self.poly_at(u, self.c2_offset(m), b))
                .collect(),
            c4: self.poly_at(u, self.c4_offset(), b),
            c5: self.poly_at(u, self.c5_offset(), &self.c5_monomials),
        })
    }

    /// Column index of a named coefficient, for building test vectors.
    pub fn column(&self, unknown: Unknown, monomial: &[u32]) -> Option<usize> {
        let (offset, monos) = match unknown {
            Unknown::C1(m) if (1..=self.truncation).contains(&m) => (self.c1_offset(m), &self.base_monomials),
            Unknown::C2(m) if (1..=self.truncation).contains(&m) => (self.c2_offset(m), &self.base_monomials),
            Unknown::C4 => (self.c4_offset(), &self.base_monomials),
            Unknown::C5 => (self.c5_offset(), &self.c5_monomials),
            _ => return None,
        };
        monos.iter().position(|e| e.as_slice() == monomial).map(|i| offset + i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    C1(usize),
    C2(usize),
    C4,
    C5,
}

/// Decoded unknowns, as polynomials in `(n0, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub c1: Vec<Poly>,
    pub c2: Vec<Poly>,
    pub c4: Poly,
    pub c5: Poly,
}

impl Coefficients {
    /// The same coefficients as a harmonic expansion over `n0` (`C₃ = 0`).
    pub fn to_expansion(&self, n0_len: usize) -> HarmonicExpansion {
        let restrict = |p: &Poly| {
            let mut out = Poly::zero(n0_len);
            for (e, c) in p.terms() {
                debug_assert_eq!(e[n0_len], 0);
                out.add_term(e[..n0_len].to_vec(), c);
            }
            out
        };
        HarmonicExpansion {
            truncation: self.c1.len(),
            offset: [0.0, 0.0],
            c1: self.c1.iter().map(restrict).collect(),
            c2: self.c2.iter().map(restrict).collect(),
            c3: Poly::zero(n0_len),
            c4: restrict(&self.c4),
            c5: Some(self.c5.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SystemOptions {
    pub truncation: usize,
    pub degree: u32,
    /// Add the rows obtained by mirroring with `D_y`.
    pub mirrored_rows: bool,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            truncation: 6,
            degree: 2,
            mirrored_rows: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedCoefficientSystem {
    pub options: SystemOptions,
    pub layout: Layout,
    pub matrix: DMatrix<f64>,
    pub rows: Vec<RowLabel>,
    dx: Derivation,
    dy: Derivation,
}

// D_x (i = 0) or D_y (i = 1) on polynomials in (n0, z).
fn derivation(space: &DamekRicciSpace, i: usize) -> Derivation {
    let (k, m) = (space.k(), space.m());
    let nvars = k + m;
    let alg = space.algebra();
    let mut coefficients = vec![Poly::zero(nvars); nvars];
    coefficients[i] = Poly::constant(nvars, 1.0);
    // n0 index of z_{r+1} (0-based r >= 1) is k + r - 1.
    for r in 1..m {
        let mut c = Poly::zero(nvars);
        for j in 0..k {
            c.add_scaled(&Poly::var(nvars, j), -0.5 * alg.structure_constant(r, i, j));
        }
        coefficients[k + r - 1] = c;
    }
    Derivation { coefficients }
}

pub fn build_system(
    space: &DamekRicciSpace,
    options: SystemOptions,
) -> Result<TruncatedCoefficientSystem, CoeffsysError> {
    if options.truncation < 3 {
        return Err(CoeffsysError::TruncationTooSmall(options.truncation));
    }
    if options.degree < 1 {
        return Err(CoeffsysError::DegreeTooSmall);
    }
    if !space.algebra().is_aligned(1e-12) {
        return Err(CoeffsysError::BasisNotAligned);
    }
    let n0_len = space.k() + space.m() - 1;
    let nvars = n0_len + 1;
    let base_monomials = monomials_up_to(n0_len, options.degree)
        .into_iter()
        .map(|mut e| {
            e.push(0);
            e
        })
        .collect();
    let layout = Layout {
        truncation: options.truncation,
        degree: options.degree,
        n0_len,
        base_monomials,
        c5_monomials: monomials_up_to(nvars, options.degree + 1),
    };
    let mut sys = TruncatedCoefficientSystem {
        options,
        matrix: DMatrix::zeros(0, layout.columns()),
        rows: Vec::new(),
        layout,
        dx: derivation(space, 0),
        dy: derivation(space, 1),
    };

    let ncols = sys.layout.columns();
    let column_images: Vec<Vec<(Constraint, Poly)>> = (0..ncols)
        .into_par_iter()
        .map(|j| {
            let mut u = DVector::zeros(ncols);
            u[j] = 1.0;
            sys.constraint_polys(&sys.layout.decode(&u).expect("layout length"))
        })
        .collect();

    // Row order: constraint order, then monomial order within a constraint.
    let mut rows: Vec<RowLabel> = Vec::new();
    let constraints: Vec<Constraint> = column_images[0].iter().map(|(c, _)| *c).collect();
    for (ci, &constraint) in constraints.iter().enumerate() {
        let mut monos: Vec<Exponents> = column_images
            .iter()
            .flat_map(|img| img[ci].1.terms().map(|(e, _)| e.clone()).collect::<Vec<_>>())
            .collect();
        monos.sort();
        monos.dedup();
        rows.extend(monos.into_iter().map(|monomial| RowLabel { constraint, monomial }));
    }
    let index: std::collections::HashMap<(usize, Exponents), usize> = rows
        .iter()
        .enumerate()
        .map(|(r, lab)| {
            let ci = constraints.iter().position(|c| *c == lab.constraint).unwrap();
            ((ci, lab.monomial.clone()), r)
        })
        .collect();
    let mut matrix = DMatrix::zeros(rows.len(), ncols);
    for (j, img) in column_images.iter().enumerate() {
        for (ci, (_, poly)) in img.iter().enumerate() {
            for (e, c) in poly.terms() {
                matrix[(index[&(ci, e.clone())], j)] = c;
            }
        }
    }
    sys.matrix = matrix;
    sys.rows = rows;
    Ok(sys)
}

impl TruncatedCoefficientSystem {
    fn nvars(&self) -> usize {
        self.layout.nvars()
    }

    fn z(&self) -> usize {
        self.layout.n0_len
    }

    /// Every constraint evaluated on the given coefficients, in row order.
    pub fn constraint_polys(&self, c: &Coefficients) -> Vec<(Constraint, Poly)> {
        let big_m = self.layout.truncation;
        let mut out = Vec::new();
        let mirrors: &[bool] = if self.options.mirrored_rows {
            &[false, true]
        } else {
            &[false]
        };
        for &mirrored in mirrors {
            for k in 1..=big_m {
                for m in k..=big_m {
                    out.push((Constraint::Mk { k, m, mirrored }, self.mk_row(c, k, m, mirrored)));
                }
            }
        }
        for &mirrored in mirrors {
            out.push((Constraint::One { mirrored }, self.row_one(c, mirrored)));
        }
        out.push((Constraint::Two, self.row_two(c)));
        out.push((Constraint::Three, self.row_three(c)));
        out
    }

    fn op(&self, mirrored: bool) -> &Derivation {
        if mirrored {
            &self.dy
        } else {
            &self.dx
        }
    }

    // (sign, variable) replacing "-y" by "+x" when mirrored.
    fn partner(&self, mirrored: bool) -> (f64, Poly) {
        if mirrored {
            (1.0, Poly::var(self.nvars(), 0))
        } else {
            (-1.0, Poly::var(self.nvars(), 1))
        }
    }

    fn cal(&self, c: &Coefficients, p: usize, m: usize, k: usize, mirrored: bool) -> Poly {
        if m == 0 || m > self.layout.truncation {
            return Poly::zero(self.nvars());
        }
        let (cos, sin) = quarter_turn(k);
        let d = self.op(mirrored);
        let mut out = Poly::zero(self.nvars());
        if sin != 0.0 {
            out.add_scaled(&d.apply_n(&c.c1[m - 1], p), sin);
        }
        if cos != 0.0 {
            out.add_scaled(&d.apply_n(&c.c2[m - 1], p), cos);
        }
        out
    }

    fn mk_row(&self, c: &Coefficients, k: usize, m: usize, mirrored: bool) -> Poly {
        let (sign, t) = self.partner(mirrored);
        let kf = k as f64;
        let mut out = self.cal(c, 2, m, k, mirrored).scale(binomial(m, k) / kf);
        let w1 = sign * binomial(m + 1, k) * (m - k + 1) as f64 / kf;
        out.add_scaled(&t.mul(&self.cal(c, 1, m + 1, k, mirrored)), w1);
        let w2 = 0.25 * binomial(m + 2, k) * ((m - k + 2) * (m - k + 1)) as f64 / kf;
        out.add_scaled(&t.mul(&t).mul(&self.cal(c, 0, m + 2, k, mirrored)), w2);
        let w3 = binomial(m + 1, k + 1) * (kf + 0.5);
        out.add_scaled(&self.cal(c, 0, m + 1, k + 1, mirrored), w3);
        out
    }

    fn row_one(&self, c: &Coefficients, mirrored: bool) -> Poly {
        let (sign, t) = self.partner(mirrored);
        let d = self.op(mirrored);
        let big_m = self.layout.truncation;
        let mut out = d.apply_n(&c.c4, 2);
        for m in 1..=big_m {
            out.add_scaled(&d.apply_n(&c.c2[m - 1], 2).shift(self.z(), m as u32), 1.0);
            let mut inner = t.mul(&d.apply(&c.c2[m - 1])).scale(sign);
            if m < big_m {
                inner.add_scaled(&t.mul(&t).mul(&c.c2[m]), (m + 1) as f64 / 4.0);
            }
            out.add_scaled(&inner.shift(self.z(), (m - 1) as u32), m as f64);
        }
        out
    }

    fn row_two(&self, c: &Coefficients) -> Poly {
        let mut out = c.c4.clone();
        for (i, p) in c.c2.iter().enumerate() {
            out.add_scaled(&p.shift(self.z(), (i + 1) as u32), 1.0);
        }
        out
    }

    fn row_three(&self, c: &Coefficients) -> Poly {
        let mut out = Poly::zero(self.nvars());
        for (i, p) in c.c1.iter().enumerate() {
            let m = i + 1;
            out.add_scaled(&p.shift(self.z(), (m - 1) as u32), 0.5 * m as f64);
        }
        out.add_scaled(&self.dx.apply(&c.c5), -1.0);
        let y = Poly::var(self.nvars(), 1);
        out.add_scaled(&y.mul(&c.c5.partial(self.z())), 0.5);
        out
    }

    /// `‖A u‖`.
    pub fn residual(&self, u: &DVector<f64>) -> f64 {
        (&self.matrix * u).norm()
    }
}

/// Orthonormal basis of the solution space.
#[derive(Debug, Clone)]
pub struct SolutionSpace {
    pub basis: Vec<DVector<f64>>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl SolutionSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Default relative singular-value threshold.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;

pub fn solve_system(sys: &TruncatedCoefficientSystem, tol: f64) -> SolutionSpace {
    let ns = linalg::nullspace(&sys.matrix, tol);
    SolutionSpace {
        basis: (0..ns.dim()).map(|c| ns.basis.column(c).into_owned()).collect(),
        singular_values: ns.singular_values,
        threshold: ns.threshold,
    }
}

/// Largest coefficient magnitudes, per group, over a set of unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanishingSummary {
    pub max_c4: f64,
    pub max_c2: f64,
    /// `C₁^[m]` for `m >= 3`.
    pub max_c1_high: f64,
    pub max_c1_low: f64,
    pub max_c5: f64,
}

pub fn vanishing_summary(layout: &Layout, basis: &[DVector<f64>]) -> VanishingSummary {
    let mut s = VanishingSummary {
        max_c4: 0.0,
        max_c2: 0.0,
        max_c1_high: 0.0,
        max_c1_low: 0.0,
        max_c5: 0.0,
    };
    for u in basis {
        let c = layout.decode(u).expect("basis vector length");
        s.max_c4 = s.max_c4.max(c.c4.max_abs_coefficient());
        for p in &c.c2 {
            s.max_c2 = s.max_c2.max(p.max_abs_coefficient());
        }
        for (i, p) in c.c1.iter().enumerate() {
            let v = p.max_abs_coefficient();
            if i >= 2 {
                s.max_c1_high = s.max_c1_high.max(v);
            } else {
                s.max_c1_low = s.max_c1_low.max(v);
            }
        }
        s.max_c5 = s.max_c5.max(c.c5.max_abs_coefficient());
    }
    s
}

/// `f₄` of the expansion at a full point.
pub fn f4_from_solution(
    exp: &HarmonicExpansion,
    space: &DamekRicciSpace,
    p: &DVector<f64>,
) -> Result<f64, crate::confsys::ConfsysError> {
    crate::confsys::assemble_f3_f4(exp, space, p).map(|(_, f4)| f4)
}

/// `ρ = ∂f₄/∂a` by differences.
pub fn rho_of_solution(
    exp: &HarmonicExpansion,
    space: &DamekRicciSpace,
    p: &DVector<f64>,
    h: f64,
) -> Result<f64, crate::confsys::ConfsysError> {
    let a = space.a_index();
    f4_from_solution(exp, space, p)?;
    Ok(fd::partial(
        |q| f4_from_solution(exp, space, q).unwrap_or(f64::NAN),
        p,
        a,
        h,
    ))
}

/// `C₁^[1](n0) + 2 z C₁^[2](n0)`.
pub fn f4_closed_form(exp: &HarmonicExpansion, space: &DamekRicciSpace, p: &DVector<f64>) -> f64 {
    let n0 = crate::confsys::n0_of(space, p);
    let z = p[space.z_index(0)] - exp.offset[0];
    let c = |m: usize| exp.c1.get(m - 1).map_or(0.0, |q| q.eval(&n0));
    c(1) + 2.0 * z * c(2)
}
