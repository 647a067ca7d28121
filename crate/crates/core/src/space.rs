//! Damek-Ricci spaces as a single global chart.
//!
//! Coordinates are ordered `(v_1..v_k, z_1..z_m, a)`. In these coordinates the
//! left-invariant orthonormal frame reads
//!
//! ```text
//! V_i = e^{a/2} ∂_{v_i} - (e^{a/2}/2) Σ_r Σ_j A^r_{ij} v_j ∂_{z_r}
//! Z_r = e^a ∂_{z_r}
//! A   = ∂_a
//! ```
//!
//! and the metric is the one making this frame orthonormal.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::GeneralizedHeisenbergAlgebra;

/// Points with `|a|` above this are rejected (`e^a` would lose precision).
pub const MAX_ABS_A: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("point has a non-finite coordinate")]
    NonFinitePoint,
    #[error("|a| = {0} exceeds the supported range {MAX_ABS_A}")]
    OutOfRange(f64),
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("basis is not aligned: J_1 V_1 must equal V_2")]
    BasisNotAligned,
    #[error("span{{V, J_Z V, Z, A}} is not closed under the bracket (leak {0:e})")]
    NotClosed(f64),
}

/// The solvable extension `s = v ⊕ z ⊕ RA` with `[A, V] = V/2`, `[A, Z] = Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DamekRicciSpace {
    alg: GeneralizedHeisenbergAlgebra,
}

/// Frame/coordinate indices of the subalgebra `s0 = span{V, J_Z V, Z, A}`.
/// Frame index and coordinate index coincide: `x = v_1`, `y = v_2`, `z = z_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct S0Subframe {
    pub v: usize,
    pub jzv: usize,
    pub z: usize,
    pub a: usize,
}

impl S0Subframe {
    pub fn indices(&self) -> [usize; 4] {
        [self.v, self.jzv, self.z, self.a]
    }
}

impl DamekRicciSpace {
    pub fn new(alg: GeneralizedHeisenbergAlgebra) -> Self {
        Self { alg }
    }

    pub fn algebra(&self) -> &GeneralizedHeisenbergAlgebra {
        &self.alg
    }

    pub fn k(&self) -> usize {
        self.alg.k()
    }

    pub fn m(&self) -> usize {
        self.alg.m()
    }

    pub fn dim(&self) -> usize {
        self.alg.k() + self.alg.m() + 1
    }

    /// Coordinate/frame index of `V_i` (0-based `i`).
    pub fn v_index(&self, i: usize) -> usize {
        i
    }

    /// Coordinate/frame index of `Z_r` (0-based `r`).
    pub fn z_index(&self, r: usize) -> usize {
        self.k() + r
    }

    pub fn a_index(&self) -> usize {
        self.k() + self.m()
    }

    pub fn check_point(&self, p: &DVector<f64>) -> Result<(), SpaceError> {
        if p.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                got: p.len(),
                expected: self.dim(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(SpaceError::NonFinitePoint);
        }
        let a = p[self.a_index()];
        if a.abs() > MAX_ABS_A {
            return Err(SpaceError::OutOfRange(a));
        }
        Ok(())
    }

    /// `c[(r, i)] = Σ_j A^r_{ij} v_j`, the z-coupling of the frame.
    fn coupling(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.m());
        let v = p.rows(0, k);
        let mut c = DMatrix::zeros(m, k);
        for r in 0..m {
            let ar = &self.alg.structure()[r];
            for i in 0..k {
                c[(r, i)] = (0..k).map(|j| ar[(i, j)] * v[j]).sum();
            }
        }
        c
    }

    /// Column `i` holds the coordinate components of the `i`-th frame field.
    pub fn frame_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, SpaceError> {
        self.check_point(p)?;
        let (k, m, n) = (self.k(), self.m(), self.dim());
        let a = p[self.a_index()];
        let half = (0.5 * a).exp();
        let full = a.exp();
        let c = self.coupling(p);
        let mut f = DMatrix::zeros(n, n);
        for i in 0..k {
            f[(i, i)] = half;
            for r in 0..m {
                f[(k + r, i)] = -0.5 * half * c[(r, i)];
            }
        }
        for r in 0..m {
            f[(k + r, k + r)] = full;
        }
        f[(n - 1, n - 1)] = 1.0;
        Ok(f)
    }

    /// Inverse of [`Self::frame_at`] (rows are the dual coframe), computed
    /// from the block-triangular structure.
    pub fn coframe_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, SpaceError> {
        self.check_point(p)?;
        let (k, m, n) = (self.k(), self.m(), self.dim());
        let a = p[self.a_index()];
        let inv_half = (-0.5 * a).exp();
        let inv_full = (-a).exp();
        let c = self.coupling(p);
        let mut w = DMatrix::zeros(n, n);
        for i in 0..k {
            w[(i, i)] = inv_half;
            for r in 0..m {
                // -D2^{-1} B D1^{-1} with B = -(e^{a/2}/2) c.
                w[(k + r, i)] = 0.5 * inv_full * c[(r, i)];
            }
        }
        for r in 0..m {
            w[(k + r, k + r)] = inv_full;
        }
        w[(n - 1, n - 1)] = 1.0;
        Ok(w)
    }

    /// Coordinate components of the metric, `g = W^T W` with `W` the coframe.
    pub fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>, SpaceError> {
        let w = self.coframe_at(p)?;
        Ok(w.transpose() * w)
    }

    /// Lie bracket on `s`, vectors laid out as `(v, z, a)`.
    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (k, m, n) = (self.k(), self.m(), self.dim());
        assert!(x.len() == n && y.len() == n, "bracket arguments must have length {n}");
        let (xa, ya) = (x[n - 1], y[n - 1]);
        let xv = x.rows(0, k).into_owned();
        let yv = y.rows(0, k).into_owned();
        let zz = self.alg.bracket_v(&xv, &yv).expect("lengths checked above");
        let mut out = DVector::zeros(n);
        for i in 0..k {
            out[i] = 0.5 * (xa * y[i] - ya * x[i]);
        }
        for r in 0..m {
            out[k + r] = zz[r] + xa * y[k + r] - ya * x[k + r];
        }
        out
    }

    /// Indices of `s0 = span{V_1, J_{Z_1} V_1, Z_1, A}`, after checking the
    /// basis convention and bracket closure.
    pub fn s0_subframe(&self) -> Result<S0Subframe, SpaceError> {
        if !self.alg.is_aligned(1e-12) {
            return Err(SpaceError::BasisNotAligned);
        }
        let s0 = S0Subframe {
            v: 0,
            jzv: 1,
            z: self.z_index(0),
            a: self.a_index(),
        };
        let n = self.dim();
        let idx = s0.indices();
        let unit = |i: usize| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        };
        let mut leak = 0.0_f64;
        for &i in &idx {
            for &j in &idx {
                let b = self.bracket(&unit(i), &unit(j));
                for (c, val) in b.iter().enumerate() {
                    if !idx.contains(&c) {
                        leak = leak.max(val.abs());
                    }
                }
            }
        }
        if leak > 1e-12 {
            return Err(SpaceError::NotClosed(leak));
        }
        Ok(s0)
    }

    /// Coordinate components of the right-invariant field generated by the
    /// basis element with frame index `idx`. These generate left
    /// translations and are therefore Killing:
    ///
    /// ```text
    /// V_i -> ∂_{v_i} + ½ Σ_r Σ_j A^r_{ij} v_j ∂_{z_r}
    /// Z_r -> ∂_{z_r}
    /// A   -> ½ v·∂_v + z·∂_z + ∂_a
    /// ```
    pub fn right_invariant(&self, idx: usize, p: &DVector<f64>) -> DVector<f64> {
        let (k, m, n) = (self.k(), self.m(), self.dim());
        let mut out = DVector::zeros(n);
        if idx < k {
            out[idx] = 1.0;
            let c = self.coupling(p);
            for r in 0..m {
                out[k + r] = 0.5 * c[(r, idx)];
            }
        } else if idx < k + m {
            out[idx] = 1.0;
        } else {
            for i in 0..k {
                out[i] = 0.5 * p[i];
            }
            for r in 0..m {
                out[k + r] = p[k + r];
            }
            out[n - 1] = 1.0;
        }
        out
    }
}
