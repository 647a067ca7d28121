//! Generalized Heisenberg algebras `n = v ⊕ z`.
//!
//! An algebra is described by one skew endomorphism `J_r` of `v` per
//! orthonormal center vector `Z_r`, in a fixed orthonormal basis
//! `V_1..V_k` of `v`. The bracket `v × v → z` is recovered from
//! `<J_Z V, W> = <Z, [V, W]>`, so the structure constants are
//! `A^r_{ij} = <J_r V_i, V_j>`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Tolerance used when validating the built-in catalog matrices.
pub const CATALOG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("J-map {index} is not skew-symmetric (max |J + J^T| = {deviation:e})")]
    NotSkew { index: usize, deviation: f64 },
    #[error("J-maps {r} and {s} violate J_r J_s + J_s J_r = -2 delta_rs Id (max deviation {deviation:e})")]
    CliffordViolation { r: usize, s: usize, deviation: f64 },
    #[error("unsupported algebra family '{0}'")]
    UnsupportedFamily(String),
    #[error("vector is not a unit vector (norm {0})")]
    NotUnit(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("algebra needs at least one J-map and a nonempty v")]
    Degenerate,
}

/// Built-in families of Clifford modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `m = 1`, standard symplectic structure on `R^2` per copy.
    Heisenberg,
    /// `m = 2`, the two quaternion units `i, j` acting on `R^4`.
    Clifford2,
    /// `m = 3`, left multiplication by `i, j, k` on the quaternions.
    Quaternionic,
    /// `m = 7`, left multiplication by imaginary octonion units on `R^8`.
    Octonionic,
}

impl Family {
    /// Dimension of one irreducible copy of the module.
    pub fn module_dim(self) -> usize {
        match self {
            Family::Heisenberg => 2,
            Family::Clifford2 | Family::Quaternionic => 4,
            Family::Octonionic => 8,
        }
    }

    pub fn center_dim(self) -> usize {
        match self {
            Family::Heisenberg => 1,
            Family::Clifford2 => 2,
            Family::Quaternionic => 3,
            Family::Octonionic => 7,
        }
    }
}

impl FromStr for Family {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heisenberg" => Ok(Family::Heisenberg),
            "clifford2" => Ok(Family::Clifford2),
            "quaternionic" => Ok(Family::Quaternionic),
            "octonionic" => Ok(Family::Octonionic),
            other => Err(AlgebraError::UnsupportedFamily(other.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Heisenberg => "heisenberg",
            Family::Clifford2 => "clifford2",
            Family::Quaternionic => "quaternionic",
            Family::Octonionic => "octonionic",
        };
        f.write_str(name)
    }
}

/// A validated generalized Heisenberg algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedHeisenbergAlgebra {
    k: usize,
    m: usize,
    j_maps: Vec<DMatrix<f64>>,
    /// `structure[r][(i, j)] = A^r_{ij}`.
    structure: Vec<DMatrix<f64>>,
}

/// Orthogonal splitting `v = J_z V ⊕ ker ad(V)` for a unit vector `V`.
#[derive(Debug, Clone)]
pub struct AdKernel {
    /// Orthonormal basis of `ker ad(V)`.
    pub kernel: Vec<DVector<f64>>,
    /// Orthonormal basis of `J_z V`.
    pub image: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct J2Report {
    pub holds: bool,
    /// First pair `(r, s)` (0-based) whose product leaves `span{J_t}`.
    pub witness: Option<(usize, usize)>,
    /// Largest relative projection residual over all pairs.
    pub max_residual: f64,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

impl GeneralizedHeisenbergAlgebra {
    /// Validates the J-maps and computes the structure tensor.
    pub fn new(j_maps: Vec<DMatrix<f64>>, tol: f64) -> Result<Self, AlgebraError> {
        if !(tol > 0.0) {
            return Err(AlgebraError::InvalidTolerance(tol));
        }
        let first = j_maps.first().ok_or(AlgebraError::Degenerate)?;
        let k = first.nrows();
        if k == 0 {
            return Err(AlgebraError::Degenerate);
        }
        for (idx, j) in j_maps.iter().enumerate() {
            if j.nrows() != k || j.ncols() != k {
                return Err(AlgebraError::DimensionMismatch(format!(
                    "J-map {idx} is {}x{}, expected {k}x{k}",
                    j.nrows(),
                    j.ncols()
                )));
            }
        }
        for (index, j) in j_maps.iter().enumerate() {
            let deviation = max_abs(&(j + j.transpose()));
            if deviation > tol {
                return Err(AlgebraError::NotSkew { index, deviation });
            }
        }
        let identity = DMatrix::<f64>::identity(k, k);
        for r in 0..j_maps.len() {
            for s in r..j_maps.len() {
                let mut anti = &j_maps[r] * &j_maps[s] + &j_maps[s] * &j_maps[r];
                if r == s {
                    anti += &identity * 2.0;
                }
                let deviation = max_abs(&anti);
                if deviation > tol {
                    return Err(AlgebraError::CliffordViolation { r, s, deviation });
                }
            }
        }
        let structure = j_maps.iter().map(|j| j.transpose()).collect();
        Ok(Self {
            k,
            m: j_maps.len(),
            j_maps,
            structure,
        })
    }

    /// One of the built-in catalog algebras, `multiplicity` copies of the
    /// irreducible module.
    pub fn catalog(family: Family, multiplicity: usize) -> Result<Self, AlgebraError> {
        if multiplicity == 0 {
            return Err(AlgebraError::Degenerate);
        }
        let blocks = match family {
            Family::Heisenberg => vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])],
            Family::Clifford2 => {
                let mut q = left_multiplication(4, &[(1, 2, 3)]);
                q.truncate(2);
                q
            }
            Family::Quaternionic => left_multiplication(4, &[(1, 2, 3)]),
            Family::Octonionic => left_multiplication(8, &OCTONION_TRIPLES),
        };
        let j_maps = blocks.iter().map(|b| block_diagonal(b, multiplicity)).collect();
        Self::new(j_maps, CATALOG_TOL)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn j_maps(&self) -> &[DMatrix<f64>] {
        &self.j_maps
    }

    pub fn j_map(&self, r: usize) -> &DMatrix<f64> {
        &self.j_maps[r]
    }

    /// Structure constant `A^r_{ij} = <[V_i, V_j], Z_r>` (0-based indices).
    pub fn structure_constant(&self, r: usize, i: usize, j: usize) -> f64 {
        self.structure[r][(i, j)]
    }

    pub fn structure(&self) -> &[DMatrix<f64>] {
        &self.structure
    }

    /// `J_Z` for an arbitrary center vector given in the `Z_r` basis.
    pub fn j_of(&self, z: &DVector<f64>) -> Result<DMatrix<f64>, AlgebraError> {
        self.check_len(z, self.m, "center vector")?;
        let mut out = DMatrix::zeros(self.k, self.k);
        for (r, j) in self.j_maps.iter().enumerate() {
            out += j * z[r];
        }
        Ok(out)
    }

    /// `[V, W] ∈ z`, r-th component `<J_r V, W>`.
    pub fn bracket_v(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>, AlgebraError> {
        self.check_len(v, self.k, "first argument")?;
        self.check_len(w, self.k, "second argument")?;
        Ok(DVector::from_iterator(
            self.m,
            self.j_maps.iter().map(|j| (j * v).dot(w)),
        ))
    }

    /// Bracket on all of `n`, vectors laid out as `(v_1..v_k, z_1..z_m)`.
    pub fn bracket_n(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, AlgebraError> {
        let n = self.k + self.m;
        self.check_len(x, n, "first argument")?;
        self.check_len(y, n, "second argument")?;
        let xv = x.rows(0, self.k).into_owned();
        let yv = y.rows(0, self.k).into_owned();
        let z = self.bracket_v(&xv, &yv)?;
        let mut out = DVector::zeros(n);
        out.rows_mut(self.k, self.m).copy_from(&z);
        Ok(out)
    }

    /// Splits `v` into `J_z V` and `ker ad(V)` for a unit vector `V`.
    /// Rank decisions threshold singular values at `tol * sigma_max`.
    pub fn kernel_ad(&self, v: &DVector<f64>, tol: f64) -> Result<AdKernel, AlgebraError> {
        self.check_len(v, self.k, "vector")?;
        let norm = v.norm();
        if (norm - 1.0).abs() > tol {
            return Err(AlgebraError::NotUnit(norm));
        }
        // Row r of ad(V) is (J_r V)^T.
        let images: Vec<DVector<f64>> = self.j_maps.iter().map(|j| j * v).collect();
        let mut ad = DMatrix::zeros(self.m, self.k);
        for (r, img) in images.iter().enumerate() {
            ad.set_row(r, &img.transpose());
        }
        let ns = linalg::nullspace(&ad, tol);
        let kernel = (0..ns.dim()).map(|c| ns.basis.column(c).into_owned()).collect();
        let image = linalg::gram_schmidt(&images, tol);
        Ok(AdKernel { kernel, image })
    }

    /// Re-expresses the algebra in the basis `V_1, J_1 V_1, .., J_m V_1,
    /// (ker ad(V_1) by Gram-Schmidt)`. Returns the new algebra and the
    /// orthogonal change of basis whose columns are the new basis vectors in
    /// old coordinates.
    pub fn aligned(&self, v1: Option<&DVector<f64>>, tol: f64) -> Result<(Self, DMatrix<f64>), AlgebraError> {
        let v1 = match v1 {
            Some(v) => v.clone(),
            None => {
                let mut e = DVector::zeros(self.k);
                e[0] = 1.0;
                e
            }
        };
        let split = self.kernel_ad(&v1, tol)?;
        let mut columns = vec![v1.clone()];
        columns.extend(self.j_maps.iter().map(|j| j * &v1));
        // Prefer standard basis vectors for the kernel part so already
        // aligned inputs come back unchanged.
        let mut candidates = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let mut e = DVector::zeros(self.k);
            e[i] = 1.0;
            candidates.push(e);
        }
        let kernel_projected: Vec<DVector<f64>> = candidates
            .iter()
            .map(|e| {
                split
                    .kernel
                    .iter()
                    .fold(DVector::zeros(self.k), |acc, q| acc + q * q.dot(e))
            })
            .collect();
        // ker ad(V_1) contains V_1 itself; orthogonalise against it first.
        let mut seeded = vec![v1.clone()];
        seeded.extend(kernel_projected.into_iter().filter(|w| w.norm() > tol));
        let kernel = linalg::gram_schmidt(&seeded, tol);
        columns.extend(kernel.into_iter().skip(1));
        if columns.len() != self.k {
            return Err(AlgebraError::DimensionMismatch(format!(
                "aligned basis has {} vectors, expected {}",
                columns.len(),
                self.k
            )));
        }
        let q = DMatrix::from_columns(&columns);
        let j_maps = self.j_maps.iter().map(|j| q.transpose() * j * &q).collect();
        Ok((Self::new(j_maps, tol.max(CATALOG_TOL))?, q))
    }

    /// Whether `J_1 V_1 = V_2`, the convention the 4-dimensional subalgebra
    /// and the operators `D_x, D_y` rely on.
    pub fn is_aligned(&self, tol: f64) -> bool {
        if self.k < 2 {
            return false;
        }
        let col = self.j_maps[0].column(0);
        (0..self.k).all(|i| {
            let expected = if i == 1 { 1.0 } else { 0.0 };
            (col[i] - expected).abs() <= tol
        })
    }

    /// The J²-condition: every product `J_r J_s` (r ≠ s) lies in
    /// `span{J_t}`. Residuals are Frobenius least-squares residuals divided
    /// by `||J_r J_s||_F`.
    pub fn j2_condition(&self, tol: f64) -> J2Report {
        if self.m < 2 {
            return J2Report {
                holds: true,
                witness: None,
                max_residual: 0.0,
            };
        }
        let dim = self.k * self.k;
        let mut basis = DMatrix::zeros(dim, self.m);
        for (t, j) in self.j_maps.iter().enumerate() {
            basis.set_column(t, &DVector::from_column_slice(j.as_slice()));
        }
        let gram = basis.transpose() * &basis;
        let gram_inv = gram
            .try_inverse()
            .expect("J-maps of a valid algebra are linearly independent");
        let mut witness = None;
        let mut max_residual = 0.0_f64;
        for r in 0..self.m {
            for s in (r + 1)..self.m {
                let prod = &self.j_maps[r] * &self.j_maps[s];
                let target = DVector::from_column_slice(prod.as_slice());
                let coeffs = &gram_inv * (basis.transpose() * &target);
                let residual = (&target - &basis * coeffs).norm() / target.norm();
                if residual > tol && witness.is_none() {
                    witness = Some((r, s));
                }
                max_residual = max_residual.max(residual);
            }
        }
        J2Report {
            holds: witness.is_none(),
            witness,
            max_residual,
        }
    }

    fn check_len(&self, v: &DVector<f64>, len: usize, what: &str) -> Result<(), AlgebraError> {
        if v.len() != len {
            return Err(AlgebraError::DimensionMismatch(format!(
                "{what} has length {}, expected {len}",
                v.len()
            )));
        }
        Ok(())
    }
}

/// Fano-plane triples `(a, b, c)` with `e_a e_b = e_c`.
const OCTONION_TRIPLES: [(usize, usize, usize); 7] = [
    (1, 2, 4),
    (2, 3, 5),
    (3, 4, 6),
    (4, 5, 7),
    (5, 6, 1),
    (6, 7, 2),
    (7, 1, 3),
];

/// Product of basis units of a normed division algebra of dimension `dim`
/// with multiplication table given by cyclic triples. Returns `(sign, index)`.
fn unit_product(i: usize, j: usize, triples: &[(usize, usize, usize)]) -> (f64, usize) {
    if i == 0 {
        return (1.0, j);
    }
    if j == 0 {
        return (1.0, i);
    }
    if i == j {
        return (-1.0, 0);
    }
    for &(a, b, c) in triples {
        for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
            if (i, j) == (x, y) {
                return (1.0, z);
            }
            if (i, j) == (y, x) {
                return (-1.0, z);
            }
        }
    }
    unreachable!("multiplication table is incomplete for e_{i} e_{j}")
}

/// Left multiplication by each imaginary unit `e_1..e_{dim-1}`.
fn left_multiplication(dim: usize, triples: &[(usize, usize, usize)]) -> Vec<DMatrix<f64>> {
    (1..dim)
        .map(|i| {
            let mut m = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                let (sign, idx) = unit_product(i, j, triples);
                m[(idx, j)] = sign;
            }
            m
        })
        .collect()
}

fn block_diagonal(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let b = block.nrows();
    let mut out = DMatrix::zeros(b * copies, b * copies);
    for c in 0..copies {
        out.view_mut((c * b, c * b), (b, b)).copy_from(block);
    }
    out
}

/// JSON form of an algebra: explicit J-maps (row-major) or a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraConfig {
    Catalog {
        catalog: String,
        #[serde(default = "default_multiplicity")]
        multiplicity: usize,
    },
    Explicit {
        k: usize,
        m: usize,
        j_maps: Vec<Vec<Vec<f64>>>,
    },
}

fn default_multiplicity() -> usize {
    1
}

impl AlgebraConfig {
    pub fn catalog(family: Family, multiplicity: usize) -> Self {
        AlgebraConfig::Catalog {
            catalog: family.to_string(),
            multiplicity,
        }
    }

    pub fn build(&self, tol: f64) -> Result<GeneralizedHeisenbergAlgebra, AlgebraError> {
        match self {
            AlgebraConfig::Catalog { catalog, multiplicity } => {
                GeneralizedHeisenbergAlgebra::catalog(catalog.parse()?, *multiplicity)
            }
            AlgebraConfig::Explicit { k, m, j_maps } => {
                if j_maps.len() != *m {
                    return Err(AlgebraError::DimensionMismatch(format!(
                        "m = {m} but {} J-maps given",
                        j_maps.len()
                    )));
                }
                let mut mats = Vec::with_capacity(*m);
                for (idx, rows) in j_maps.iter().enumerate() {
                    if rows.len() != *k || rows.iter().any(|row| row.len() != *k) {
                        return Err(AlgebraError::DimensionMismatch(format!("J-map {idx} is not {k}x{k}")));
                    }
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    mats.push(DMatrix::from_row_slice(*k, *k, &flat));
                }
                GeneralizedHeisenbergAlgebra::new(mats, tol)
            }
        }
    }

    /// Explicit form of an existing algebra.
    pub fn from_algebra(alg: &GeneralizedHeisenbergAlgebra) -> Self {
        AlgebraConfig::Explicit {
            k: alg.k(),
            m: alg.m(),
            j_maps: alg
                .j_maps()
                .iter()
                .map(|j| (0..j.nrows()).map(|i| j.row(i).iter().copied().collect()).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(k: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(k);
        v[i] = 1.0;
        v
    }

    #[test]
    fn rotation_matrix_is_valid() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let alg = GeneralizedHeisenbergAlgebra::new(vec![j], 1e-10).unwrap();
        assert_eq!((alg.k(), alg.m()), (2, 1));
        assert_eq!(alg.structure_constant(0, 0, 1), 1.0);
        assert_eq!(alg.structure_constant(0, 1, 0), -1.0);
    }

    #[test]
    fn symmetric_map_rejected() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let err = GeneralizedHeisenbergAlgebra::new(vec![j], 1e-10).unwrap_err();
        assert!(matches!(err, AlgebraError::NotSkew { index: 0, .. }));
    }

    #[test]
    fn commuting_maps_violate_clifford() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let err = GeneralizedHeisenbergAlgebra::new(vec![j.clone(), j], 1e-10).unwrap_err();
        assert!(matches!(err, AlgebraError::CliffordViolation { r: 0, s: 1, .. }));
    }

    #[test]
    fn scaled_map_violates_clifford() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let err = GeneralizedHeisenbergAlgebra::new(vec![j], 1e-10).unwrap_err();
        assert!(matches!(err, AlgebraError::CliffordViolation { r: 0, s: 0, .. }));
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = DMatrix::zeros(4, 4);
        assert!(matches!(
            GeneralizedHeisenbergAlgebra::new(vec![a, b], 1e-10),
            Err(AlgebraError::DimensionMismatch(_))
        ));
        assert!(matches!(
            GeneralizedHeisenbergAlgebra::new(vec![], 1e-10),
            Err(AlgebraError::Degenerate)
        ));
    }

    #[test]
    fn quaternionic_maps_anticommute_by_direct_multiplication() {
        // Oracle: explicit integer matrix products, independent of the
        // validation inside `new`.
        let alg = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 1).unwrap();
        let id = DMatrix::<f64>::identity(4, 4);
        for r in 0..3 {
            let jr = alg.j_map(r);
            assert_eq!(jr * jr, -&id);
            for s in 0..3 {
                if r != s {
                    assert_eq!(jr * alg.j_map(s), -(alg.j_map(s) * jr));
                }
            }
        }
        assert_eq!(alg.j_map(0) * alg.j_map(1), alg.j_map(2).clone());
    }

    #[test]
    fn catalog_shapes() {
        for (fam, mult, k, m) in [
            (Family::Heisenberg, 3, 6, 1),
            (Family::Clifford2, 1, 4, 2),
            (Family::Quaternionic, 2, 8, 3),
            (Family::Octonionic, 1, 8, 7),
        ] {
            let alg = GeneralizedHeisenbergAlgebra::catalog(fam, mult).unwrap();
            assert_eq!((alg.k(), alg.m()), (k, m), "{fam}");
            assert!(alg.is_aligned(1e-14), "{fam} catalog basis should be aligned");
        }
        assert!(matches!(
            "sedenion".parse::<Family>(),
            Err(AlgebraError::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn heisenberg_bracket() {
        let alg = GeneralizedHeisenbergAlgebra::catalog(Family::Heisenberg, 1).unwrap();
        let z = alg.bracket_v(&e(2, 0), &e(2, 1)).unwrap();
        assert_eq!(z[0], 1.0);
        let v = DVector::from_vec(vec![0.3, -1.7]);
        assert_eq!(alg.bracket_v(&v, &v).unwrap()[0], 0.0);
        assert!(alg.bracket_v(&e(3, 0), &e(2, 0)).is_err());
    }

    #[test]
    fn quaternionic_bracket_with_j2_v1() {
        let alg = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 1).unwrap();
        let v1 = e(4, 0);
        let w = alg.j_map(1) * &v1;
        let z = alg.bracket_v(&v1, &w).unwrap();
        assert!((z - e(3, 1)).norm() < 1e-14);
    }

    #[test]
    fn kernel_ad_heisenberg2() {
        let alg = GeneralizedHeisenbergAlgebra::catalog(Family::Heisenberg, 2).unwrap();
        let split = alg.kernel_ad(&e(4, 0), 1e-10).unwrap();
        assert_eq!(split.image.len(), 1);
        assert!((split.image[0][1].abs() - 1.0).abs() < 1e-14);
        // ker ad(V_1) = span{V_1, V_3, V_4}: V_1 brackets trivially with itself.
        assert_eq!(split.kernel.len(), 3);
        for w in &split.kernel {
            assert!(w[1].abs() < 1e-12);
        }
        assert!(matches!(
            alg.kernel_ad(&(e(4, 0) * 2.0), 1e-10),
            Err(AlgebraError::NotUnit(_))
        ));
    }

    #[test]
    fn kernel_ad_quaternionic2_dimension() {
        let alg = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 2).unwrap();
        let split = alg.kernel_ad(&e(8, 0), 1e-10).unwrap();
        assert_eq!(split.image.len(), 3);
        assert_eq!(split.kernel.len(), 5);
        for w in &split.kernel {
            assert!(alg.bracket_v(&e(8, 0), w).unwrap().norm() < 1e-10);
            for q in &split.image {
                assert!(w.dot(q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn j2_condition_catalog() {
        let h = GeneralizedHeisenbergAlgebra::catalog(Family::Heisenberg, 2).unwrap();
        assert!(h.j2_condition(1e-10).holds);
        let q = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 1).unwrap();
        let rep = q.j2_condition(1e-10);
        assert!(rep.holds && rep.max_residual < 1e-14);
        // J_i J_j = J_k lies outside span{J_i, J_j}: the product is orthogonal
        // to both, so the relative residual is exactly 1.
        let c = GeneralizedHeisenbergAlgebra::catalog(Family::Clifford2, 1).unwrap();
        let rep = c.j2_condition(1e-10);
        assert!(!rep.holds);
        assert_eq!(rep.witness, Some((0, 1)));
        assert!((rep.max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aligned_is_identity_on_catalogs_and_fixes_rotated_input() {
        let q = GeneralizedHeisenbergAlgebra::catalog(Family::Quaternionic, 1).unwrap();
        let (same, basis) = q.aligned(None, 1e-10).unwrap();
        assert!((basis - DMatrix::<f64>::identity(4, 4)).norm() < 1e-14);
        assert_eq!(same, q);

        // Conjugate by a permutation so V_2 is no longer J_1 V_1.
        let perm = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        let maps: Vec<_> = q.j_maps().iter().map(|j| perm.transpose() * j * &perm).collect();
        let scrambled = GeneralizedHeisenbergAlgebra::new(maps, 1e-10).unwrap();
        assert!(!scrambled.is_aligned(1e-12));
        let (fixed, _) = scrambled.aligned(None, 1e-10).unwrap();
        assert!(fixed.is_aligned(1e-12));
        for r in 0..3 {
            let col = fixed.j_map(r).column(0).into_owned();
            assert!((col - e(4, r + 1)).norm() < 1e-12);
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg: AlgebraConfig = serde_json::from_str(r#"{"catalog":"quaternionic","multiplicity":1}"#).unwrap();
        let alg = cfg.build(1e-10).unwrap();
        assert_eq!(alg.m(), 3);
        let explicit = AlgebraConfig::from_algebra(&alg);
        let json = serde_json::to_string(&explicit).unwrap();
        let back: AlgebraConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build(1e-10).unwrap(), alg);

        let row_major: AlgebraConfig = serde_json::from_str(r#"{"k":2,"m":1,"j_maps":[[[0,-1],[1,0]]]}"#).unwrap();
        let h = row_major.build(1e-10).unwrap();
        assert_eq!(h.j_map(0)[(0, 1)], -1.0);
        assert_eq!(h.structure_constant(0, 0, 1), 1.0);
    }
}
