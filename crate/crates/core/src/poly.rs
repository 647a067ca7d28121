//! Sparse multivariate polynomials with `f64` coefficients.
//!
//! JSON form is a list of `[exponents, coefficient]` pairs, e.g.
//! `[[[1, 0], 2.0], [[0, 2], -1.0]]` for `2x - y²`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Exponents = Vec<u32>;

#[derive(Clone, Debug, Default)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

// Zero polynomials compare equal regardless of arity: JSON drops it.
impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && (self.nvars == other.nvars || self.terms.is_empty())
    }
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(vec![0; nvars], c)
    }

    pub fn monomial(exps: Exponents, c: f64) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn add_term(&mut self, exps: Exponents, c: f64) {
        assert_eq!(exps.len(), self.nvars, "exponent arity mismatch");
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        self.align(other);
        for (e, c) in other.terms() {
            self.add_term(e.clone(), s * c);
        }
    }

    // A zero polynomial without arity adopts the other operand's arity.
    fn align(&mut self, other: &Poly) {
        if self.terms.is_empty() && self.nvars == 0 {
            self.nvars = other.nvars;
        }
        if other.nvars != 0 || !other.terms.is_empty() {
            assert_eq!(self.nvars, other.nvars, "polynomial arity mismatch");
        }
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        if s != 0.0 {
            for (e, c) in self.terms() {
                out.terms.insert(e.clone(), c * s);
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let nvars = self.nvars.max(other.nvars);
        let mut out = Poly::zero(nvars);
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    /// Multiply by `x_i^power`.
    pub fn shift(&self, i: usize, power: u32) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in self.terms() {
            let mut e = e.clone();
            e[i] += power;
            out.terms.insert(e, c);
        }
        out
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in self.terms() {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Drop terms with `|c| <= tol`.
    pub fn pruned(&self, tol: f64) -> Poly {
        let mut out = self.clone();
        out.terms.retain(|_, c| c.abs() > tol);
        out
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Same polynomial over more variables, with new ones appended.
    pub fn extend_vars(&self, nvars: usize) -> Poly {
        assert!(nvars >= self.nvars);
        let mut out = Poly::zero(nvars);
        for (e, c) in self.terms() {
            let mut e = e.clone();
            e.resize(nvars, 0);
            out.terms.insert(e, c);
        }
        out
    }
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (e, c)) in self.terms().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{i}")?,
                    _ => write!(f, "*x{i}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(&Exponents, f64)> = self.terms().collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs: Vec<(Exponents, f64)> = Vec::deserialize(d)?;
        let nvars = pairs.first().map_or(0, |(e, _)| e.len());
        let mut p = Poly::zero(nvars);
        for (e, c) in pairs {
            if e.len() != nvars {
                return Err(D::Error::custom("monomials with differing arity"));
            }
            if !c.is_finite() {
                return Err(D::Error::custom("non-finite coefficient"));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }
}

/// All exponent vectors of total degree `<= degree`, graded then lexicographic.
pub fn monomials_up_to(nvars: usize, degree: u32) -> Vec<Exponents> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut cur = vec![0; nvars];
        fill(&mut cur, 0, d, &mut out);
    }
    out
}

fn fill(cur: &mut Exponents, i: usize, left: u32, out: &mut Vec<Exponents>) {
    if i + 1 >= cur.len() {
        if !cur.is_empty() {
            cur[i] = left;
            out.push(cur.clone());
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        fill(cur, i + 1, left - k, out);
    }
    cur[i] = 0;
}

/// First-order operator `Σ_i c_i(x) ∂_i` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub coefficients: Vec<Poly>,
}

impl Derivation {
    pub fn apply(&self, p: &Poly) -> Poly {
        let mut out = Poly::zero(p.nvars());
        for (i, c) in self.coefficients.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = p.partial(i);
            if !d.is_zero() {
                out.add_scaled(&c.mul(&d), 1.0);
            }
        }
        out
    }

    pub fn apply_n(&self, p: &Poly, n: usize) -> Poly {
        (0..n).fold(p.clone(), |acc, _| self.apply(&acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> Poly {
        Poly::var(2, 0)
    }
    fn y() -> Poly {
        Poly::var(2, 1)
    }

    #[test]
    fn arithmetic_and_evaluation() {
        let p = &x().mul(&x()) - &y().scale(3.0);
        assert_eq!(p.eval(&[2.0, 1.0]), 1.0);
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.partial(0), x().scale(2.0));
        assert!((&p - &p).is_zero());
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials_up_to(2, 2).len(), 6);
        assert_eq!(monomials_up_to(3, 3).len(), 20);
        assert_eq!(monomials_up_to(0, 3), vec![Vec::<u32>::new()]);
        assert_eq!(monomials_up_to(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn json_round_trip() {
        let p = &x().scale(2.0) - &y().mul(&y());
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[[0,2],-1.0],[[1,0],2.0]]");
        let back: Poly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Poly>("[[[1],1.0],[[1,0],2.0]]").is_err());
    }

    #[test]
    fn derivation_is_leibniz() {
        // D = ∂_x - (y/2) ∂_y
        let d = Derivation {
            coefficients: vec![Poly::constant(2, 1.0), y().scale(-0.5)],
        };
        let p = x().mul(&y());
        let q = &x() + &y().mul(&y());
        let lhs = d.apply(&p.mul(&q));
        let rhs = &d.apply(&p).mul(&q) + &p.mul(&d.apply(&q));
        assert!((&lhs - &rhs).max_abs_coefficient() < 1e-15);
    }

    proptest! {
        #[test]
        fn product_evaluates_pointwise(
            c in proptest::collection::vec(-3.0f64..3.0, 6),
            d in proptest::collection::vec(-3.0f64..3.0, 6),
            pt in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let basis = monomials_up_to(2, 2);
            let build = |cs: &[f64]| {
                let mut p = Poly::zero(2);
                for (e, &v) in basis.iter().zip(cs) {
                    p.add_term(e.clone(), v);
                }
                p
            };
            let (p, q) = (build(&c), build(&d));
            let lhs = p.mul(&q).eval(&pt);
            prop_assert!((lhs - p.eval(&pt) * q.eval(&pt)).abs() < 1e-9);
        }
    }
}
