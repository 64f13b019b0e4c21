//! Sparse bivariate polynomials.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::{Coeff, Scalar};

/// Exponent pair `x^x * y^y`.
///
/// Ordered by total degree, then by the power of `x`, so iterating a
/// [`Poly`] backwards yields graded-lex order with `x > y`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Mono {
    pub x: u32,
    pub y: u32,
}

impl Mono {
    pub const ONE: Mono = Mono { x: 0, y: 0 };

    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn degree(self) -> u32 {
        self.x + self.y
    }

    pub fn mul(self, o: Mono) -> Mono {
        Mono::new(self.x + o.x, self.y + o.y)
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then(self.x.cmp(&o.x))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// All monomials of total degree `<= deg`, in ascending graded order.
pub fn monomials_up_to(deg: u32) -> Vec<Mono> {
    let mut out = Vec::new();
    for d in 0..=deg {
        for x in 0..=d {
            out.push(Mono::new(x, d - x));
        }
    }
    out
}

/// A polynomial in `x, y` with coefficients in `K`; no zero coefficient
/// is ever stored.
#[derive(Clone, PartialEq)]
pub struct Poly<K: Coeff> {
    terms: BTreeMap<Mono, K>,
}

/// The exact polynomial type used throughout the symbolic layer.
pub type BivarPoly = Poly<Scalar>;

impl<K: Coeff> Default for Poly<K> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<K: Coeff> Poly<K> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: K) -> Self {
        Self::monomial(Mono::ONE, c)
    }

    pub fn one() -> Self {
        Self::constant(K::one())
    }

    pub fn monomial(m: Mono, c: K) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn x() -> Self {
        Self::monomial(Mono::new(1, 0), K::one())
    }

    pub fn y() -> Self {
        Self::monomial(Mono::new(0, 1), K::one())
    }

    pub fn from_terms<I: IntoIterator<Item = (Mono, K)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c * m` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, m: Mono, c: K) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                let s = v.add(&c);
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    pub fn degree_in_x(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.x).max()
    }

    pub fn degree_in_y(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.y).max()
    }

    pub fn coeff(&self, m: Mono) -> K {
        self.terms.get(&m).cloned().unwrap_or_else(K::zero)
    }

    pub fn coeff_ref(&self, m: Mono) -> Option<&K> {
        self.terms.get(&m)
    }

    /// Terms in ascending graded order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (Mono, &K)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading monomial in graded-lex order.
    pub fn leading(&self) -> Option<(Mono, &K)> {
        self.terms.iter().next_back().map(|(m, c)| (*m, c))
    }

    pub fn scale(&self, c: &K) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|(m, v)| (*m, v.mul(c))))
    }

    pub fn mul_mono(&self, m: Mono, c: &K) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, v)| (k.mul(m), v.mul(c))))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn diff_x(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(m, _)| m.x > 0)
                .map(|(m, c)| (Mono::new(m.x - 1, m.y), c.scale_i64(m.x as i64))),
        )
    }

    pub fn diff_y(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(m, _)| m.y > 0)
                .map(|(m, c)| (Mono::new(m.x, m.y - 1), c.scale_i64(m.y as i64))),
        )
    }

    /// The total-degree-`n` piece.
    pub fn homogeneous_part(&self, n: u32) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(m, _)| m.degree() == n)
                .map(|(m, c)| (*m, c.clone())),
        )
    }

    /// Nonzero homogeneous pieces in increasing degree.
    pub fn homogeneous_parts(&self) -> Vec<(u32, Self)> {
        let mut out: Vec<(u32, Self)> = Vec::new();
        for (m, c) in self.terms.iter() {
            let d = m.degree();
            match out.last_mut() {
                Some((last, p)) if *last == d => p.add_term(*m, c.clone()),
                _ => out.push((d, Self::monomial(*m, c.clone()))),
            }
        }
        out
    }

    pub fn is_homogeneous_of(&self, n: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == n)
    }

    /// Terms of total degree `<= n`.
    pub fn truncate(&self, n: u32) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(m, _)| m.degree() <= n)
                .map(|(m, c)| (*m, c.clone())),
        )
    }

    pub fn eval(&self, x: &K, y: &K) -> K {
        let dx = self.degree_in_x().unwrap_or(0) as usize;
        let dy = self.degree_in_y().unwrap_or(0) as usize;
        let xp = powers(x, dx);
        let yp = powers(y, dy);
        let mut acc = K::zero();
        for (m, c) in self.terms.iter() {
            acc = acc.add(&c.mul(&xp[m.x as usize]).mul(&yp[m.y as usize]));
        }
        acc
    }

    /// `self(px(x,y), py(x,y))`.
    pub fn substitute(&self, px: &Self, py: &Self) -> Self {
        let dx = self.degree_in_x().unwrap_or(0) as usize;
        let dy = self.degree_in_y().unwrap_or(0) as usize;
        let xp = poly_powers(px, dx);
        let yp = poly_powers(py, dy);
        let mut acc = Self::zero();
        for (m, c) in self.terms.iter() {
            let t = (&xp[m.x as usize] * &yp[m.y as usize]).scale(c);
            acc = &acc + &t;
        }
        acc
    }

    /// Converts coefficients with `f`, dropping any that map to zero.
    pub fn map_coeffs<L: Coeff, F: Fn(&K) -> L>(&self, f: F) -> Poly<L> {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (*m, f(c))))
    }

    /// Transposes the roles of `x` and `y`.
    pub fn swap_xy(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (Mono::new(m.y, m.x), c.clone())))
    }
}

fn powers<K: Coeff>(v: &K, n: usize) -> Vec<K> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(K::one());
    for i in 0..n {
        let next = out[i].mul(v);
        out.push(next);
    }
    out
}

fn poly_powers<K: Coeff>(p: &Poly<K>, n: usize) -> Vec<Poly<K>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(Poly::one());
    for i in 0..n {
        let next = &out[i] * p;
        out.push(next);
    }
    out
}

impl<'a, K: Coeff> Add<&'a Poly<K>> for &'a Poly<K> {
    type Output = Poly<K>;
    fn add(self, o: &Poly<K>) -> Poly<K> {
        let mut out = self.clone();
        for (m, c) in o.terms.iter() {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl<'a, K: Coeff> Sub<&'a Poly<K>> for &'a Poly<K> {
    type Output = Poly<K>;
    fn sub(self, o: &Poly<K>) -> Poly<K> {
        let mut out = self.clone();
        for (m, c) in o.terms.iter() {
            out.add_term(*m, c.neg());
        }
        out
    }
}

impl<'a, K: Coeff> Mul<&'a Poly<K>> for &'a Poly<K> {
    type Output = Poly<K>;
    fn mul(self, o: &Poly<K>) -> Poly<K> {
        let mut out = Poly::zero();
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in o.terms.iter() {
                out.add_term(ma.mul(*mb), ca.mul(cb));
            }
        }
        out
    }
}

impl<K: Coeff> Neg for &Poly<K> {
    type Output = Poly<K>;
    fn neg(self) -> Poly<K> {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (*m, c.neg())))
    }
}

macro_rules! forward_owned_poly {
    ($($tr:ident $m:ident),*) => {$(
        impl<K: Coeff> $tr<Poly<K>> for Poly<K> {
            type Output = Poly<K>;
            fn $m(self, o: Poly<K>) -> Poly<K> { (&self).$m(&o) }
        }
    )*};
}
forward_owned_poly!(Add add, Sub sub, Mul mul);

impl<K: Coeff> Neg for Poly<K> {
    type Output = Poly<K>;
    fn neg(self) -> Poly<K> {
        -&self
    }
}

impl BivarPoly {
    pub fn from_int(n: i64) -> Self {
        Self::constant(Scalar::from_int(n))
    }

    /// Complex-float copy of the polynomial.
    pub fn to_c64(&self) -> Poly<num_complex::Complex64> {
        self.map_coeffs(|c| c.to_c64())
    }
}

fn fmt_mono(m: Mono) -> String {
    let mut parts = Vec::new();
    match m.x {
        0 => {}
        1 => parts.push("x".to_string()),
        e => parts.push(format!("x^{e}")),
    }
    match m.y {
        0 => {}
        1 => parts.push("y".to_string()),
        e => parts.push(format!("y^{e}")),
    }
    parts.join("*")
}

impl fmt::Display for Mono {
    /// `x^i*y^j`, empty for the constant monomial.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_mono(*self))
    }
}

impl fmt::Display for BivarPoly {
    /// Canonical text in the parser grammar, graded-lex descending.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let negative_real = c.is_real() && c.re < num_rational::BigRational::from_integer(0.into());
            let shown = if negative_real { -c } else { c.clone() };
            if first {
                if negative_real {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative_real { '-' } else { '+' })?;
            }
            first = false;
            let mono = fmt_mono(*m);
            if mono.is_empty() {
                write!(f, "{shown}")?;
            } else if shown.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{shown}*{mono}")?;
            }
        }
        Ok(())
    }
}

impl<K: Coeff> fmt::Debug for Poly<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mono = fmt_mono(*m);
            if mono.is_empty() {
                write!(f, "{c:?}")?;
            } else {
                write!(f, "{c:?}*{mono}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
