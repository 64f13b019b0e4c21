//! Polynomial differential forms on the plane.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use super::{Coeff, Poly, Scalar};

/// `A dx + B dy`.
#[derive(Clone, PartialEq, Default)]
pub struct OneForm<K: Coeff> {
    pub dx: Poly<K>,
    pub dy: Poly<K>,
}

/// `C dx∧dy`. Antisymmetry is structural: only one component is stored.
#[derive(Clone, PartialEq, Default)]
pub struct TwoForm<K: Coeff> {
    pub coef: Poly<K>,
}

pub type ExactOneForm = OneForm<Scalar>;
pub type ExactTwoForm = TwoForm<Scalar>;

/// `g_x dx + g_y dy`.
pub fn exterior_d<K: Coeff>(g: &Poly<K>) -> OneForm<K> {
    OneForm::new(g.diff_x(), g.diff_y())
}

/// `(A1 B2 - A2 B1) dx∧dy`.
pub fn wedge<K: Coeff>(a: &OneForm<K>, b: &OneForm<K>) -> TwoForm<K> {
    TwoForm::new(&(&a.dx * &b.dy) - &(&a.dy * &b.dx))
}

impl<K: Coeff> OneForm<K> {
    pub fn new(dx: Poly<K>, dy: Poly<K>) -> Self {
        Self { dx, dy }
    }

    pub fn zero() -> Self {
        Self::new(Poly::zero(), Poly::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.dx.is_zero() && self.dy.is_zero()
    }

    /// `max(deg A, deg B)`; `None` for the zero form.
    pub fn degree(&self) -> Option<u32> {
        match (self.dx.degree(), self.dy.degree()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// Exterior derivative `(B_x - A_y) dx∧dy`.
    pub fn d(&self) -> TwoForm<K> {
        TwoForm::new(&self.dy.diff_x() - &self.dx.diff_y())
    }

    pub fn mul_poly(&self, g: &Poly<K>) -> Self {
        Self::new(&self.dx * g, &self.dy * g)
    }

    pub fn scale(&self, c: &K) -> Self {
        Self::new(self.dx.scale(c), self.dy.scale(c))
    }

    /// Pieces whose coefficients are homogeneous of degree `n`, increasing in
    /// `n`. With this indexing the linear part of `d(xy)` is the degree-1 piece.
    pub fn homogeneous_parts(&self) -> Vec<(u32, Self)> {
        let max = match self.degree() {
            Some(d) => d,
            None => return Vec::new(),
        };
        (0..=max)
            .map(|n| (n, self.homogeneous_part(n)))
            .filter(|(_, f)| !f.is_zero())
            .collect()
    }

    pub fn homogeneous_part(&self, n: u32) -> Self {
        Self::new(self.dx.homogeneous_part(n), self.dy.homogeneous_part(n))
    }

    pub fn truncate(&self, n: u32) -> Self {
        Self::new(self.dx.truncate(n), self.dy.truncate(n))
    }

    /// Contraction with the vector `(vx, vy)` at a point.
    pub fn eval(&self, x: &K, y: &K) -> (K, K) {
        (self.dx.eval(x, y), self.dy.eval(x, y))
    }

    /// Pullback along `(u, v) ↦ (x, y) = M (u, v) + shift`.
    ///
    /// `m` is row-major: `x = m[0][0] u + m[0][1] v + shift[0]`.
    pub fn pullback_affine(&self, m: &[[K; 2]; 2], shift: &[K; 2]) -> Self {
        let px = Poly::from_terms([
            (super::Mono::new(1, 0), m[0][0].clone()),
            (super::Mono::new(0, 1), m[0][1].clone()),
            (super::Mono::ONE, shift[0].clone()),
        ]);
        let py = Poly::from_terms([
            (super::Mono::new(1, 0), m[1][0].clone()),
            (super::Mono::new(0, 1), m[1][1].clone()),
            (super::Mono::ONE, shift[1].clone()),
        ]);
        let a = self.dx.substitute(&px, &py);
        let b = self.dy.substitute(&px, &py);
        // dx = m00 du + m01 dv, dy = m10 du + m11 dv
        Self::new(
            &a.scale(&m[0][0]) + &b.scale(&m[1][0]),
            &a.scale(&m[0][1]) + &b.scale(&m[1][1]),
        )
    }

    pub fn map_coeffs<L: Coeff, F: Fn(&K) -> L + Copy>(&self, f: F) -> OneForm<L> {
        OneForm::new(self.dx.map_coeffs(f), self.dy.map_coeffs(f))
    }
}

impl<K: Coeff> TwoForm<K> {
    pub fn new(coef: Poly<K>) -> Self {
        Self { coef }
    }

    pub fn zero() -> Self {
        Self::new(Poly::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coef.is_zero()
    }
}

impl<'a, K: Coeff> Add<&'a OneForm<K>> for &'a OneForm<K> {
    type Output = OneForm<K>;
    fn add(self, o: &OneForm<K>) -> OneForm<K> {
        OneForm::new(&self.dx + &o.dx, &self.dy + &o.dy)
    }
}

impl<'a, K: Coeff> Sub<&'a OneForm<K>> for &'a OneForm<K> {
    type Output = OneForm<K>;
    fn sub(self, o: &OneForm<K>) -> OneForm<K> {
        OneForm::new(&self.dx - &o.dx, &self.dy - &o.dy)
    }
}

impl<K: Coeff> Neg for &OneForm<K> {
    type Output = OneForm<K>;
    fn neg(self) -> OneForm<K> {
        OneForm::new(-&self.dx, -&self.dy)
    }
}

impl<'a, K: Coeff> Add<&'a TwoForm<K>> for &'a TwoForm<K> {
    type Output = TwoForm<K>;
    fn add(self, o: &TwoForm<K>) -> TwoForm<K> {
        TwoForm::new(&self.coef + &o.coef)
    }
}

impl<'a, K: Coeff> Sub<&'a TwoForm<K>> for &'a TwoForm<K> {
    type Output = TwoForm<K>;
    fn sub(self, o: &TwoForm<K>) -> TwoForm<K> {
        TwoForm::new(&self.coef - &o.coef)
    }
}

impl<K: Coeff> Neg for &TwoForm<K> {
    type Output = TwoForm<K>;
    fn neg(self) -> TwoForm<K> {
        TwoForm::new(-&self.coef)
    }
}

impl fmt::Display for OneForm<Scalar> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) dx + ({}) dy", self.dx, self.dy)
    }
}

impl<K: Coeff> fmt::Debug for OneForm<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}) dx + ({:?}) dy", self.dx, self.dy)
    }
}

impl<K: Coeff> fmt::Debug for TwoForm<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}) dx∧dy", self.coef)
    }
}
