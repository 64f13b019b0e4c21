//! Coefficient rings for bivariate polynomials.

use std::fmt::Debug;

use num_complex::Complex64;
use num_rational::BigRational;

use super::Scalar;

/// A commutative ring containing `Q`, used as the coefficient type of
/// [`Poly`](super::Poly).
///
/// Three instances exist: exact [`Scalar`]s, complex floats for the
/// certified-float paths, and [`MultiPoly`](super::MultiPoly) for symbolic
/// runs where coefficients are themselves polynomials in indeterminates.
pub trait Coeff: Clone + PartialEq + Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn from_rational(r: &BigRational) -> Self;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(n.into()))
    }

    /// Multiplicative inverse when the element is a unit.
    fn inv(&self) -> Option<Self>;

    fn scale_i64(&self, n: i64) -> Self {
        self.mul(&Self::from_i64(n))
    }
}

impl Coeff for Scalar {
    fn zero() -> Self {
        Scalar::zero()
    }
    fn one() -> Self {
        Scalar::one()
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn from_rational(r: &BigRational) -> Self {
        Scalar::real(r.clone())
    }
    fn inv(&self) -> Option<Self> {
        Scalar::inv(self)
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn from_rational(r: &BigRational) -> Self {
        Scalar::real(r.clone()).to_c64()
    }
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn inv(&self) -> Option<Self> {
        if Coeff::is_zero(self) {
            None
        } else {
            Some(self.inv())
        }
    }
}
