//! Multivariate polynomials over `Q`, used as symbolic coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Coeff, Scalar};

/// Sparse polynomial in indeterminates `a1, a2, …` with rational coefficients.
///
/// Exponent vectors are stored trimmed of trailing zeros so that equal
/// monomials compare equal regardless of how many indeterminates exist.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct MultiPoly {
    terms: BTreeMap<Vec<u16>, BigRational>,
}

fn trim(mut e: Vec<u16>) -> Vec<u16> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

fn mul_exp(a: &[u16], b: &[u16]) -> Vec<u16> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0))
        .collect();
    trim(out)
}

impl MultiPoly {
    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::default();
        p.add_term(Vec::new(), c);
        p
    }

    /// The indeterminate `a_{index+1}`.
    pub fn var(index: usize) -> Self {
        let mut e = vec![0u16; index + 1];
        e[index] = 1;
        let mut p = Self::default();
        p.add_term(e, BigRational::one());
        p
    }

    fn add_term(&mut self, e: Vec<u16>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = trim(e);
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().map(|&v| v as u32).sum()).max()
    }

    /// Evaluates at exact values for the indeterminates (missing ones are 0).
    pub fn eval(&self, values: &[Scalar]) -> Scalar {
        let mut acc = Scalar::zero();
        for (e, c) in &self.terms {
            let mut t = Scalar::real(c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    let v = values.get(i).cloned().unwrap_or_else(Scalar::zero);
                    t = &t * &v.pow(k as u32);
                }
            }
            acc = &acc + &t;
        }
        acc
    }

    /// Scales by the positive rational making all coefficients coprime
    /// integers with a positive leading coefficient.
    pub fn primitive_part(&self) -> Self {
        if self.terms.is_empty() {
            return self.clone();
        }
        let mut lcm_den = BigInt::one();
        for c in self.terms.values() {
            lcm_den = lcm_den.lcm(c.denom());
        }
        let mut gcd_num = BigInt::zero();
        for c in self.terms.values() {
            let n = c.numer() * (&lcm_den / c.denom());
            gcd_num = gcd_num.gcd(&n);
        }
        let lead_neg = self.terms.values().next_back().map(|c| c.is_negative()).unwrap_or(false);
        let mut factor = BigRational::new(lcm_den, gcd_num);
        if lead_neg {
            factor = -factor;
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * &factor)).collect(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u16], &BigRational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }
}

impl Coeff for MultiPoly {
    fn zero() -> Self {
        Self::default()
    }
    fn one() -> Self {
        Self::constant(BigRational::one())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
    fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
    fn mul(&self, o: &Self) -> Self {
        let mut out = Self::default();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                out.add_term(mul_exp(ea, eb), ca * cb);
            }
        }
        out
    }
    fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }
    fn from_rational(r: &BigRational) -> Self {
        Self::constant(r.clone())
    }
    fn inv(&self) -> Option<Self> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            if e.is_empty() {
                return Some(Self::constant(c.recip()));
            }
        }
        None
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("a{}", i + 1) } else { format!("a{}^{}", i + 1, k) })
                .collect();
            let coef = if a.denom().is_one() { a.numer().to_string() } else { format!("{}/{}", a.numer(), a.denom()) };
            if vars.is_empty() {
                write!(f, "{coef}")?;
            } else if a.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{coef}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_ops_and_eval() {
        let a1 = MultiPoly::var(0);
        let a2 = MultiPoly::var(1);
        let p = a1.add(&a2).mul(&a1.sub(&a2));
        let q = a1.mul(&a1).sub(&a2.mul(&a2));
        assert_eq!(p, q);
        let v = q.eval(&[Scalar::from_int(3), Scalar::from_int(2)]);
        assert_eq!(v, Scalar::from_int(5));
        assert!(a1.sub(&a1).is_zero());
    }

    #[test]
    fn primitive_part_clears_content() {
        let half = BigRational::new(1.into(), 2.into());
        let p = MultiPoly::var(0).mul(&MultiPoly::constant(-half.clone())).add(&MultiPoly::constant(half * BigRational::from_integer(3.into())));
        assert_eq!(p.primitive_part().to_string(), "a1 - 3");
    }
}
