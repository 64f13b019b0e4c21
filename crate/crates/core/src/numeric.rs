//! Compiled complex-float views of exact polynomials and forms.

use num_complex::Complex64;

use crate::algebra::{BivarPoly, ExactOneForm};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A point of `C^2`.
pub type Point = [C64; 2];

/// Flat term list for fast evaluation.
#[derive(Clone, Debug, Default)]
pub struct NumPoly {
    terms: Vec<(u32, u32, C64)>,
    max_x: usize,
    max_y: usize,
}

fn powers(v: C64, n: usize, buf: &mut [C64; 48]) {
    buf[0] = ONE;
    for k in 1..=n {
        buf[k] = buf[k - 1] * v;
    }
}

impl NumPoly {
    pub fn from_exact(p: &BivarPoly) -> Self {
        let terms: Vec<(u32, u32, C64)> = p.terms().map(|(m, c)| (m.x, m.y, c.to_c64())).collect();
        let max_x = terms.iter().map(|t| t.0 as usize).max().unwrap_or(0);
        let max_y = terms.iter().map(|t| t.1 as usize).max().unwrap_or(0);
        assert!(max_x < 47 && max_y < 47, "polynomial degree too large for float evaluation");
        Self { terms, max_x, max_y }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: C64, y: C64) -> C64 {
        let mut xp = [ZERO; 48];
        let mut yp = [ZERO; 48];
        powers(x, self.max_x, &mut xp);
        powers(y, self.max_y, &mut yp);
        self.terms.iter().map(|&(i, j, c)| c * xp[i as usize] * yp[j as usize]).sum()
    }

    /// `sum |c_m| |x^i y^j|`, a scale for relative residuals.
    pub fn abs_eval(&self, x: C64, y: C64) -> f64 {
        let (ax, ay) = (x.norm(), y.norm());
        self.terms
            .iter()
            .map(|&(i, j, c)| c.norm() * ax.powi(i as i32) * ay.powi(j as i32))
            .sum()
    }

    /// Value and gradient.
    pub fn eval_grad(&self, x: C64, y: C64) -> (C64, [C64; 2]) {
        let mut xp = [ZERO; 48];
        let mut yp = [ZERO; 48];
        powers(x, self.max_x, &mut xp);
        powers(y, self.max_y, &mut yp);
        let mut v = ZERO;
        let mut gx = ZERO;
        let mut gy = ZERO;
        for &(i, j, c) in &self.terms {
            let (i, j) = (i as usize, j as usize);
            v += c * xp[i] * yp[j];
            if i > 0 {
                gx += c * (i as f64) * xp[i - 1] * yp[j];
            }
            if j > 0 {
                gy += c * (j as f64) * xp[i] * yp[j - 1];
            }
        }
        (v, [gx, gy])
    }

    /// Value, gradient and Hessian `[[f_xx, f_xy], [f_xy, f_yy]]`.
    pub fn eval_hessian(&self, x: C64, y: C64) -> (C64, [C64; 2], [[C64; 2]; 2]) {
        let mut xp = [ZERO; 48];
        let mut yp = [ZERO; 48];
        powers(x, self.max_x, &mut xp);
        powers(y, self.max_y, &mut yp);
        let (mut v, mut gx, mut gy, mut hxx, mut hxy, mut hyy) = (ZERO, ZERO, ZERO, ZERO, ZERO, ZERO);
        for &(i, j, c) in &self.terms {
            let (i, j) = (i as usize, j as usize);
            let (fi, fj) = (i as f64, j as f64);
            v += c * xp[i] * yp[j];
            if i > 0 {
                gx += c * fi * xp[i - 1] * yp[j];
            }
            if j > 0 {
                gy += c * fj * xp[i] * yp[j - 1];
            }
            if i > 1 {
                hxx += c * fi * (fi - 1.0) * xp[i - 2] * yp[j];
            }
            if j > 1 {
                hyy += c * fj * (fj - 1.0) * xp[i] * yp[j - 2];
            }
            if i > 0 && j > 0 {
                hxy += c * fi * fj * xp[i - 1] * yp[j - 1];
            }
        }
        (v, [gx, gy], [[hxx, hxy], [hxy, hyy]])
    }
}

/// Compiled `(A dx + B dy) / D`.
#[derive(Clone, Debug)]
pub struct NumForm {
    pub a: NumPoly,
    pub b: NumPoly,
    pub den: Option<NumPoly>,
}

impl NumForm {
    pub fn from_exact(w: &ExactOneForm, den: Option<&BivarPoly>) -> Self {
        Self {
            a: NumPoly::from_exact(&w.dx),
            b: NumPoly::from_exact(&w.dy),
            den: den.filter(|d| !(d.degree() == Some(0) && d.coeff(crate::algebra::Mono::ONE).is_one())).map(NumPoly::from_exact),
        }
    }

    /// `(A, B)` divided by the denominator, and the denominator's modulus.
    pub fn coefficients(&self, z: Point) -> (C64, C64, f64) {
        let a = self.a.eval(z[0], z[1]);
        let b = self.b.eval(z[0], z[1]);
        match &self.den {
            None => (a, b, 1.0),
            Some(d) => {
                let dv = d.eval(z[0], z[1]);
                (a / dv, b / dv, dv.norm())
            }
        }
    }
}

pub fn norm2(v: Point) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(a: Point, s: C64) -> Point {
    [a[0] * s, a[1] * s]
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm2(sub(a, b))
}
