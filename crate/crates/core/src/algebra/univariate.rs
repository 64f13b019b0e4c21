//! Univariate helpers: exact resultants by evaluation/interpolation and
//! complex root isolation through companion matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{linalg::ExactMatrix, BivarPoly, Scalar};

/// Dense exact univariate polynomial, ascending coefficients.
pub type UPoly = Vec<Scalar>;

pub fn trim(p: &mut UPoly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn eval_exact(p: &[Scalar], x: &Scalar) -> Scalar {
    p.iter().rev().fold(Scalar::zero(), |acc, c| &(&acc * x) + c)
}

/// Coefficients of `p(x0, y)` as a polynomial in `y`.
pub fn specialize_x(p: &BivarPoly, x0: &Scalar) -> UPoly {
    let dy = p.degree_in_y().unwrap_or(0) as usize;
    let mut out = vec![Scalar::zero(); dy + 1];
    for (m, c) in p.terms() {
        let t = c * &x0.pow(m.x);
        out[m.y as usize] = &out[m.y as usize] + &t;
    }
    trim(&mut out);
    out
}

/// Coefficients of `p(x, y)` in `y` as dense polynomials in `x`, ascending in `y`.
pub fn coefficients_in_y(p: &BivarPoly) -> Vec<UPoly> {
    let dy = p.degree_in_y().unwrap_or(0) as usize;
    let dx = p.degree_in_x().unwrap_or(0) as usize;
    let mut out = vec![vec![Scalar::zero(); dx + 1]; dy + 1];
    for (m, c) in p.terms() {
        out[m.y as usize][m.x as usize] = c.clone();
    }
    for v in out.iter_mut() {
        trim(v);
    }
    out
}

/// Sylvester resultant of two univariate polynomials with nonzero leading
/// coefficients of the given formal degrees.
pub fn sylvester_resultant(a: &[Scalar], b: &[Scalar]) -> Scalar {
    let m = a.len().saturating_sub(1);
    let n = b.len().saturating_sub(1);
    if m == 0 && n == 0 {
        return Scalar::one();
    }
    if m == 0 {
        return a.first().cloned().unwrap_or_else(Scalar::zero).pow(n as u32);
    }
    if n == 0 {
        return b.first().cloned().unwrap_or_else(Scalar::zero).pow(m as u32);
    }
    let size = m + n;
    let mut s = ExactMatrix::zeros(size, size);
    for r in 0..n {
        for (k, c) in a.iter().rev().enumerate() {
            s.set(r, r + k, c.clone());
        }
    }
    for r in 0..m {
        for (k, c) in b.iter().rev().enumerate() {
            s.set(n + r, r + k, c.clone());
        }
    }
    s.determinant()
}

/// Newton interpolation through `(xs[k], ys[k])`, returning ascending coefficients.
pub fn interpolate(xs: &[Scalar], ys: &[Scalar]) -> UPoly {
    let n = xs.len();
    let mut dd = ys.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            let num = &dd[i] - &dd[i - 1];
            let den = &xs[i] - &xs[i - j];
            dd[i] = &num / &den;
        }
    }
    // Expand the Newton form.
    let mut poly: UPoly = vec![Scalar::zero()];
    for i in (0..n).rev() {
        // poly = poly * (x - xs[i]) + dd[i]
        let mut next = vec![Scalar::zero(); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] = &next[k + 1] + c;
            next[k] = &next[k] - &(c * &xs[i]);
        }
        next[0] = &next[0] + &dd[i];
        poly = next;
    }
    trim(&mut poly);
    poly
}

/// Resultant with respect to `y`, as an exact polynomial in `x`.
///
/// Both inputs must have constant leading coefficients in `y`; the result is
/// recovered from `deg a * deg b + 1` exact evaluations.
pub fn resultant_y(a: &BivarPoly, b: &BivarPoly) -> UPoly {
    let da = a.degree().unwrap_or(0) as usize;
    let db = b.degree().unwrap_or(0) as usize;
    let bound = da * db;
    let xs: Vec<Scalar> = (0..=bound as i64).map(|k| Scalar::from_int(k - (bound as i64) / 2)).collect();
    let ys: Vec<Scalar> = xs
        .iter()
        .map(|x0| sylvester_resultant(&specialize_x(a, x0), &specialize_x(b, x0)))
        .collect();
    interpolate(&xs, &ys)
}

/// Complex roots of `sum c_k z^k` (ascending coefficients), with
/// multiplicity, via companion-matrix eigenvalues followed by Newton polish.
pub fn complex_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|v| v.norm() == 0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|v| v / lead).collect();
    let roots: Vec<Complex64> = if n == 1 {
        vec![-monic[0]]
    } else {
        let mut comp = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            comp[(i, n - 1)] = -monic[i];
        }
        match comp.clone().schur().eigenvalues() {
            Some(ev) => ev.iter().cloned().collect(),
            None => durand_kerner(&monic),
        }
    };
    roots.into_iter().map(|r| polish_root(&c, r)).collect()
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn polish_root(c: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..8 {
        let (p, dp) = horner(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let cand = z - step;
        if horner(c, cand).0.norm() >= p.norm() {
            break;
        }
        z = cand;
    }
    z
}

/// Fallback simultaneous iteration for monic polynomials.
fn durand_kerner(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let prev = z.clone();
        for i in 0..n {
            let (p, _) = horner(monic, z[i]);
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() > 0.0 {
                z[i] -= p / den;
            }
        }
        let delta: f64 = z.iter().zip(&prev).map(|(a, b)| (a - b).norm()).sum();
        if delta < 1e-15 {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_poly;

    #[test]
    fn interpolation_recovers_polynomial() {
        let p: UPoly = vec![Scalar::from_int(3), Scalar::from_frac(-1, 2), Scalar::gaussian(0, 2)];
        let xs: Vec<Scalar> = (0..3).map(Scalar::from_int).collect();
        let ys: Vec<Scalar> = xs.iter().map(|x| eval_exact(&p, x)).collect();
        assert_eq!(interpolate(&xs, &ys), p);
    }

    #[test]
    fn resultant_of_circle_and_line() {
        // Res_y(x^2 + y^2 - 1, y - x) = 2x^2 - 1 up to sign.
        let a = parse_poly("x^2 + y^2 - 1").unwrap();
        let b = parse_poly("y - x").unwrap();
        let r = resultant_y(&a, &b);
        assert_eq!(r.len(), 3);
        let ratio = &r[2] / &r[0];
        assert_eq!(ratio, Scalar::from_int(-2));
        assert!(r[1].is_zero());
    }

    #[test]
    fn companion_roots() {
        // (z - 1)(z + 2)(z - i)
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let c = [
            2.0 * i,
            Complex64::new(-2.0, -1.0),
            Complex64::new(1.0, -1.0),
            one,
        ];
        let mut r = complex_roots(&c);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let expect = [Complex64::new(-2.0, 0.0), i, one];
        for (a, b) in r.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }
}
