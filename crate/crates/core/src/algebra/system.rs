//! Isolated common zeros of two bivariate polynomials.
//!
//! A rational shear `x = u + c*y` makes both polynomials have constant
//! leading coefficients in `y`; the exact resultant in `u` is then solved
//! through companion eigenvalues, each root is lifted by solving one
//! polynomial in `y`, and every candidate is polished by 2D Newton on the
//! original system.

use num_complex::Complex64;

use super::univariate::{complex_roots, resultant_y};
use super::{BivarPoly, Mono, Poly, Scalar};
use crate::error::Error;
use crate::numeric::NumPoly;

#[derive(Clone, Debug)]
pub struct SystemOptions {
    /// Relative residual accepted for a root after polishing.
    pub residual_tol: f64,
    /// Newton iterations used for polishing.
    pub newton_iters: usize,
    /// Roots closer than this (relative) are merged.
    pub merge_tol: f64,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-9, newton_iters: 60, merge_tol: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct SystemRoot {
    pub point: [Complex64; 2],
    /// max of the relative residuals of both equations.
    pub residual: f64,
    /// `false` when Newton stalled above the 1e-12 polish target.
    pub polished: bool,
}

const SHEARS: [(i64, i64); 8] = [(0, 1), (1, 3), (-2, 5), (3, 7), (-5, 11), (7, 13), (-11, 17), (13, 19)];

fn top_y_coeff_is_constant(p: &BivarPoly) -> bool {
    let d = p.degree().unwrap_or(0);
    !p.coeff(Mono::new(0, d)).is_zero()
}

fn shear(p: &BivarPoly, c: &Scalar) -> BivarPoly {
    // x -> x + c*y
    let px = Poly::from_terms([(Mono::new(1, 0), Scalar::one()), (Mono::new(0, 1), c.clone())]);
    p.substitute(&px, &BivarPoly::y())
}

/// Relative residual `|p(z)| / sum |c_m z^m|`.
pub fn relative_residual(p: &NumPoly, z: [Complex64; 2]) -> f64 {
    let v = p.eval(z[0], z[1]).norm();
    let s = p.abs_eval(z[0], z[1]);
    if s == 0.0 {
        v
    } else {
        v / s
    }
}

/// `true` when `a` and `b` share a nonconstant factor.
pub fn common_factor(a: &BivarPoly, b: &BivarPoly) -> bool {
    if a.is_zero() || b.is_zero() {
        return true;
    }
    if a.degree() == Some(0) || b.degree() == Some(0) {
        return false;
    }
    for &(n, d) in SHEARS.iter() {
        let c = Scalar::from_frac(n, d);
        let (sa, sb) = (shear(a, &c), shear(b, &c));
        if top_y_coeff_is_constant(&sa) && top_y_coeff_is_constant(&sb) {
            return resultant_y(&sa, &sb).iter().all(|v| v.is_zero());
        }
    }
    false
}

pub fn solve_system(a: &BivarPoly, b: &BivarPoly, opts: &SystemOptions) -> Result<Vec<SystemRoot>, Error> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::NonIsolated("one equation is identically zero".into()));
    }
    if a.degree() == Some(0) || b.degree() == Some(0) {
        return Ok(Vec::new());
    }
    let (c, sa, sb) = SHEARS
        .iter()
        .map(|&(n, d)| Scalar::from_frac(n, d))
        .map(|c| {
            let sa = shear(a, &c);
            let sb = shear(b, &c);
            (c, sa, sb)
        })
        .find(|(_, sa, sb)| top_y_coeff_is_constant(sa) && top_y_coeff_is_constant(sb))
        .ok_or_else(|| Error::NonIsolated("no admissible shear found".into()))?;
    let res = resultant_y(&sa, &sb);
    if res.iter().all(|v| v.is_zero()) {
        return Err(Error::NonIsolated("resultant vanishes identically (common factor)".into()));
    }
    let res_c: Vec<Complex64> = res.iter().map(|v| v.to_c64()).collect();
    let u_roots = complex_roots(&res_c);

    let na = NumPoly::from_exact(a);
    let nb = NumPoly::from_exact(b);
    let cf = c.to_c64();

    let mut found: Vec<SystemRoot> = Vec::new();
    for u in u_roots {
        // Roots in y of sa(u, y).
        let dy = sa.degree_in_y().unwrap_or(0) as usize;
        let mut ycoef = vec![Complex64::new(0.0, 0.0); dy + 1];
        for (m, k) in sa.terms() {
            ycoef[m.y as usize] += k.to_c64() * u.powu(m.x);
        }
        for yv in complex_roots(&ycoef) {
            let x0 = u + cf * yv;
            let start = [x0, yv];
            let (z, polished) = newton2(&na, &nb, start, opts.newton_iters);
            let residual = relative_residual(&na, z).max(relative_residual(&nb, z));
            if !residual.is_finite() || residual > opts.residual_tol {
                continue;
            }
            let scale = 1.0 + z[0].norm() + z[1].norm();
            if found
                .iter()
                .any(|r| (r.point[0] - z[0]).norm() + (r.point[1] - z[1]).norm() <= opts.merge_tol * scale)
            {
                continue;
            }
            found.push(SystemRoot { point: z, residual, polished });
        }
    }
    found.sort_by(|p, q| lex_key(&p.point).partial_cmp(&lex_key(&q.point)).unwrap());
    Ok(found)
}

fn lex_key(z: &[Complex64; 2]) -> [f64; 4] {
    let r = |v: f64| (v * 1e9).round() / 1e9;
    [r(z[0].re), r(z[0].im), r(z[1].re), r(z[1].im)]
}

/// Newton on `(a, b) = 0` from `z`; returns the best iterate and whether the
/// 1e-12 relative-residual target was met.
pub fn newton2(a: &NumPoly, b: &NumPoly, mut z: [Complex64; 2], iters: usize) -> ([Complex64; 2], bool) {
    let res = |z: [Complex64; 2]| relative_residual(a, z).max(relative_residual(b, z));
    let mut best = z;
    let mut best_r = res(z);
    for _ in 0..iters {
        if best_r <= 1e-12 {
            return (best, true);
        }
        let (fa, ga) = a.eval_grad(z[0], z[1]);
        let (fb, gb) = b.eval_grad(z[0], z[1]);
        let det = ga[0] * gb[1] - ga[1] * gb[0];
        if det.norm() == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (fa * gb[1] - fb * ga[1]) / det;
        let dy = (ga[0] * fb - gb[0] * fa) / det;
        z = [z[0] - dx, z[1] - dy];
        let r = res(z);
        if !r.is_finite() {
            break;
        }
        if r < best_r {
            best_r = r;
            best = z;
        }
    }
    (best, best_r <= 1e-12)
}
