//! Formal first integrals at Morse singularities and the even-order
//! obstructions `P_4, P_6, …` to their existence.
//!
//! After a linear change of coordinates the germ reads
//! `ω = d(xy) + ω_2 + ω_3 + …`. Writing `f = xy + f_3 + f_4 + …` and
//! collecting the degree-`n` part of `ω ∧ df` gives
//! `S_n(f_n) = -Σ_{m=2}^{n-1} ω_m ∧ df_{n+1-m}` with `S_n(g) = d(xy) ∧ dg`.
//! `S_n` multiplies `x^i y^j` by `j - i`, so it is invertible for odd `n` and
//! has the one-dimensional kernel and cokernel spanned by `(xy)^{n/2}` for
//! even `n`; the cokernel coefficient of the right-hand side is `P_n`.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{wedge, Coeff, ExactOneForm, Mono, MultiPoly, OneForm, Poly, Scalar, TwoForm};
use crate::error::{Error, Result};

/// Largest order accepted by [`obstructions`] for concrete germs.
pub const MAX_ORDER: u32 = 12;
/// Largest order accepted for symbolic germs.
pub const MAX_SYMBOLIC_ORDER: u32 = 8;

/// A germ whose linear part is exactly (or, in float mode, numerically) `d(xy)`.
#[derive(Clone, Debug)]
pub struct NormalizedGerm<K: Coeff> {
    pub omega: OneForm<K>,
    /// `(x, y) = M (u, v)`, row-major.
    pub linear_map: [[K; 2]; 2],
    /// The form was divided by this constant after the substitution.
    pub k: K,
}

#[derive(Clone, Debug)]
pub enum Germ {
    Exact(NormalizedGerm<Scalar>),
    /// Used when the eigen-data is not Gaussian-rational.
    Float { germ: NormalizedGerm<Complex64>, condition: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMode {
    Exact,
    Float,
    /// Exact when possible, float otherwise.
    Auto,
}

fn xy<K: Coeff>() -> Poly<K> {
    Poly::monomial(Mono::new(1, 1), K::one())
}

/// `true` when the degree-1 part of `ω` is `d(xy) = y dx + x dy`.
pub fn is_normalized<K: Coeff>(omega: &OneForm<K>) -> bool {
    let w1 = omega.homogeneous_part(1);
    w1.dx == Poly::monomial(Mono::new(0, 1), K::one()) && w1.dy == Poly::monomial(Mono::new(1, 0), K::one())
}

fn normalize_with<K: Coeff>(
    omega: &OneForm<K>,
    sqrt: impl Fn(&K) -> Option<K>,
    is_small: impl Fn(&K) -> bool,
) -> Result<NormalizedGerm<K>> {
    let w0 = omega.homogeneous_part(0);
    if !(w0.dx.terms().all(|(_, c)| is_small(c)) && w0.dy.terms().all(|(_, c)| is_small(c))) {
        return Err(Error::Precondition("the form does not vanish at the origin".into()));
    }
    let a1 = omega.dx.coeff(Mono::new(1, 0));
    let b1 = omega.dx.coeff(Mono::new(0, 1));
    let a2 = omega.dy.coeff(Mono::new(1, 0));
    let b2 = omega.dy.coeff(Mono::new(0, 1));
    // trace of the dual vector field (B, -A)
    if !is_small(&a2.sub(&b1)) {
        return Err(Error::Degenerate("linear part is not of center type (nonzero trace)".into()));
    }
    let half = K::one().add(&K::one()).inv().unwrap();
    let alpha = a1.mul(&half);
    let beta = b1;
    let gamma = b2.mul(&half);
    let four = K::from_i64(4);
    let disc = beta.mul(&beta).sub(&four.mul(&alpha).mul(&gamma));
    if is_small(&disc) {
        return Err(Error::Degenerate("linear part is degenerate".into()));
    }
    // ω_1 = dQ with Q = αx² + βxy + γy²; find L with Q = k·u·v, (u, v) = L (x, y).
    let (l, k) = if !is_small(&alpha) {
        let sd = sqrt(&disc).ok_or_else(|| Error::NotExact(format!("square root of the discriminant {disc:?}")))?;
        let two_alpha_inv = alpha.add(&alpha).inv().unwrap();
        let r1 = beta.neg().sub(&sd).mul(&two_alpha_inv);
        let r2 = beta.neg().add(&sd).mul(&two_alpha_inv);
        ([[K::one(), r1.neg()], [K::one(), r2.neg()]], alpha)
    } else if !is_small(&gamma) {
        let r = gamma.mul(&beta.inv().unwrap());
        ([[K::one(), r], [K::zero(), K::one()]], beta)
    } else {
        ([[K::one(), K::zero()], [K::zero(), K::one()]], beta)
    };
    let det = l[0][0].mul(&l[1][1]).sub(&l[0][1].mul(&l[1][0]));
    let dinv = det.inv().ok_or_else(|| Error::Degenerate("singular normalizing map".into()))?;
    let m = [
        [l[1][1].mul(&dinv), l[0][1].neg().mul(&dinv)],
        [l[1][0].neg().mul(&dinv), l[0][0].mul(&dinv)],
    ];
    let kinv = k.inv().ok_or_else(|| Error::Degenerate("zero scale".into()))?;
    let shifted = omega.pullback_affine(&m, &[K::zero(), K::zero()]).scale(&kinv);
    Ok(NormalizedGerm { omega: shifted, linear_map: m, k })
}

/// Brings the linear part of an exact germ to `d(xy)`.
pub fn normalize_exact(omega: &ExactOneForm) -> Result<NormalizedGerm<Scalar>> {
    let g = normalize_with(omega, |c: &Scalar| c.sqrt(), |c: &Scalar| c.is_zero())?;
    if !is_normalized(&g.omega) {
        return Err(Error::NotExact("normalization did not produce d(xy)".into()));
    }
    Ok(g)
}

/// Float normalization; returns the germ, with its linear part snapped to
/// `d(xy)`, and the condition number of the linear map.
pub fn normalize_float(omega: &OneForm<Complex64>) -> Result<(NormalizedGerm<Complex64>, f64)> {
    let scale = [Mono::new(1, 0), Mono::new(0, 1)]
        .iter()
        .flat_map(|&m| [omega.dx.coeff(m).norm(), omega.dy.coeff(m).norm()])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut g = normalize_with(
        omega,
        |c: &Complex64| {
            let c = Complex64::new(c.re + 0.0, c.im + 0.0);
            Some(c.sqrt())
        },
        |c: &Complex64| c.norm() <= tol,
    )?;
    let m = &g.linear_map;
    let norm_m = m.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let condition = norm_m * norm_m / det.norm();
    let w1 = g.omega.homogeneous_part(1);
    let drift = (w1.dx.coeff(Mono::new(0, 1)) - 1.0).norm()
        + (w1.dy.coeff(Mono::new(1, 0)) - 1.0).norm()
        + w1.dx.coeff(Mono::new(1, 0)).norm()
        + w1.dy.coeff(Mono::new(0, 1)).norm();
    if drift > 1e-8 * condition.max(1.0) {
        return Err(Error::Degenerate(format!("float normalization drift {drift:.2e}")));
    }
    // Replace the linear part by d(xy) exactly.
    let rest = &g.omega - &w1;
    g.omega = &rest + &OneForm::new(Poly::monomial(Mono::new(0, 1), Complex64::new(1.0, 0.0)), Poly::monomial(Mono::new(1, 0), Complex64::new(1.0, 0.0)));
    Ok((g, condition))
}

/// Normalizes a germ at the origin, exactly or in float mode.
pub fn normalize_linear_part(omega: &ExactOneForm, mode: NormalizeMode) -> Result<Germ> {
    match mode {
        NormalizeMode::Exact => normalize_exact(omega).map(Germ::Exact),
        NormalizeMode::Float => {
            let (germ, condition) = normalize_float(&omega.map_coeffs(|c| c.to_c64()))?;
            Ok(Germ::Float { germ, condition })
        }
        NormalizeMode::Auto => match normalize_exact(omega) {
            Ok(g) => Ok(Germ::Exact(g)),
            Err(Error::NotExact(_)) => normalize_linear_part(omega, NormalizeMode::Float),
            Err(e) => Err(e),
        },
    }
}

/// `S_n(g) = d(xy) ∧ dg`.
pub fn s_apply<K: Coeff>(n: u32, g: &Poly<K>) -> Result<TwoForm<K>> {
    if !g.is_zero() && !g.is_homogeneous_of(n) {
        return Err(Error::Precondition(format!("input is not homogeneous of degree {n}")));
    }
    let mut out = Poly::zero();
    for (m, c) in g.terms() {
        let w = m.y as i64 - m.x as i64;
        if w != 0 {
            out.add_term(m, c.scale_i64(w));
        }
    }
    Ok(TwoForm::new(out))
}

/// Inverts `S_n` off its kernel: returns `f_n` and the `(xy)^{n/2}`
/// coefficient of `rhs` (zero for odd `n`). The kernel coefficient of `f_n`
/// is set to 0.
pub fn s_solve<K: Coeff>(n: u32, rhs: &TwoForm<K>) -> Result<(Poly<K>, K)> {
    if !rhs.coef.is_zero() && !rhs.coef.is_homogeneous_of(n) {
        return Err(Error::Precondition(format!("right-hand side is not homogeneous of degree {n}")));
    }
    let mut f = Poly::zero();
    let mut obstruction = K::zero();
    for (m, c) in rhs.coef.terms() {
        let w = m.y as i64 - m.x as i64;
        if w == 0 {
            obstruction = c.clone();
        } else {
            f.add_term(m, c.mul(&K::from_i64(w).inv().unwrap()));
        }
    }
    Ok((f, obstruction))
}

#[derive(Clone, Debug)]
pub struct ObstructionReport<K: Coeff> {
    pub max_order: u32,
    /// `(n, P_n)` for even `n` in `4..=max_order`.
    pub values: Vec<(u32, K)>,
    /// `(n, f_n)` for `n` in `3..=max_order`.
    pub jets: Vec<(u32, Poly<K>)>,
    /// Kernel coefficients added to `f_m` (all zero unless requested).
    pub gauge: Vec<(u32, K)>,
}

impl<K: Coeff> ObstructionReport<K> {
    pub fn value(&self, n: u32) -> Option<&K> {
        self.values.iter().find(|(m, _)| *m == n).map(|(_, v)| v)
    }
}

/// Runs the recursion up to order `n_max` with the default gauge.
pub fn obstructions<K: Coeff>(omega: &OneForm<K>, n_max: u32) -> Result<ObstructionReport<K>> {
    obstructions_with_gauge(omega, n_max, &[])
}

/// Same as [`obstructions`], adding `c·(xy)^{m/2}` to `f_m` for each `(m, c)`.
pub fn obstructions_with_gauge<K: Coeff>(
    omega: &OneForm<K>,
    n_max: u32,
    gauge: &[(u32, K)],
) -> Result<ObstructionReport<K>> {
    if !is_normalized(omega) {
        return Err(Error::Precondition("germ is not normalized: linear part must be d(xy)".into()));
    }
    if n_max < 3 {
        return Err(Error::Precondition("maximal order must be at least 3".into()));
    }
    let parts: Vec<OneForm<K>> = (0..n_max).map(|m| omega.homogeneous_part(m)).collect();
    // f[m] for m = 0..=n_max, f[2] = xy
    let mut f: Vec<Poly<K>> = vec![Poly::zero(); n_max as usize + 1];
    f[2] = xy();
    let mut df: Vec<OneForm<K>> = vec![OneForm::zero(); n_max as usize + 1];
    df[2] = crate::algebra::exterior_d(&f[2]);
    let mut values = Vec::new();
    let mut jets = Vec::new();
    for n in 3..=n_max {
        let mut rhs = TwoForm::zero();
        for m in 2..n {
            let w = &parts[m as usize];
            if w.is_zero() {
                continue;
            }
            rhs = &rhs - &wedge(w, &df[(n + 1 - m) as usize]);
        }
        let (mut fnn, p) = s_solve(n, &rhs)?;
        if let Some((_, c)) = gauge.iter().find(|(m, _)| *m == n) {
            if n % 2 == 0 {
                fnn.add_term(Mono::new(n / 2, n / 2), c.clone());
            }
        }
        if n % 2 == 0 {
            values.push((n, p));
        }
        df[n as usize] = crate::algebra::exterior_d(&fnn);
        f[n as usize] = fnn.clone();
        jets.push((n, fnn));
    }
    Ok(ObstructionReport { max_order: n_max, values, jets, gauge: gauge.to_vec() })
}

/// Number of indeterminates in [`symbolic_template`].
pub fn template_size(with_cubic: bool) -> usize {
    if with_cubic {
        9
    } else {
        6
    }
}

/// The normalized degree-2 germ `d(xy) + ω_2 [+ h_2·(x dy - y dx)]` with
/// indeterminate coefficients `a1..a6` (and `a7..a9`).
///
/// `ω_2 = (a1 x² + a2 xy + a3 y²) dx + (a4 x² + a5 xy + a6 y²) dy`,
/// `h_2 = a7 x² + a8 xy + a9 y²`.
pub fn symbolic_template(with_cubic: bool) -> OneForm<MultiPoly> {
    let quad = [Mono::new(2, 0), Mono::new(1, 1), Mono::new(0, 2)];
    let mut dx = Poly::monomial(Mono::new(0, 1), MultiPoly::one());
    let mut dy = Poly::monomial(Mono::new(1, 0), MultiPoly::one());
    for (k, &m) in quad.iter().enumerate() {
        dx.add_term(m, MultiPoly::var(k));
        dy.add_term(m, MultiPoly::var(3 + k));
    }
    if with_cubic {
        for (k, &m) in quad.iter().enumerate() {
            let a = MultiPoly::var(6 + k);
            dy.add_term(m.mul(Mono::new(1, 0)), a.clone());
            dx.add_term(m.mul(Mono::new(0, 1)), a.neg());
        }
    }
    OneForm::new(dx, dy)
}

/// Values of the template indeterminates for a concrete normalized germ of
/// that shape, or `None` when the germ has other terms.
pub fn template_values(omega: &ExactOneForm, with_cubic: bool) -> Option<Vec<Scalar>> {
    let quad = [Mono::new(2, 0), Mono::new(1, 1), Mono::new(0, 2)];
    let mut vals: Vec<Scalar> = quad.iter().map(|&m| omega.dx.coeff(m)).collect();
    vals.extend(quad.iter().map(|&m| omega.dy.coeff(m)));
    if with_cubic {
        vals.extend(quad.iter().map(|&m| omega.dy.coeff(m.mul(Mono::new(1, 0)))));
    }
    let template = symbolic_template(with_cubic);
    let rebuilt = template.map_coeffs(|c| c.eval(&vals));
    (rebuilt == *omega).then_some(vals)
}

/// Float test used to classify singular points: runs the recursion on a
/// float germ at the origin and returns `max_n |P_n|` together with the
/// tolerance it should be compared against.
pub fn float_center_residual(omega: &OneForm<Complex64>, n_max: u32) -> Result<(f64, f64)> {
    let (germ, condition) = normalize_float(omega)?;
    let report = obstructions(&germ.omega, n_max)?;
    let coef_scale = germ
        .omega
        .dx
        .terms()
        .chain(germ.omega.dy.terms())
        .map(|(_, c)| c.norm())
        .fold(1.0, f64::max);
    let worst = report.values.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let tol = 1e-7 * condition.max(1.0) * coef_scale.powi(n_max as i32 - 2);
    Ok((worst, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{exterior_d, parse_poly, BivarPoly};

    fn p(s: &str) -> BivarPoly {
        parse_poly(s).unwrap()
    }

    fn form(a: &str, b: &str) -> ExactOneForm {
        OneForm::new(p(a), p(b))
    }

    #[test]
    fn s_operator_examples() {
        assert_eq!(s_apply(3, &p("x^2*y")).unwrap().coef, p("-x^2*y"));
        assert!(s_apply(4, &p("x^2*y^2")).unwrap().is_zero());
        assert!(s_apply(5, &BivarPoly::zero()).unwrap().is_zero());
        assert!(s_apply(3, &p("x^2 + y^3")).is_err());

        let (f3, o3) = s_solve(3, &TwoForm::new(p("x^3"))).unwrap();
        assert_eq!(f3, p("-x^3/3"));
        assert!(o3.is_zero());
        let (f4, o4) = s_solve(4, &TwoForm::new(p("x^2*y^2"))).unwrap();
        assert!(f4.is_zero());
        assert_eq!(o4, Scalar::one());
        let (f, o) = s_solve(3, &TwoForm::<Scalar>::zero()).unwrap();
        assert!(f.is_zero() && o.is_zero());
    }

    #[test]
    fn normalize_examples() {
        let g = normalize_exact(&form("3*y", "3*x")).unwrap();
        assert_eq!(g.k, Scalar::from_int(3));
        assert_eq!(g.linear_map[0][0], Scalar::one());
        assert!(g.linear_map[0][1].is_zero());

        let g = normalize_exact(&form("x", "y")).unwrap();
        assert_eq!(g.k, Scalar::from_frac(1, 2));
        assert_eq!(g.omega, form("y", "x"));
        // x = (u + v)/2, y = i(v - u)/2  <=>  u = x + iy, v = x - iy
        assert_eq!(g.linear_map[0][0], Scalar::from_frac(1, 2));
        assert_eq!(g.linear_map[1][0], &Scalar::from_frac(-1, 2) * &Scalar::i());

        assert!(matches!(normalize_exact(&form("x", "0")), Err(Error::Degenerate(_))));
        assert!(matches!(normalize_exact(&form("y", "-x")), Err(Error::Degenerate(_))));
    }

    #[test]
    fn irrational_eigen_data_falls_back_to_float() {
        // Q = x² + xy - y²/4, discriminant 2
        let w = form("2*x + y", "x - y/2");
        assert!(matches!(normalize_exact(&w), Err(Error::NotExact(_))));
        assert!(matches!(normalize_linear_part(&w, NormalizeMode::Auto).unwrap(), Germ::Float { .. }));
    }

    #[test]
    fn hand_examples() {
        let r = obstructions(&form("y", "x + x^2"), 8).unwrap();
        assert_eq!(r.jets[0], (3, p("-x^2*y")));
        assert!(r.value(4).unwrap().is_zero());

        let r = obstructions(&form("y + x*y", "x"), 8).unwrap();
        assert_eq!(r.jets[0].1, p("x^2*y"));
        assert_eq!(r.jets[1].1, p("x^3*y/2"));
        assert_eq!(r.jets[2].1, p("x^4*y/6"));
        assert!(r.values.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn exact_forms_have_no_obstructions() {
        let w = exterior_d(&p("x*y + x^3 - 2*x*y^2 + 5*x^2*y^2 + y^5 - x^4*y"));
        let r = obstructions(&w, 12).unwrap();
        assert_eq!(r.values.len(), 5);
        assert!(r.values.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn generic_germ_has_nonzero_p4() {
        // P_4 = a2·a3 - a4·a5 on the quadratic template
        let r = obstructions(&form("y + x^2 + 2*x*y + y^2", "x + 3*y^2 - x*y"), 6).unwrap();
        assert_eq!(r.value(4).unwrap(), &Scalar::from_int(2));
    }

    #[test]
    fn unnormalized_germ_is_rejected() {
        assert!(obstructions(&form("2*y", "x"), 6).is_err());
    }

    #[test]
    fn symbolic_template_specializes() {
        let t = symbolic_template(true);
        let vals: Vec<Scalar> = (1..=9).map(Scalar::from_int).collect();
        let concrete = t.map_coeffs(|c| c.eval(&vals));
        assert_eq!(template_values(&concrete, true).unwrap(), vals);
        let sym = obstructions(&t, 6).unwrap();
        let num = obstructions(&concrete, 6).unwrap();
        for ((n, s), (_, v)) in sym.values.iter().zip(&num.values) {
            assert_eq!(&s.eval(&vals), v, "P_{n}");
        }
    }

    #[test]
    fn float_residual_for_center_and_focus_like_germs() {
        let c = exterior_d(&p("x*y + x^3 + y^4")).map_coeffs(|c| c.to_c64());
        let (worst, tol) = float_center_residual(&c, 6).unwrap();
        assert!(worst <= tol);
        let nc = form("y + x^2 + 2*x*y + y^2", "x + 3*y^2 - x*y").map_coeffs(|c| c.to_c64());
        let (worst, tol) = float_center_residual(&nc, 6).unwrap();
        assert!(worst > tol);
    }
}
