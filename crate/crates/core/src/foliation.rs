//! Integrable foliations: pencils `pG dF - qF dG`, logarithmic forms, and
//! plain polynomial 1-forms, with their singular points.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::system::{common_factor, solve_system, SystemOptions};
use crate::algebra::{exterior_d, BivarPoly, ExactOneForm, Mono, OneForm, Scalar};
use crate::center::float_center_residual;
use crate::error::{Error, Result};
use crate::numeric::NumPoly;

/// Degree cap for singular point searches.
pub const MAX_FORM_DEGREE: u32 = 6;

/// A pencil `f = F^p / G^q`, or the Hamiltonian case `G = 1`, `p = q = 1`.
#[derive(Clone, Debug)]
pub struct PencilSpec {
    pub f: BivarPoly,
    pub g: BivarPoly,
    pub p: u32,
    pub q: u32,
    pub warnings: Vec<String>,
}

impl PencilSpec {
    /// Validates `(F, G, p, q)`. A constant `G` is normalized to the
    /// Hamiltonian case.
    pub fn new(f: BivarPoly, g: BivarPoly, p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Precondition("p and q must be positive".into()));
        }
        if f.is_zero() || f.degree() == Some(0) {
            return Err(Error::Precondition("F must be nonconstant".into()));
        }
        if g.is_zero() {
            return Err(Error::Precondition("G must be nonzero".into()));
        }
        let mut warnings = Vec::new();
        if g.degree() == Some(0) {
            let c = g.coeff(Mono::ONE);
            let f = f.scale(&c.inv().unwrap());
            if p != 1 || q != 1 {
                warnings.push(format!("constant G: normalized (p, q) = ({p}, {q}) to (1, 1), f = F/G"));
            }
            return Ok(Self { f, g: BivarPoly::one(), p: 1, q: 1, warnings });
        }
        if p.gcd(&q) != 1 {
            return Err(Error::Precondition(format!("gcd(p, q) = {} ≠ 1", p.gcd(&q))));
        }
        if common_factor(&f, &g) {
            return Err(Error::Precondition("F and G share a common factor".into()));
        }
        let (df, dg) = (f.degree().unwrap(), g.degree().unwrap());
        if p * df != q * dg {
            warnings.push(format!("deg F / deg G = {df}/{dg} differs from q/p = {q}/{p}"));
        }
        Ok(Self { f, g, p, q, warnings })
    }

    pub fn hamiltonian(f: BivarPoly) -> Result<Self> {
        Self::new(f, BivarPoly::one(), 1, 1)
    }

    pub fn is_hamiltonian(&self) -> bool {
        self.g.degree() == Some(0)
    }

    /// `ω_0 = pG dF - qF dG`.
    pub fn omega0(&self) -> ExactOneForm {
        let p = Scalar::from_int(self.p as i64);
        let q = Scalar::from_int(self.q as i64);
        let a = exterior_d(&self.f).mul_poly(&self.g.scale(&p));
        let b = exterior_d(&self.g).mul_poly(&self.f.scale(&q));
        &a - &b
    }

    /// Foliation degree `deg F + deg G - 2` (`deg F - 1` when Hamiltonian).
    pub fn degree(&self) -> u32 {
        let s = self.f.degree().unwrap() + self.g.degree().unwrap();
        s.saturating_sub(if self.is_hamiltonian() { 1 } else { 2 })
    }

    /// The polynomials whose common zeros are indeterminacy points.
    pub fn factors(&self) -> Vec<BivarPoly> {
        if self.is_hamiltonian() {
            vec![self.f.clone()]
        } else {
            vec![self.f.clone(), self.g.clone()]
        }
    }

    pub fn eval_f(&self, z: [Complex64; 2]) -> Complex64 {
        let fv = NumPoly::from_exact(&self.f).eval(z[0], z[1]);
        let gv = NumPoly::from_exact(&self.g).eval(z[0], z[1]);
        fv.powu(self.p) / gv.powu(self.q)
    }
}

/// `ω` together with its declared projective degree.
#[derive(Clone, Debug)]
pub struct FoliationForm {
    pub omega: ExactOneForm,
    pub degree: u32,
    /// Log factors, if the form came from [`logarithmic_form`].
    pub factors: Vec<BivarPoly>,
    pub warnings: Vec<String>,
}

impl FoliationForm {
    pub fn new(omega: ExactOneForm, degree: u32) -> Self {
        let mut warnings = Vec::new();
        if let Some(d) = omega.degree() {
            if d > degree + 1 {
                warnings.push(format!("form has affine degree {d} > declared degree {degree} + 1"));
            }
        }
        Self { omega, degree, factors: Vec::new(), warnings }
    }
}

/// Shorthand for building a pencil through its public constructor.
pub fn pencil_form(f: BivarPoly, g: BivarPoly, p: u32, q: u32) -> Result<PencilSpec> {
    PencilSpec::new(f, g, p, q)
}

/// `f_1⋯f_r Σ λ_i df_i / f_i`, requiring `Σ deg(f_i) λ_i = 0`.
pub fn logarithmic_form(factors: &[BivarPoly], lambdas: &[Scalar]) -> Result<FoliationForm> {
    if factors.len() != lambdas.len() || factors.len() < 2 {
        return Err(Error::Precondition("need at least two factors with one λ each".into()));
    }
    for f in factors {
        if f.is_zero() || f.degree() == Some(0) {
            return Err(Error::Precondition("factors must be nonconstant".into()));
        }
    }
    let side = factors
        .iter()
        .zip(lambdas)
        .fold(Scalar::zero(), |acc, (f, l)| &acc + &(l * &Scalar::from_int(f.degree().unwrap() as i64)));
    if !side.is_zero() {
        return Err(Error::Precondition(format!("Σ deg(f_i) λ_i = {side} ≠ 0")));
    }
    for i in 0..factors.len() {
        for j in i + 1..factors.len() {
            if common_factor(&factors[i], &factors[j]) {
                return Err(Error::Precondition(format!("factors {i} and {j} share a common factor")));
            }
        }
    }
    let mut omega = OneForm::zero();
    for (i, (fi, li)) in factors.iter().zip(lambdas).enumerate() {
        let others = factors
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(BivarPoly::one(), |acc, (_, fj)| &acc * fj);
        omega = &omega + &exterior_d(fi).mul_poly(&others.scale(li));
    }
    let degree = factors.iter().map(|f| f.degree().unwrap()).sum::<u32>().saturating_sub(2);
    let mut ff = FoliationForm::new(omega, degree);
    ff.factors = factors.to_vec();
    if ff.omega.degree().map(|d| d + 1) != Some(degree + 2) {
        ff.warnings.push(format!(
            "form degree {:?} is not the generic Σ deg f_i - 1 = {}",
            ff.omega.degree(),
            degree + 1
        ));
    }
    Ok(ff)
}

/// Expected number of centers of a generic logarithmic foliation:
/// `d² + d + 1 - Σ_{i<j} d_i d_j`.
pub fn logarithmic_center_count(degrees: &[u32]) -> i64 {
    let d: i64 = degrees.iter().map(|&v| v as i64).sum::<i64>() - 2;
    let mut pairs = 0i64;
    for i in 0..degrees.len() {
        for j in i + 1..degrees.len() {
            pairs += degrees[i] as i64 * degrees[j] as i64;
        }
    }
    d * d + d + 1 - pairs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularKind {
    MorseCenterCandidate,
    NonDegenerateOther,
    Degenerate,
    Indeterminacy,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularPoint {
    pub location: [Complex64; 2],
    pub kind: SingularKind,
    pub residual: f64,
    /// Trace and determinant of the linearization of `(B, -A)`.
    pub trace: Complex64,
    pub det: Complex64,
    /// `max |P_n|` of the float center test and its tolerance, when run.
    pub center_test: Option<(f64, f64)>,
    pub polished: bool,
}

#[derive(Clone, Debug)]
pub struct SingularOptions {
    pub system: SystemOptions,
    /// Keep points with `max(|x|, |y|) ≤ radius`.
    pub box_radius: Option<f64>,
    /// Keep only points with real coordinates.
    pub real_only: bool,
    /// Orders used by the float center test.
    pub center_order: u32,
}

impl Default for SingularOptions {
    fn default() -> Self {
        Self { system: SystemOptions::default(), box_radius: None, real_only: false, center_order: 6 }
    }
}

/// Translates `ω` to `z0` in complex floats.
pub fn translate_c64(omega: &ExactOneForm, z0: [Complex64; 2]) -> OneForm<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    omega.map_coeffs(|c| c.to_c64()).pullback_affine(&[[one, zero], [zero, one]], &z0)
}

fn classify(
    omega: &ExactOneForm,
    factors: &[BivarPoly],
    z: [Complex64; 2],
    opts: &SingularOptions,
) -> (SingularKind, Complex64, Complex64, Option<(f64, f64)>) {
    let vanishing = factors
        .iter()
        .filter(|f| crate::algebra::system::relative_residual(&NumPoly::from_exact(f), z) <= 1e-8)
        .count();
    let (_, ga) = NumPoly::from_exact(&omega.dx).eval_grad(z[0], z[1]);
    let (_, gb) = NumPoly::from_exact(&omega.dy).eval_grad(z[0], z[1]);
    // J of (B, -A)
    let j = [[gb[0], gb[1]], [-ga[0], -ga[1]]];
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if factors.len() >= 2 && vanishing >= 2 {
        return (SingularKind::Indeterminacy, trace, det, None);
    }
    if scale == 0.0 || det.norm() <= 1e-8 * scale * scale {
        return (SingularKind::Degenerate, trace, det, None);
    }
    if trace.norm() > 1e-8 * scale {
        return (SingularKind::NonDegenerateOther, trace, det, None);
    }
    let germ = translate_c64(omega, z);
    match float_center_residual(&germ, opts.center_order) {
        Ok((worst, tol)) if worst <= tol => (SingularKind::MorseCenterCandidate, trace, det, Some((worst, tol))),
        Ok(r) => (SingularKind::NonDegenerateOther, trace, det, Some(r)),
        Err(_) => (SingularKind::NonDegenerateOther, trace, det, None),
    }
}

/// Common zeros of the two components of `ω`, classified.
///
/// `factors` are the polynomials whose pairwise common zeros count as
/// indeterminacy points (pencil: `F, G`; logarithmic: the `f_i`).
pub fn singular_points(omega: &ExactOneForm, factors: &[BivarPoly], opts: &SingularOptions) -> Result<Vec<SingularPoint>> {
    let deg = omega.degree().unwrap_or(0);
    if deg > MAX_FORM_DEGREE {
        return Err(Error::Cap(format!("form degree {deg} exceeds {MAX_FORM_DEGREE}")));
    }
    let roots = solve_system(&omega.dx, &omega.dy, &opts.system)?;
    let pts: Vec<SingularPoint> = roots
        .par_iter()
        .map(|r| {
            let (kind, trace, det, center_test) = classify(omega, factors, r.point, opts);
            SingularPoint { location: r.point, kind, residual: r.residual, trace, det, center_test, polished: r.polished }
        })
        .collect();
    Ok(pts
        .into_iter()
        .filter(|s| opts.box_radius.is_none_or(|b| s.location[0].norm() <= b && s.location[1].norm() <= b))
        .filter(|s| !opts.real_only || (s.location[0].im.abs() <= 1e-9 && s.location[1].im.abs() <= 1e-9))
        .collect())
}

/// Singular points of a pencil's `ω_0`.
pub fn pencil_singular_points(spec: &PencilSpec, opts: &SingularOptions) -> Result<Vec<SingularPoint>> {
    let factors = if spec.is_hamiltonian() { Vec::new() } else { spec.factors() };
    singular_points(&spec.omega0(), &factors, opts)
}

/// Checks `F^{p-1}·ω_0 = G^{q+1}·d(F^p/G^q)` exactly, after multiplying
/// both sides by `G^{q-1}` so the right side becomes the quotient-rule
/// numerator `G^q d(F^p) - F^p d(G^q)`.
pub fn integrating_identity_holds(spec: &PencilSpec) -> bool {
    let lhs = spec.omega0().mul_poly(&(&spec.f.pow(spec.p - 1) * &spec.g.pow(spec.q - 1)));
    let fp = spec.f.pow(spec.p);
    let gq = spec.g.pow(spec.q);
    let rhs = &exterior_d(&fp).mul_poly(&gq) - &exterior_d(&gq).mul_poly(&fp);
    lhs == rhs
}

/// Reads `Σ λ_i` strings into exact scalars.
pub fn parse_lambdas(items: &[String]) -> Result<Vec<Scalar>> {
    items.iter().map(|s| crate::algebra::parse_scalar(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly, wedge};

    fn p(s: &str) -> BivarPoly {
        parse_poly(s).unwrap()
    }

    #[test]
    fn pencil_examples() {
        let s = PencilSpec::new(p("x*y"), p("1"), 1, 1).unwrap();
        assert_eq!(s.omega0(), OneForm::new(p("y"), p("x")));
        let s = PencilSpec::new(p("x^2 + y^2 - 1"), p("y - 2"), 1, 2).unwrap();
        let expect = OneForm::new(p("(y - 2)*2*x"), p("(y - 2)*2*y - 2*(x^2 + y^2 - 1)"));
        assert_eq!(s.omega0(), expect);
        assert!(s.warnings.is_empty());
        assert!(PencilSpec::new(p("x"), p("x"), 1, 1).is_err());
        assert!(PencilSpec::new(p("x^2 + y"), p("y^2 - x"), 2, 2).is_err());
        let h = PencilSpec::new(p("x*y"), p("2"), 3, 5).unwrap();
        assert!(h.is_hamiltonian() && h.p == 1 && h.q == 1);
        assert_eq!(h.f, p("x*y/2"));
    }

    #[test]
    fn pencil_is_integrable() {
        let s = PencilSpec::new(p("x^3 + y^2 - x*y + 1"), p("x^2 + 2*y - 3"), 2, 3).unwrap();
        let w = s.omega0();
        assert!(wedge(&w, &w).is_zero());
        assert!(integrating_identity_holds(&s));
    }

    #[test]
    fn logarithmic_examples() {
        let f = p("x^2 + y^2 - 1");
        let g = p("x^2 + 3*x*y - y^2 + x - 2");
        let log = logarithmic_form(&[f.clone(), g.clone()], &[Scalar::one(), Scalar::from_int(-1)]).unwrap();
        let pen = PencilSpec::new(f.clone(), g.clone(), 1, 1).unwrap();
        assert_eq!(log.omega, pen.omega0());
        assert_eq!(log.degree, 2);
        assert!(logarithmic_form(&[f.clone(), g], &[Scalar::one(), Scalar::from_int(2)]).is_err());
        assert!(logarithmic_form(&[f.clone(), f], &[Scalar::one(), Scalar::from_int(-1)]).is_err());
        assert_eq!(logarithmic_center_count(&[2, 2]), 3);
        let pts = singular_points(&log.omega, &log.factors, &SingularOptions::default()).unwrap();
        let count = |k| pts.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(SingularKind::MorseCenterCandidate), 3, "{pts:?}");
        assert_eq!(count(SingularKind::Indeterminacy), 4);
    }

    #[test]
    fn concentric_conics_degenerate_to_one_center() {
        let log = logarithmic_form(&[p("x^2 + y^2 - 1"), p("x^2 + y^2 - 4")], &[Scalar::one(), Scalar::from_int(-1)]).unwrap();
        assert_eq!(log.omega, OneForm::new(p("-6*x"), p("-6*y")));
        assert!(!log.warnings.is_empty());
    }

    #[test]
    fn singular_points_examples() {
        let h = PencilSpec::hamiltonian(p("x*y")).unwrap();
        let pts = pencil_singular_points(&h, &SingularOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, SingularKind::MorseCenterCandidate);

        let h = PencilSpec::hamiltonian(p("x^3 - 3*x + y^2")).unwrap();
        let pts = pencil_singular_points(&h, &SingularOptions::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].location[0] + 1.0).norm() < 1e-12 && (pts[1].location[0] - 1.0).norm() < 1e-12);
        assert!(pts.iter().all(|s| s.kind == SingularKind::MorseCenterCandidate));
    }

    #[test]
    fn non_center_singularities() {
        // node: eigenvalue ratio 2
        let w = OneForm::new(p("y"), p("2*x"));
        let pts = singular_points(&w, &[], &SingularOptions::default()).unwrap();
        assert_eq!(pts[0].kind, SingularKind::NonDegenerateOther);
        // cusp
        let w = exterior_d(&p("y^2 - x^3"));
        let pts = singular_points(&w, &[], &SingularOptions::default()).unwrap();
        assert!(pts.iter().all(|s| s.kind == SingularKind::Degenerate), "{pts:?}");
    }
}
