//! Relative exactness: exact decompositions `ω = dg + p·dφ`, tangent-space
//! membership for the pencil, and the integral test over vanishing and
//! residue cycles.
//!
//! Rational functions and forms are kept as numerators over products of the
//! pencil factors `h = (F, G)`, so every identity is checked after clearing
//! a common power of `h`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::abelian::{
    default_residue_radius, integrate, Integral, QuadOptions, RationalForm,
};
use crate::algebra::linalg::{least_squares_residual, solve, ExactMatrix, Solve};
use crate::algebra::{exterior_d, monomials_up_to, BivarPoly, ExactOneForm, Mono, OneForm, Scalar};
use crate::error::{Error, Result};
use crate::fibration::{
    critical_data, fiber_component_count, seed_indeterminacy_cycle, vanishing_family, Fibration, TraceOptions,
};
use crate::foliation::PencilSpec;
use crate::numeric::C64;

/// Global cap on ansatz degrees; `MELNIKOV_KIT_MAXDEG` overrides it.
pub fn degree_cap() -> u32 {
    std::env::var("MELNIKOV_KIT_MAXDEG").ok().and_then(|v| v.parse().ok()).unwrap_or(24)
}

/// Integrating-factor convention: `ω₀/s = df` or `ω₀/s = d log f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Df,
    Dlogf,
}

impl Normalization {
    /// `df` for Hamiltonian specs, `d log f` for pencils.
    pub fn default_for(spec: &PencilSpec) -> Self {
        if spec.is_hamiltonian() { Normalization::Df } else { Normalization::Dlogf }
    }

    /// `s` as a [`PoleFn`] reciprocal: returns the multiplier `1/s`.
    fn inverse_s(self, spec: &PencilSpec) -> PoleFn {
        let fac = Factors::of(spec);
        match self {
            // 1/s = F^{p-1} / G^{q+1}
            Normalization::Df => {
                let mut exps = vec![0; fac.len()];
                if fac.len() == 2 {
                    exps[1] = spec.q + 1;
                }
                PoleFn { num: spec.f.pow(spec.p - 1), exps }
            }
            Normalization::Dlogf => PoleFn { num: BivarPoly::one(), exps: vec![1; fac.len()] },
        }
    }

    /// `ω / s`.
    pub fn divide(self, spec: &PencilSpec, w: &ExactOneForm) -> PoleForm {
        self.inverse_s(spec).times_form(&PoleForm::polynomial(w.clone(), Factors::of(spec).len()))
    }

    /// `dφ = ω₀ / s`.
    pub fn dphi(self, spec: &PencilSpec) -> PoleForm {
        self.divide(spec, &spec.omega0())
    }

    /// `s` itself as a polynomial over a factor power.
    pub fn s_rational(self, spec: &PencilSpec) -> (BivarPoly, BivarPoly) {
        let inv = self.inverse_s(spec);
        (Factors::of(spec).power(&inv.exps), inv.num)
    }
}

/// Denominator factors `h`: `[F]` for Hamiltonian specs, `[F, G]` otherwise.
#[derive(Clone, Debug)]
pub struct Factors {
    pub polys: Vec<BivarPoly>,
}

impl Factors {
    pub fn of(spec: &PencilSpec) -> Self {
        let mut polys = vec![spec.f.clone()];
        if !spec.is_hamiltonian() {
            polys.push(spec.g.clone());
        }
        Self { polys }
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn power(&self, exps: &[u32]) -> BivarPoly {
        let mut out = BivarPoly::one();
        for (h, &e) in self.polys.iter().zip(exps) {
            if e > 0 {
                out = &out * &h.pow(e);
            }
        }
        out
    }

    fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|h| h.degree().unwrap_or(0)).collect()
    }
}

/// `num / h^exps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleFn {
    pub num: BivarPoly,
    pub exps: Vec<u32>,
}

/// `num / h^exps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleForm {
    pub num: ExactOneForm,
    pub exps: Vec<u32>,
}

fn max_exps(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

fn diff_exps(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl PoleFn {
    pub fn zero(n: usize) -> Self {
        Self { num: BivarPoly::zero(), exps: vec![0; n] }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn times_form(&self, w: &PoleForm) -> PoleForm {
        PoleForm {
            num: w.num.mul_poly(&self.num),
            exps: self.exps.iter().zip(&w.exps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn to_rational(&self, fac: &Factors) -> (BivarPoly, BivarPoly) {
        (self.num.clone(), fac.power(&self.exps))
    }
}

impl PoleForm {
    pub fn polynomial(num: ExactOneForm, n: usize) -> Self {
        Self { num, exps: vec![0; n] }
    }

    pub fn zero(n: usize) -> Self {
        Self::polynomial(OneForm::zero(), n)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &PoleForm, fac: &Factors) -> PoleForm {
        let m = max_exps(&self.exps, &other.exps);
        let a = self.num.mul_poly(&fac.power(&diff_exps(&m, &self.exps)));
        let b = other.num.mul_poly(&fac.power(&diff_exps(&m, &other.exps)));
        PoleForm { num: &a + &b, exps: m }
    }

    pub fn neg(&self) -> PoleForm {
        PoleForm { num: -&self.num, exps: self.exps.clone() }
    }

    pub fn to_rational(&self, fac: &Factors) -> Result<RationalForm> {
        RationalForm::new(self.num.clone(), fac.power(&self.exps))
    }
}

/// `d(num/h^α) · h^m` as a polynomial form, for `m ≥ α + 1` where `α > 0`.
fn cleared_d(num: &BivarPoly, alpha: &[u32], m: &[u32], fac: &Factors) -> ExactOneForm {
    let mut out = exterior_d(num).mul_poly(&fac.power(&diff_exps(m, alpha)));
    for (i, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let mut e = diff_exps(m, alpha);
        e[i] -= 1;
        let coef = num * &fac.power(&e);
        let dh = exterior_d(&fac.polys[i]).mul_poly(&coef).scale(&Scalar::from_int(a as i64));
        out = &out - &dh;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionBounds {
    pub g_degree: u32,
    pub p_degree: u32,
    /// Number of growth steps after the first attempt.
    pub max_growth: u32,
    /// Degree increment per growth step.
    pub step: u32,
    /// Largest total pole order tried for `g` in the pencil case.
    pub max_pole: u32,
}

impl DecompositionBounds {
    /// `deg g ≤ k·d_f`, `deg p ≤ (k-1)·d_f`.
    pub fn for_order(k: u32, spec: &PencilSpec) -> Self {
        let df = spec.f.degree().unwrap_or(1).max(1);
        Self { g_degree: k * df, p_degree: (k.max(1) - 1) * df, max_growth: 2, step: df, max_pole: 2 }
    }

    pub fn fixed(g_degree: u32, p_degree: u32) -> Self {
        Self { g_degree, p_degree, max_growth: 0, step: 1, max_pole: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub g: PoleFn,
    pub p: PoleFn,
    pub g_degree: u32,
    pub p_degree: u32,
    /// `ω − dg − p·dφ` vanishes identically after clearing denominators.
    pub residual_zero: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InfeasibleCertificate {
    pub g_degree: u32,
    pub p_degree: u32,
    /// Nonzero entries of a functional `y` with `yᵀA = 0`, `yᵀb ≠ 0`.
    pub cokernel_support: usize,
    pub cokernel_pairing: String,
    pub lsq_residual: f64,
}

#[derive(Clone, Debug)]
pub enum DecomposeOutcome {
    Found(Decomposition),
    Infeasible(InfeasibleCertificate),
}

/// Rows indexed by (component, monomial) of polynomial 1-forms.
struct Assembler {
    rows: BTreeMap<(u8, Mono), usize>,
}

impl Assembler {
    fn new(forms: &[&ExactOneForm]) -> Self {
        let mut rows = BTreeMap::new();
        for w in forms {
            for (c, p) in [(0u8, &w.dx), (1u8, &w.dy)] {
                for (m, _) in p.terms() {
                    rows.entry((c, m)).or_insert(0);
                }
            }
        }
        for (i, v) in rows.values_mut().enumerate() {
            *v = i;
        }
        Self { rows }
    }

    fn system(&self, cols: &[ExactOneForm], rhs: &ExactOneForm) -> (ExactMatrix, Vec<Scalar>) {
        let mut a = ExactMatrix::zeros(self.rows.len(), cols.len());
        for (j, w) in cols.iter().enumerate() {
            for (c, p) in [(0u8, &w.dx), (1u8, &w.dy)] {
                for (m, v) in p.terms() {
                    a.set(self.rows[&(c, m)], j, v.clone());
                }
            }
        }
        let mut b = vec![Scalar::zero(); self.rows.len()];
        for (c, p) in [(0u8, &rhs.dx), (1u8, &rhs.dy)] {
            for (m, v) in p.terms() {
                b[self.rows[&(c, m)]] = v.clone();
            }
        }
        (a, b)
    }
}

fn combine(monos: &[Mono], coefs: &[Scalar]) -> BivarPoly {
    BivarPoly::from_terms(monos.iter().zip(coefs).map(|(m, c)| (*m, c.clone())))
}

fn pole_orders(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; n]];
    for total in 1..=max_total {
        match n {
            1 => out.push(vec![total]),
            2 => {
                for a in (0..=total).rev() {
                    out.push(vec![a, total - a]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Solves `target = dg + p·dφ` over growing ansatz spaces.
pub fn decompose(
    target: &PoleForm,
    spec: &PencilSpec,
    norm: Normalization,
    bounds: &DecompositionBounds,
) -> Result<DecomposeOutcome> {
    let fac = Factors::of(spec);
    let dphi = norm.dphi(spec);
    let hdeg = fac.degrees();
    let polynomial_case = spec.is_hamiltonian() && norm == Normalization::Df;
    let alphas = if polynomial_case { vec![vec![0; fac.len()]] } else { pole_orders(fac.len(), bounds.max_pole) };
    let cap = degree_cap();
    let mut last: Option<InfeasibleCertificate> = None;
    if target.is_zero() {
        return Ok(DecomposeOutcome::Found(Decomposition {
            g: PoleFn::zero(fac.len()),
            p: PoleFn::zero(fac.len()),
            g_degree: 0,
            p_degree: 0,
            residual_zero: true,
        }));
    }
    for growth in 0..=bounds.max_growth {
        let gd = bounds.g_degree + growth * bounds.step;
        let pd = bounds.p_degree + growth * bounds.step;
        for alpha in &alphas {
            let lift: Vec<u32> = alpha.iter().map(|&a| a + u32::from(a > 0)).collect();
            let need = max_exps(&lift, &target.exps);
            let beta: Vec<u32> = need.iter().zip(&dphi.exps).map(|(n, c)| n.saturating_sub(*c)).collect();
            let bc: Vec<u32> = beta.iter().zip(&dphi.exps).map(|(b, c)| b + c).collect();
            let m = max_exps(&max_exps(&target.exps, &lift), &bc);
            let shift = |e: &[u32]| -> u32 { e.iter().zip(&hdeg).map(|(a, d)| a * d).sum() };
            let gdeg = gd + shift(alpha);
            let pdeg = pd + shift(&beta);
            if gdeg > cap || pdeg > cap {
                return Err(Error::Cap(format!(
                    "ansatz degree {} exceeds the cap {cap} (MELNIKOV_KIT_MAXDEG)",
                    gdeg.max(pdeg)
                )));
            }
            let gauge: Vec<Mono> = if polynomial_case {
                let mut v = vec![Mono::ONE];
                let mut pw = BivarPoly::one();
                loop {
                    pw = &pw * &spec.f;
                    match pw.leading() {
                        Some((lm, _)) if lm.degree() <= gdeg => v.push(lm),
                        _ => break,
                    }
                }
                v
            } else {
                vec![Mono::ONE]
            };
            let g_monos: Vec<Mono> = monomials_up_to(gdeg).into_iter().filter(|m| !gauge.contains(m)).collect();
            let p_monos = monomials_up_to(pdeg);
            let pcols_factor = dphi.num.mul_poly(&fac.power(&diff_exps(&m, &bc)));
            let mut cols: Vec<ExactOneForm> = Vec::new();
            for &mu in &g_monos {
                cols.push(cleared_d(&BivarPoly::monomial(mu, Scalar::one()), alpha, &m, &fac));
            }
            for &mu in &p_monos {
                cols.push(pcols_factor.mul_poly(&BivarPoly::monomial(mu, Scalar::one())));
            }
            for &mu in &gauge {
                cols.push(cleared_d(&BivarPoly::monomial(mu, Scalar::one()), alpha, &m, &fac));
            }
            let rhs = target.num.mul_poly(&fac.power(&diff_exps(&m, &target.exps)));
            let mut all: Vec<&ExactOneForm> = cols.iter().collect();
            all.push(&rhs);
            let asm = Assembler::new(&all);
            let (a, b) = asm.system(&cols, &rhs);
            match solve(&a, &b) {
                Solve::Solution(x) => {
                    let ng = g_monos.len();
                    let np = p_monos.len();
                    let mut gm = g_monos.clone();
                    gm.extend(gauge.iter().copied());
                    let mut gc: Vec<Scalar> = x[..ng].to_vec();
                    gc.extend(x[ng + np..].iter().cloned());
                    let g = PoleFn { num: combine(&gm, &gc), exps: alpha.clone() };
                    let p = PoleFn { num: combine(&p_monos, &x[ng..ng + np]), exps: beta.clone() };
                    let residual_zero = check_decomposition(target, &g, &p, &dphi, &fac);
                    return Ok(DecomposeOutcome::Found(Decomposition { g, p, g_degree: gd, p_degree: pd, residual_zero }));
                }
                Solve::Inconsistent { cokernel } => {
                    if growth == bounds.max_growth && alpha == alphas.last().unwrap() {
                        let pairing = cokernel.iter().zip(&b).fold(Scalar::zero(), |acc, (y, v)| &acc + &(y * v));
                        last = Some(InfeasibleCertificate {
                            g_degree: gd,
                            p_degree: pd,
                            cokernel_support: cokernel.iter().filter(|v| !v.is_zero()).count(),
                            cokernel_pairing: pairing.to_string(),
                            lsq_residual: least_squares_residual(&a, &b),
                        });
                    }
                }
            }
        }
    }
    Ok(DecomposeOutcome::Infeasible(last.expect("at least one attempt")))
}

/// Checks `target − dg − p·dφ = 0` exactly after clearing denominators.
pub fn check_decomposition(target: &PoleForm, g: &PoleFn, p: &PoleFn, dphi: &PoleForm, fac: &Factors) -> bool {
    let lift: Vec<u32> = g.exps.iter().map(|&a| a + u32::from(a > 0)).collect();
    let pd = p.times_form(dphi);
    let m = max_exps(&max_exps(&target.exps, &lift), &pd.exps);
    let dg = cleared_d(&g.num, &g.exps, &m, fac);
    let lhs = target.num.mul_poly(&fac.power(&diff_exps(&m, &target.exps)));
    let rhs = &dg + &pd.num.mul_poly(&fac.power(&diff_exps(&m, &pd.exps)));
    (&lhs - &rhs).is_zero()
}

/// `(P, Q)` with `ω₁ = pG dP − qP dG + pQ dF − qF dQ`.
#[derive(Clone, Debug)]
pub struct TangentWitness {
    pub p_poly: BivarPoly,
    pub q_poly: BivarPoly,
    pub residual_zero: bool,
}

#[derive(Clone, Debug)]
pub enum TangentOutcome {
    Witness(TangentWitness),
    NotTangent { cokernel_support: usize, lsq_residual: f64 },
}

/// The tangent form built from `(P, Q)`.
pub fn tangent_form(spec: &PencilSpec, pp: &BivarPoly, qq: &BivarPoly) -> ExactOneForm {
    let (p, q) = (Scalar::from_int(spec.p as i64), Scalar::from_int(spec.q as i64));
    let a = exterior_d(pp).mul_poly(&spec.g).scale(&p);
    let b = exterior_d(&spec.g).mul_poly(pp).scale(&q);
    let c = exterior_d(&spec.f).mul_poly(qq).scale(&p);
    let d = exterior_d(qq).mul_poly(&spec.f).scale(&q);
    &(&a - &b) + &(&c - &d)
}

/// Exact membership of `ω₁` in the tangent space, `deg P ≤ deg F`,
/// `deg Q ≤ deg G`.
pub fn tangent_membership(w: &ExactOneForm, spec: &PencilSpec) -> Result<TangentOutcome> {
    let a1 = spec.f.degree().unwrap_or(0);
    let b1 = spec.g.degree().unwrap_or(0);
    if a1.max(b1) > degree_cap() {
        return Err(Error::Cap("tangent ansatz exceeds the degree cap".into()));
    }
    let pm = monomials_up_to(a1);
    let qm = monomials_up_to(b1);
    let mut cols = Vec::new();
    for &m in &pm {
        cols.push(tangent_form(spec, &BivarPoly::monomial(m, Scalar::one()), &BivarPoly::zero()));
    }
    for &m in &qm {
        cols.push(tangent_form(spec, &BivarPoly::zero(), &BivarPoly::monomial(m, Scalar::one())));
    }
    let mut all: Vec<&ExactOneForm> = cols.iter().collect();
    all.push(w);
    let asm = Assembler::new(&all);
    let (a, b) = asm.system(&cols, w);
    Ok(match solve(&a, &b) {
        Solve::Solution(x) => {
            let pp = combine(&pm, &x[..pm.len()]);
            let qq = combine(&qm, &x[pm.len()..]);
            let residual_zero = (&tangent_form(spec, &pp, &qq) - w).is_zero();
            TangentOutcome::Witness(TangentWitness { p_poly: pp, q_poly: qq, residual_zero })
        }
        Solve::Inconsistent { cokernel } => TangentOutcome::NotTangent {
            cokernel_support: cokernel.iter().filter(|v| !v.is_zero()).count(),
            lsq_residual: least_squares_residual(&a, &b),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Evidence {
    /// `critical` or `indeterminacy`.
    pub cycle: String,
    pub index: usize,
    pub level: C64,
    pub integral: Integral,
    pub vanishes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelExactReport {
    pub relatively_exact: bool,
    pub tol: f64,
    pub evidence: Vec<Evidence>,
    pub warnings: Vec<String>,
    pub assumptions: Vec<String>,
}

/// Homology assumption behind the cycle-set criterion.
pub const H1_ASSUMPTION: &str =
    "the vanishing cycles are assumed to generate the fiber homology (H1 of the complement of the fiber at infinity is assumed to vanish)";

/// Integral test: `form` over every vanishing cycle at every level and over
/// a residue cycle at every base point.
pub fn is_relatively_exact(
    form: &RationalForm,
    spec: &PencilSpec,
    levels: &[C64],
    tol: f64,
    qopts: &QuadOptions,
) -> Result<RelExactReport> {
    let fib = Fibration::new(spec);
    let data = critical_data(spec)?;
    let mut warnings = data.warnings.clone();
    if let Some(&t0) = levels.first() {
        match fiber_component_count(&fib, t0, 1) {
            Ok(n) if n > 1 => warnings.push(format!("fiber at {t0} has {n} components by the line-section heuristic; it may be disconnected")),
            Ok(_) => {}
            Err(e) => warnings.push(format!("connectivity heuristic failed: {e}")),
        }
    }
    let mut evidence = Vec::new();
    for i in 0..data.points.len() {
        let fam = vanishing_family(&fib, &data, i, levels, 96)?;
        for c in &fam {
            let integral = integrate(&fib, form, c, qopts)?;
            evidence.push(Evidence {
                cycle: "critical".into(),
                index: i,
                level: c.level,
                vanishes: integral.value.norm() <= tol + integral.error,
                integral,
            });
        }
    }
    for (i, b) in data.base_points.iter().enumerate() {
        for &t in levels {
            let c = seed_indeterminacy_cycle(&fib, b, i, t, default_residue_radius(&data, b.point), 48, &TraceOptions::default())?;
            let integral = integrate(&fib, form, &c, qopts)?;
            evidence.push(Evidence {
                cycle: "indeterminacy".into(),
                index: i,
                level: t,
                vanishes: integral.value.norm() <= tol + integral.error,
                integral,
            });
        }
    }
    Ok(RelExactReport {
        relatively_exact: evidence.iter().all(|e| e.vanishes),
        tol,
        evidence,
        warnings,
        assumptions: vec![H1_ASSUMPTION.into()],
    })
}
