//! Melnikov functions of `ω₀ + εω₁ + ε²ω₂ + …` along a family of cycles,
//! the higher-order recursion through exact decompositions, and zero
//! counting on real segments.
//!
//! Conventions: `M_k(t) = −∫_{δ_t} (ω_k + Σ_{i<k} p_i ω_{k−i}) / s`, where
//! `ω₀/s = dφ` and the chain satisfies
//! `ω_i/s + p_i dφ + dg_i = −Σ_{j<i} p_j ω_{i−j}/s`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::abelian::{integrate, Integral, QuadOptions};
use crate::algebra::ExactOneForm;
use crate::error::{Error, Result};
use crate::fibration::{critical_data, vanishing_family, Cycle, Fibration};
use crate::foliation::PencilSpec;
use crate::numeric::C64;
pub use crate::relexact::Normalization;
use crate::relexact::{decompose, DecomposeOutcome, DecompositionBounds, Factors, PoleFn, PoleForm};

/// Transversal convention attached to every result.
pub const SECTION_NOTE: &str = "the transversal section is parametrized by the value of the first integral";

#[derive(Clone, Debug)]
pub struct DeformationSpec {
    pub base: PencilSpec,
    /// `ω₁, ω₂, …`; missing orders are zero.
    pub forms: Vec<ExactOneForm>,
    pub normalization: Normalization,
}

impl DeformationSpec {
    pub fn new(base: PencilSpec, forms: Vec<ExactOneForm>, normalization: Option<Normalization>) -> Result<Self> {
        if forms.is_empty() {
            return Err(Error::Invalid("a deformation needs at least ω₁".into()));
        }
        let normalization = normalization.unwrap_or_else(|| Normalization::default_for(&base));
        Ok(Self { base, forms, normalization })
    }

    pub fn form(&self, i: usize) -> ExactOneForm {
        self.forms.get(i - 1).cloned().unwrap_or_else(ExactOneForm::zero)
    }

    /// `ω_i / s`.
    pub fn scaled(&self, i: usize) -> PoleForm {
        self.normalization.divide(&self.base, &self.form(i))
    }

    /// Warnings about the simple-cycle and holonomy hypotheses.
    pub fn hypothesis_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.base.p > 1 || self.base.q > 1 {
            w.push(format!(
                "fibers {{F = 0}} and {{G = 0}} carry multiplicities {} and {}; holonomy is identity only on multiplicity-one fibers",
                self.base.p, self.base.q
            ));
        }
        w
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: C64,
    pub value: C64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainLink {
    pub order: usize,
    /// `p_i` and `g_i` as `numerator / denominator` strings.
    pub p: String,
    pub g: String,
    pub residual_zero: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MelnikovResult {
    pub order: usize,
    pub normalization: Normalization,
    pub samples: Vec<Sample>,
    pub chain: Vec<ChainLink>,
    pub zero_tol: f64,
    pub section: String,
    pub warnings: Vec<String>,
}

impl MelnikovResult {
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.value.norm()).fold(0.0, f64::max)
    }

    pub fn vanishes(&self) -> bool {
        self.samples.iter().all(|s| s.value.norm() <= self.zero_tol + s.error)
    }
}

/// Vanishing cycles of critical point `index`, transported to `levels`.
pub fn cycle_family(spec: &PencilSpec, index: usize, levels: &[C64], vertices: usize) -> Result<(Fibration, Vec<Cycle>, Vec<String>)> {
    let fib = Fibration::new(spec);
    let data = critical_data(spec)?;
    let fam = vanishing_family(&fib, &data, index, levels, vertices)?;
    Ok((fib, fam, data.warnings))
}

fn sample(fib: &Fibration, integrand: &PoleForm, fac: &Factors, cycles: &[Cycle], q: &QuadOptions) -> Result<Vec<Sample>> {
    let form = integrand.to_rational(fac)?;
    cycles
        .par_iter()
        .map(|c| {
            let Integral { value, error } = integrate(fib, &form, c, q)?;
            Ok(Sample { t: c.level, value: -value, error })
        })
        .collect()
}

fn default_zero_tol(cycles: &[Cycle]) -> f64 {
    1e-8 * cycles.iter().map(|c| 1.0 + c.level.norm()).fold(1.0, f64::max)
}

/// `M₁(t) = −∫ ω₁/s`.
pub fn first_melnikov(def: &DeformationSpec, fib: &Fibration, cycles: &[Cycle], q: &QuadOptions) -> Result<MelnikovResult> {
    let fac = Factors::of(&def.base);
    let samples = sample(fib, &def.scaled(1), &fac, cycles, q)?;
    Ok(MelnikovResult {
        order: 1,
        normalization: def.normalization,
        samples,
        chain: Vec::new(),
        zero_tol: default_zero_tol(cycles),
        section: SECTION_NOTE.into(),
        warnings: def.hypothesis_warnings(),
    })
}

/// `numerator / denominator` rendering of a [`PoleFn`].
pub fn pole_fn_string(f: &PoleFn, fac: &Factors) -> String {
    let (n, d) = f.to_rational(fac);
    if d.degree() == Some(0) {
        format!("{n}")
    } else {
        format!("({n}) / ({d})")
    }
}

/// Recursion up to `k_max`; stops at the first order whose samples do not
/// vanish and returns that order.
pub fn higher_melnikov(
    def: &DeformationSpec,
    fib: &Fibration,
    cycles: &[Cycle],
    k_max: usize,
    bounds: Option<&DecompositionBounds>,
    zero_tol: Option<f64>,
    q: &QuadOptions,
) -> Result<MelnikovResult> {
    let spec = &def.base;
    let fac = Factors::of(spec);
    let zero_tol = zero_tol.unwrap_or_else(|| default_zero_tol(cycles));
    let mut warnings = def.hypothesis_warnings();
    let data = critical_data(spec)?;
    if !data.simplicity_hypothesis {
        warnings.push("deg F + deg G ≤ 4: the recursion relies on relative exactness that may fail".into());
    }
    let mut ps: Vec<PoleFn> = Vec::new();
    let mut chain = Vec::new();
    for k in 1..=k_max.max(1) {
        let mut integrand = def.scaled(k);
        for (i, p) in ps.iter().enumerate() {
            let w = def.scaled(k - (i + 1));
            if !w.is_zero() && !p.is_zero() {
                integrand = integrand.add(&p.times_form(&w), &fac);
            }
        }
        let samples = sample(fib, &integrand, &fac, cycles, q)?;
        let vanish = samples.iter().all(|s| s.value.norm() <= zero_tol + s.error);
        if k == k_max || !vanish {
            return Ok(MelnikovResult {
                order: k,
                normalization: def.normalization,
                samples,
                chain,
                zero_tol,
                section: SECTION_NOTE.into(),
                warnings,
            });
        }
        let b = bounds.cloned().unwrap_or_else(|| DecompositionBounds::for_order(k as u32 + 1, spec));
        match decompose(&integrand, spec, def.normalization, &b)? {
            DecomposeOutcome::Found(d) => {
                if !d.residual_zero {
                    return Err(Error::Invalid("decomposition failed its exact check".into()));
                }
                let p = PoleFn { num: -&d.p.num, exps: d.p.exps.clone() };
                let g = PoleFn { num: -&d.g.num, exps: d.g.exps.clone() };
                chain.push(ChainLink {
                    order: k,
                    p: pole_fn_string(&p, &fac),
                    g: pole_fn_string(&g, &fac),
                    residual_zero: d.residual_zero,
                });
                ps.push(p);
            }
            DecomposeOutcome::Infeasible(c) => {
                return Err(Error::Infeasible(format!(
                    "M_{k} vanishes numerically but no decomposition exists with deg g ≤ {}, deg p ≤ {} \
                     (least-squares residual {:.3e}); the cycle may not be simple, the fiber may be disconnected, \
                     or the bounds are too small",
                    c.g_degree, c.p_degree, c.lsq_residual
                )));
            }
        }
    }
    unreachable!("loop returns at k_max")
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroBracket {
    pub lo: f64,
    pub hi: f64,
    /// Secant estimate of the zero.
    pub estimate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalFit {
    pub t0: f64,
    pub multiplicity: usize,
    pub coefficients: Vec<f64>,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroReport {
    pub segment: [f64; 2],
    pub zeros: Vec<ZeroBracket>,
    pub fit: Option<LocalFit>,
    pub identically_zero: bool,
    pub message: String,
    pub warnings: Vec<String>,
}

/// Sign changes of the real part of sampled `M_k` on `[a, b]`, plus an
/// optional local multiplicity fit at `t0`.
pub fn count_zeros(samples: &[Sample], segment: [f64; 2], t0: Option<f64>, zero_tol: f64, max_gap: Option<f64>) -> Result<ZeroReport> {
    let [a, b] = segment;
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t.im.abs() <= 1e-12 && s.t.re >= a - 1e-12 && s.t.re <= b + 1e-12)
        .map(|s| (s.t.re, s.value.re))
        .collect();
    pts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    if pts.len() < 2 {
        return Err(Error::Invalid("fewer than two real samples on the segment".into()));
    }
    let mut warnings = Vec::new();
    let imag = samples.iter().map(|s| s.value.im.abs()).fold(0.0, f64::max);
    let real = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if imag > 1e-6 * real.max(zero_tol) {
        warnings.push(format!("samples carry imaginary parts up to {imag:.3e}; only real parts are counted"));
    }
    let max_gap = max_gap.unwrap_or((b - a) / 4.0);
    if let Some(w) = pts.windows(2).find(|w| w[1].0 - w[0].0 > max_gap) {
        return Err(Error::Invalid(format!("samples too sparse: gap {:.3e} between {} and {}", w[1].0 - w[0].0, w[0].0, w[1].0)));
    }
    if pts.iter().all(|p| p.1.abs() <= zero_tol) {
        return Ok(ZeroReport {
            segment,
            zeros: Vec::new(),
            fit: None,
            identically_zero: true,
            message: "sampled function vanishes; defer to the next order".into(),
            warnings,
        });
    }
    let mut zeros = Vec::new();
    let sign = |v: f64| if v.abs() <= zero_tol { 0 } else if v > 0.0 { 1 } else { -1 };
    let nz: Vec<(f64, f64)> = pts.iter().copied().filter(|p| sign(p.1) != 0).collect();
    for w in nz.windows(2) {
        if sign(w[0].1) != sign(w[1].1) {
            let est = w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1);
            zeros.push(ZeroBracket { lo: w[0].0, hi: w[1].0, estimate: est });
        }
    }
    let fit = t0.map(|t0| local_fit(&pts, t0, zero_tol));
    let message = match zeros.len() {
        0 => "no sign change: no predicted fixed points of the holonomy on this segment".to_string(),
        n => format!("{n} sign change(s): a predicted fixed point of the holonomy near each zero"),
    };
    Ok(ZeroReport { segment, zeros, fit, identically_zero: false, message, warnings })
}

fn local_fit(pts: &[(f64, f64)], t0: f64, zero_tol: f64) -> LocalFit {
    let mut near: Vec<(f64, f64)> = pts.to_vec();
    near.sort_by(|x, y| (x.0 - t0).abs().partial_cmp(&(y.0 - t0).abs()).unwrap());
    let mut order = 4usize.min(near.len().saturating_sub(1));
    loop {
        let use_n = (2 * order + 3).min(near.len());
        let pts = &near[..use_n];
        let h = pts.iter().map(|p| (p.0 - t0).abs()).fold(f64::MIN_POSITIVE, f64::max);
        let a = DMatrix::from_fn(use_n, order + 1, |r, c| ((pts[r].0 - t0) / h).powi(c as i32));
        let bv = DVector::from_iterator(use_n, pts.iter().map(|p| p.1));
        let svd = a.clone().svd(true, true);
        let sv = &svd.singular_values;
        let cond = sv.max() / sv.min().max(f64::MIN_POSITIVE);
        if cond > 1e10 && order > 1 {
            order -= 1;
            continue;
        }
        let x = svd.solve(&bv, 1e-14).unwrap_or_else(|_| DVector::zeros(order + 1));
        let coefficients: Vec<f64> = x.iter().enumerate().map(|(k, c)| c / h.powi(k as i32)).collect();
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let multiplicity = x.iter().position(|c| c.abs() > 1e-6 * scale + zero_tol).unwrap_or(order + 1);
        return LocalFit { t0, multiplicity, coefficients, condition: cond };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{exterior_d, parse_poly, OneForm};
    use std::f64::consts::PI;

    fn p(s: &str) -> crate::algebra::BivarPoly {
        parse_poly(s).unwrap()
    }

    fn vdp() -> DeformationSpec {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        DeformationSpec::new(base, vec![OneForm::new(p("(x^2 - 1)*y"), p("0"))], None).unwrap()
    }

    fn real_levels(a: f64, b: f64, n: usize) -> Vec<C64> {
        (0..n).map(|i| C64::new(a + (b - a) * i as f64 / (n - 1) as f64, 0.0)).collect()
    }

    #[test]
    fn van_der_pol_closed_form() {
        let def = vdp();
        let levels = real_levels(0.1, 2.5, 8);
        let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 96).unwrap();
        let m = first_melnikov(&def, &fib, &cycles, &QuadOptions::default()).unwrap();
        for s in &m.samples {
            let r2 = 2.0 * s.t.re;
            let want = -PI * r2 * (1.0 - r2 / 4.0);
            assert!((s.value - want).norm() <= 1e-9 * want.abs().max(1e-3), "{s:?} vs {want}");
        }
        let rep = count_zeros(&m.samples, [0.1, 2.5], Some(2.0), m.zero_tol, None).unwrap();
        assert_eq!(rep.zeros.len(), 1);
        assert!(rep.zeros[0].lo < 2.0 && rep.zeros[0].hi > 2.0);
    }

    #[test]
    fn exact_perturbation_gives_second_order() {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        let w1 = exterior_d(&p("x^3*y - x*y"));
        let w2 = OneForm::new(p("(x^2 - 1)*y"), p("x*y^2"));
        let def = DeformationSpec::new(base, vec![w1, w2.clone()], None).unwrap();
        let levels = real_levels(0.3, 1.5, 4);
        let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 96).unwrap();
        let m = higher_melnikov(&def, &fib, &cycles, 3, None, None, &QuadOptions::default()).unwrap();
        assert_eq!(m.order, 2);
        assert_eq!(m.chain.len(), 1);
        assert_eq!(m.chain[0].p, "0");
        let direct = crate::abelian::RationalForm::polynomial(w2);
        for (s, c) in m.samples.iter().zip(&cycles) {
            let v = integrate(&fib, &direct, c, &QuadOptions::default()).unwrap().value;
            assert!((s.value + v).norm() < 1e-11);
        }
    }

    #[test]
    fn exact_chain_reaches_third_order() {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        let def = DeformationSpec::new(
            base,
            vec![exterior_d(&p("x*y^2")), exterior_d(&p("x^2*y")), OneForm::new(p("y"), p("0"))],
            None,
        )
        .unwrap();
        let levels = real_levels(0.5, 1.0, 3);
        let (fib, cycles, _) = cycle_family(&def.base, 0, &levels, 64).unwrap();
        let m = higher_melnikov(&def, &fib, &cycles, 4, None, None, &QuadOptions::default()).unwrap();
        assert_eq!(m.order, 3);
        // −∮ y dx over the ccw circle of radius² 2t is 2πt
        for s in &m.samples {
            assert!((s.value - C64::new(2.0 * PI * s.t.re, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn normalizations_share_zero_sets() {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        let w = vec![OneForm::new(p("(x^2 - 1)*y"), p("0"))];
        let levels = real_levels(0.5, 2.5, 9);
        let (fib, cycles, _) = cycle_family(&base, 0, &levels, 96).unwrap();
        let a = first_melnikov(&DeformationSpec::new(base.clone(), w.clone(), Some(Normalization::Df)).unwrap(), &fib, &cycles, &QuadOptions::default()).unwrap();
        let b = first_melnikov(&DeformationSpec::new(base, w, Some(Normalization::Dlogf)).unwrap(), &fib, &cycles, &QuadOptions::default()).unwrap();
        // d log f = df / f, so on the fiber the dlogf integrand is the df one over t
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((y.value * x.t - x.value).norm() < 1e-10);
        }
        let za = count_zeros(&a.samples, [0.5, 2.5], None, a.zero_tol, None).unwrap();
        let zb = count_zeros(&b.samples, [0.5, 2.5], None, b.zero_tol, None).unwrap();
        assert_eq!(za.zeros.len(), zb.zeros.len());
    }

    #[test]
    fn zero_count_edge_cases() {
        let mk = |vals: &[(f64, f64)]| vals.iter().map(|&(t, v)| Sample { t: C64::new(t, 0.0), value: C64::new(v, 0.0), error: 0.0 }).collect::<Vec<_>>();
        let flat = mk(&[(0.0, 0.0), (0.5, 1e-12), (1.0, 0.0)]);
        assert!(count_zeros(&flat, [0.0, 1.0], None, 1e-8, Some(1.0)).unwrap().identically_zero);
        let pos = mk(&[(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)]);
        assert!(count_zeros(&pos, [0.0, 1.0], None, 1e-8, Some(1.0)).unwrap().zeros.is_empty());
        let sparse = mk(&[(0.0, 1.0), (1.0, -1.0)]);
        assert!(count_zeros(&sparse, [0.0, 1.0], None, 1e-8, None).is_err());
        // (t - 1)^2 (t + 1) has a double zero at 1
        let pts: Vec<(f64, f64)> = (0..21).map(|i| {
            let t = 0.5 + i as f64 * 0.05;
            (t, (t - 1.0).powi(2) * (t + 1.0))
        }).collect();
        let rep = count_zeros(&mk(&pts), [0.5, 1.5], Some(1.0), 1e-12, None).unwrap();
        assert_eq!(rep.fit.unwrap().multiplicity, 2);
    }
}
