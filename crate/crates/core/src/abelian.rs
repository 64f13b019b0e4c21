//! Integrals of rational 1-forms over polyline cycles lying on a fiber.
//!
//! Each edge is parametrized linearly in the coordinate that moves most;
//! the other coordinate is solved on the fiber at every Gauss node, so the
//! integrand is always evaluated on the leaf. Pieces are bisected until the
//! 8-point rule on a piece agrees with the sum over its halves.

use std::cell::Cell;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{monomials_up_to, parse_poly, BivarPoly, ExactOneForm, Mono, OneForm};
use crate::error::{Error, Result};
use crate::fibration::{seed_indeterminacy_cycle, CriticalData, Cycle, Fibration, TraceOptions};
use crate::numeric::{dist, NumForm, Point, C64, ZERO};

const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// `num / den`.
#[derive(Clone, Debug)]
pub struct RationalForm {
    pub num: ExactOneForm,
    pub den: BivarPoly,
    compiled: NumForm,
}

impl RationalForm {
    pub fn new(num: ExactOneForm, den: BivarPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Invalid("zero denominator".into()));
        }
        let compiled = NumForm::from_exact(&num, Some(&den));
        Ok(Self { num, den, compiled })
    }

    pub fn polynomial(num: ExactOneForm) -> Self {
        Self::new(num, BivarPoly::one()).expect("one is nonzero")
    }

    /// `"A, B"` or `"A, B, D"` for `(A dx + B dy)/D`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 2 && parts.len() != 3 {
            return Err(Error::Invalid(format!("form `{text}` must be `A,B` or `A,B,D`")));
        }
        let a = parse_poly(parts[0])?;
        let b = parse_poly(parts[1])?;
        let d = match parts.get(2) {
            Some(s) => parse_poly(s)?,
            None => BivarPoly::one(),
        };
        Self::new(OneForm::new(a, b), d)
    }

    pub fn compiled(&self) -> &NumForm {
        &self.compiled
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Integral {
    pub value: C64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
    /// Pole tolerance as a fraction of the cycle diameter.
    pub pole_rel: f64,
    /// Fail when the total error estimate exceeds this.
    pub fail_tol: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-13, max_depth: 24, pole_rel: 1e-6, fail_tol: 1e-6 }
    }
}

/// Adaptive pieces allowed per cycle edge.
const EDGE_BUDGET: usize = 2048;

struct Ctx<'a> {
    fib: &'a Fibration,
    forms: &'a [&'a NumForm],
    t: C64,
    pole_tol: f64,
}

enum PieceErr {
    Branch,
    Fatal(Error),
}

impl Ctx<'_> {
    /// 8-point rule on the piece from `a` to `b`, both on the fiber.
    fn rule(&self, a: Point, b: Point) -> std::result::Result<Vec<C64>, PieceErr> {
        let (k, j) = if (b[0] - a[0]).norm() >= (b[1] - a[1]).norm() { (0, 1) } else { (1, 0) };
        let dk = b[k] - a[k];
        let slope = |z: Point| {
            let (_, g, _) = self.fib.phi(z, self.t);
            -g[k] / g[j]
        };
        let (sa, sb) = (slope(a), slope(b));
        let dj = b[j] - a[j];
        let chord = dist(a, b);
        let mut acc = vec![ZERO; self.forms.len()];
        for (idx, &x) in GL_X.iter().enumerate() {
            for sign in [-1.0, 1.0] {
                let u = 0.5 + 0.5 * sign * x;
                let w = 0.5 * GL_W[idx];
                // cubic Hermite guess for the dependent coordinate
                let (h00, h10, h01, h11) = (
                    2.0 * u.powi(3) - 3.0 * u * u + 1.0,
                    u.powi(3) - 2.0 * u * u + u,
                    -2.0 * u.powi(3) + 3.0 * u * u,
                    u.powi(3) - u * u,
                );
                let guess = a[j] * h00 + sa * dk * h10 + (a[j] + dj) * h01 + sb * dk * h11;
                let mut z = [ZERO; 2];
                z[k] = a[k] + dk * u;
                z[j] = guess;
                let mut ok = false;
                let mut prev = f64::INFINITY;
                for it in 0..30 {
                    let (v, g, _) = self.fib.phi(z, self.t);
                    if g[j].norm() == 0.0 || !v.is_finite() {
                        break;
                    }
                    let st = v / g[j];
                    z[j] -= st;
                    let sn = st.norm();
                    let scale = 1.0 + z[j].norm();
                    // stalled at the rounding floor of Φ
                    if sn <= 1e-15 * scale || (it >= 2 && sn >= 0.5 * prev && sn <= 1e-10 * scale) {
                        ok = true;
                        break;
                    }
                    prev = sn;
                }
                let lin = a[j] + dj * u;
                if !ok || (z[j] - guess).norm() > 0.25 * chord || (z[j] - lin).norm() > chord {
                    return Err(PieceErr::Branch);
                }
                let dzj = slope(z);
                for (f, out) in self.forms.iter().zip(acc.iter_mut()) {
                    let (aa, bb, dabs) = f.coefficients(z);
                    if dabs < self.pole_tol {
                        return Err(PieceErr::Fatal(Error::PoleProximity { value: dabs, tol: self.pole_tol }));
                    }
                    let (cx, cy) = if k == 0 { (aa, bb) } else { (bb, aa) };
                    *out += (cx + cy * dzj) * dk * w;
                }
            }
        }
        Ok(acc)
    }

    /// Distance of `z` from the fiber to first order.
    fn offset(&self, z: Point) -> f64 {
        let (v, g, _) = self.fib.phi(z, self.t);
        let gn = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        if gn > 0.0 { v.norm() / gn } else { 0.0 }
    }

    fn midpoint(&self, a: Point, b: Point) -> std::result::Result<Point, PieceErr> {
        let m = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        match self.fib.project(m, self.t, 40) {
            Some((z, moved)) if moved <= dist(a, b) => Ok(z),
            _ => Err(PieceErr::Fatal(Error::Tracing("chord midpoint did not project onto the fiber".into()))),
        }
    }

    /// Adaptive integral over one edge: values and summed error estimate.
    fn edge(&self, a: Point, b: Point, tol: &[f64], depth_left: usize, budget: &Cell<usize>) -> Result<(Vec<C64>, f64)> {
        if budget.get() == 0 {
            return Err(Error::Quadrature { error: f64::INFINITY, tol: tol[0] });
        }
        budget.set(budget.get() - 1);
        let whole = self.rule(a, b);
        let m = self.midpoint(a, b).map_err(|e| match e {
            PieceErr::Fatal(e) => e,
            PieceErr::Branch => unreachable!(),
        })?;
        let chord = dist(a, b).max(f64::MIN_POSITIVE);
        let slack = self.offset(a) + self.offset(m) + self.offset(b);
        let left = self.rule(a, m);
        let right = self.rule(m, b);
        let split = |s: &Self, tol: &[f64]| -> Result<(Vec<C64>, f64)> {
            if depth_left == 0 {
                return Err(Error::Quadrature { error: f64::INFINITY, tol: tol[0] });
            }
            let half: Vec<f64> = tol.iter().map(|v| v * 0.5).collect();
            let (l, el) = s.edge(a, m, &half, depth_left - 1, budget)?;
            let (r, er) = s.edge(m, b, &half, depth_left - 1, budget)?;
            Ok((l.iter().zip(&r).map(|(x, y)| x + y).collect(), el + er))
        };
        match (whole, left, right) {
            (Err(PieceErr::Fatal(e)), _, _) | (_, Err(PieceErr::Fatal(e)), _) | (_, _, Err(PieceErr::Fatal(e))) => Err(e),
            (Ok(w), Ok(l), Ok(r)) => {
                let halves: Vec<C64> = l.iter().zip(&r).map(|(x, y)| x + y).collect();
                let mut err: f64 = 0.0;
                let mut good = true;
                for i in 0..w.len() {
                    let e = (w[i] - halves[i]).norm();
                    err = err.max(e);
                    // endpoints sit on the fiber only up to rounding; no subdivision resolves below that
                    let floor = 128.0 * f64::EPSILON * (l[i].norm() + r[i].norm()) + 4.0 * (l[i].norm() + r[i].norm()) / chord * slack;
                    if e > tol[i].max(floor) {
                        good = false;
                    }
                }
                if good || depth_left == 0 {
                    Ok((halves, err))
                } else {
                    split(self, tol)
                }
            }
            _ => split(self, tol),
        }
    }
}

/// Integrals of several forms over one cycle, sharing quadrature nodes.
pub fn integrate_many(fib: &Fibration, forms: &[&RationalForm], cycle: &Cycle, opts: &QuadOptions) -> Result<Vec<Integral>> {
    let compiled: Vec<&NumForm> = forms.iter().map(|f| f.compiled()).collect();
    let ctx = Ctx { fib, forms: &compiled, t: cycle.level, pole_tol: opts.pole_rel * cycle.diameter() };
    let n = cycle.len();
    let per = cycle.perimeter().max(f64::MIN_POSITIVE);
    // magnitude scale from a first non-adaptive pass
    let coarse: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = cycle.edge(i);
            ctx.rule(a, b).unwrap_or_else(|_| vec![ZERO; compiled.len()])
        })
        .collect();
    let mut mag = vec![0.0f64; compiled.len()];
    for row in &coarse {
        for (m, v) in mag.iter_mut().zip(row) {
            *m += v.norm();
        }
    }
    let edges: Vec<Result<(Vec<C64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = cycle.edge(i);
            let frac = dist(a, b) / per;
            let tol: Vec<f64> = mag.iter().map(|m| frac * opts.abs_tol.max(opts.rel_tol * m)).collect();
            ctx.edge(a, b, &tol, opts.max_depth, &Cell::new(EDGE_BUDGET))
        })
        .collect();
    let mut total = vec![ZERO; compiled.len()];
    let mut err = 0.0;
    for e in edges {
        let (v, er) = e?;
        for (t, x) in total.iter_mut().zip(&v) {
            *t += x;
        }
        err += er;
    }
    let out: Vec<Integral> = total
        .iter()
        .zip(&mag)
        .map(|(&value, &m)| Integral { value, error: err + 64.0 * f64::EPSILON * m })
        .collect();
    if let Some(bad) = out.iter().find(|i| i.error > opts.fail_tol) {
        return Err(Error::Quadrature { error: bad.error, tol: opts.fail_tol });
    }
    Ok(out)
}

pub fn integrate(fib: &Fibration, form: &RationalForm, cycle: &Cycle, opts: &QuadOptions) -> Result<Integral> {
    Ok(integrate_many(fib, &[form], cycle, opts)?[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodVector {
    pub bound: u32,
    /// Basis labels such as `x^1 y^0 dy`, in the order of `values`.
    pub labels: Vec<String>,
    pub values: Vec<Integral>,
}

impl PeriodVector {
    pub fn get(&self, label: &str) -> Option<Integral> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i])
    }

    /// Largest entrywise difference to another vector of the same basis.
    pub fn max_difference(&self, other: &PeriodVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a.value - b.value).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.value.norm()).fold(0.0, f64::max)
    }
}

pub fn period_label(m: Mono, dy: bool) -> String {
    format!("x^{} y^{} {}", m.x, m.y, if dy { "dy" } else { "dx" })
}

/// Integrals of `x^i y^j dx` then `x^i y^j dy` for `i + j ≤ bound`.
pub fn periods(fib: &Fibration, cycle: &Cycle, bound: u32, opts: &QuadOptions) -> Result<PeriodVector> {
    let monos = monomials_up_to(bound);
    let mut forms = Vec::new();
    let mut labels = Vec::new();
    for dy in [false, true] {
        for &m in &monos {
            let p = BivarPoly::monomial(m, 1.into());
            let w = if dy { OneForm::new(BivarPoly::zero(), p) } else { OneForm::new(p, BivarPoly::zero()) };
            forms.push(RationalForm::polynomial(w));
            labels.push(period_label(m, dy));
        }
    }
    let refs: Vec<&RationalForm> = forms.iter().collect();
    let values = integrate_many(fib, &refs, cycle, opts)?;
    Ok(PeriodVector { bound, labels, values })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueReport {
    pub point: [f64; 4],
    pub integral: Integral,
    pub vanishes: bool,
    pub tol: f64,
}

/// Radius for residue cycles: 5% of the distance from `q` to the nearest
/// other base or critical point, at most 0.05.
pub fn default_residue_radius(data: &CriticalData, q: Point) -> f64 {
    let others = data
        .base_points
        .iter()
        .map(|b| b.point)
        .chain(data.points.iter().map(|c| c.point))
        .map(|p| dist(p, q))
        .filter(|&d| d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    if others.is_finite() { (0.05 * others).min(0.05) } else { 0.05 }
}

/// Integrates `form` over a residue cycle at every base point.
pub fn residue_vanishing(
    fib: &Fibration,
    data: &CriticalData,
    form: &RationalForm,
    t: C64,
    tol: f64,
    opts: &QuadOptions,
) -> Result<Vec<ResidueReport>> {
    let topts = TraceOptions::default();
    let mut out = Vec::new();
    for (i, b) in data.base_points.iter().enumerate() {
        let r = default_residue_radius(data, b.point);
        let c = seed_indeterminacy_cycle(fib, b, i, t, r, 48, &topts)?;
        let integral = integrate(fib, form, &c, opts)?;
        out.push(ResidueReport {
            point: crate::fibration::point_to_array(b.point),
            integral,
            vanishes: integral.value.norm() <= tol + integral.error,
            tol,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::{critical_data, seed_vanishing_cycle};
    use crate::foliation::PencilSpec;
    use std::f64::consts::PI;

    fn ham(s: &str) -> PencilSpec {
        PencilSpec::hamiltonian(parse_poly(s).unwrap()).unwrap()
    }

    fn xy_cycle(t: C64) -> (Fibration, Cycle) {
        let spec = ham("x*y");
        let fib = Fibration::new(&spec);
        let d = critical_data(&spec).unwrap();
        let c = seed_vanishing_cycle(&fib, &d.points[0], 0, t, 64, &TraceOptions::default()).unwrap();
        (fib, c)
    }

    #[test]
    fn xy_periods_match_closed_form() {
        let t = C64::new(0.4, 0.2);
        let (fib, c) = xy_cycle(t);
        let pv = periods(&fib, &c, 1, &QuadOptions::default()).unwrap();
        let want = C64::new(0.0, -2.0 * PI) * t;
        assert!((pv.get("x^1 y^0 dy").unwrap().value - want).norm() < 1e-12);
        assert!((pv.get("x^0 y^1 dx").unwrap().value + want).norm() < 1e-12);
        assert!(pv.get("x^0 y^0 dx").unwrap().value.norm() < 1e-13);
        assert!(pv.get("x^0 y^0 dy").unwrap().value.norm() < 1e-13);
    }

    #[test]
    fn exact_forms_vanish_and_reversal_negates() {
        let (fib, c) = xy_cycle(C64::new(0.7, 0.0));
        let g = parse_poly("x^3*y - 2*x*y^2 + y^4 + 3*x").unwrap();
        let exact = RationalForm::polynomial(crate::algebra::exterior_d(&g));
        let v = integrate(&fib, &exact, &c, &QuadOptions::default()).unwrap();
        assert!(v.value.norm() < 1e-12, "{v:?}");
        let w = RationalForm::parse("x^2*y, x - y^3").unwrap();
        let a = integrate(&fib, &w, &c, &QuadOptions::default()).unwrap();
        let b = integrate(&fib, &w, &c.reversed(), &QuadOptions::default()).unwrap();
        assert!((a.value + b.value).norm() < 1e-13);
    }

    #[test]
    fn residue_of_local_model() {
        // f = x/y; the residue cycle around the origin, form dx/x
        let spec = PencilSpec::new(parse_poly("x").unwrap(), parse_poly("y").unwrap(), 1, 1).unwrap();
        let fib = Fibration::new(&spec);
        let d = critical_data(&spec).unwrap();
        assert_eq!(d.base_points.len(), 1);
        let t = C64::new(1.5, 0.5);
        let form = RationalForm::parse("1, 0, x").unwrap();
        let rep = residue_vanishing(&fib, &d, &form, t, 1e-8, &QuadOptions::default()).unwrap();
        assert!((rep[0].integral.value - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
        assert!(!rep[0].vanishes);
        let poly = RationalForm::parse("y^2, x*y").unwrap();
        let rep = residue_vanishing(&fib, &d, &poly, t, 1e-8, &QuadOptions::default()).unwrap();
        assert!(rep[0].vanishes);
    }

    #[test]
    fn pole_on_cycle_is_reported() {
        let (fib, c) = xy_cycle(C64::new(0.25, 0.0));
        let v = c.vertices[0];
        // denominator vanishing at a vertex
        let den = format!("x - ({}) - ({})*i", v[0].re, v[0].im);
        let form = RationalForm::parse(&format!("1, 0, {den}")).unwrap();
        let r = integrate(&fib, &form, &c, &QuadOptions::default());
        assert!(matches!(r, Err(Error::PoleProximity { .. }) | Err(Error::Quadrature { .. })), "{r:?}");
    }

    #[test]
    fn vertex_doubling_is_stable() {
        let spec = ham("x^3 - 3*x + y^2");
        let fib = Fibration::new(&spec);
        let d = critical_data(&spec).unwrap();
        let fam = crate::fibration::vanishing_family(&fib, &d, 1, &[C64::new(-1.0, 0.3)], 64).unwrap();
        let c = &fam[0];
        let mut dense = c.clone();
        dense.vertices = Vec::new();
        for i in 0..c.len() {
            let (a, b) = c.edge(i);
            dense.vertices.push(a);
            let m = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
            dense.vertices.push(fib.project(m, c.level, 40).unwrap().0);
        }
        let p1 = periods(&fib, c, 3, &QuadOptions::default()).unwrap();
        let p2 = periods(&fib, &dense, 3, &QuadOptions::default()).unwrap();
        assert!(p1.max_difference(&p2) < 1e-10);
        assert!(p1.max_abs() > 1e-3);
    }
}
