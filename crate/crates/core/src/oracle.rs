//! Holonomy of the perturbed foliation computed by following leaves, and
//! Melnikov coefficients extracted from it by extrapolation in `ε`.
//!
//! The leaf of `ω_ε = A dx + B dy` through `z` is the integral curve of the
//! complex field `V = (B, −A)`. Each leg flows `dz/ds = V(z)·τ` for real
//! `s ∈ [0, 1]`, with the complex time `τ` aimed at the next guide vertex.

use ode_solvers::{Dopri5, OutputType, System, Vector4};
use rayon::prelude::*;
use serde::Serialize;

use crate::abelian::{integrate, QuadOptions, RationalForm};
use crate::error::{Error, Result};
use crate::fibration::{Cycle, Fibration};
use crate::melnikov::DeformationSpec;
use crate::numeric::{dist, NumPoly, Point, C64};

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Tube radius as a fraction of the guide diameter.
    pub tube: f64,
    pub return_iters: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { rtol: 1e-13, atol: 1e-15, tube: 0.05, return_iters: 8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomySample {
    pub t: C64,
    pub eps: f64,
    pub h: C64,
    pub steps: u64,
    pub rejected: u64,
    /// Largest leg-end distance to its guide vertex.
    pub tube_deviation: f64,
    /// `|ℓ(z − g₀)|` at the return point.
    pub return_residual: f64,
}

struct Leaf {
    a: Vec<(NumPoly, f64)>,
    b: Vec<(NumPoly, f64)>,
}

impl Leaf {
    fn new(def: &DeformationSpec, eps: f64) -> Self {
        let w0 = def.base.omega0();
        let mut a = vec![(NumPoly::from_exact(&w0.dx), 1.0)];
        let mut b = vec![(NumPoly::from_exact(&w0.dy), 1.0)];
        for (i, w) in def.forms.iter().enumerate() {
            let e = eps.powi(i as i32 + 1);
            if e != 0.0 {
                a.push((NumPoly::from_exact(&w.dx), e));
                b.push((NumPoly::from_exact(&w.dy), e));
            }
        }
        Self { a, b }
    }

    fn field(&self, z: Point) -> [C64; 2] {
        let ev = |v: &[(NumPoly, f64)]| v.iter().map(|(p, c)| p.eval(z[0], z[1]) * *c).sum::<C64>();
        [ev(&self.b), -ev(&self.a)]
    }
}

struct Leg<'a> {
    leaf: &'a Leaf,
    tau: C64,
}

fn to_point(y: &Vector4<f64>) -> Point {
    [C64::new(y[0], y[1]), C64::new(y[2], y[3])]
}

fn to_vec(z: Point) -> Vector4<f64> {
    Vector4::new(z[0].re, z[0].im, z[1].re, z[1].im)
}

impl System<f64, Vector4<f64>> for Leg<'_> {
    fn system(&self, _s: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
        let v = self.leaf.field(to_point(y));
        let (vx, vy) = (v[0] * self.tau, v[1] * self.tau);
        dy[0] = vx.re;
        dy[1] = vx.im;
        dy[2] = vy.re;
        dy[3] = vy.im;
    }
}

fn flow(leaf: &Leaf, z: Point, tau: C64, opts: &OracleOptions, stats: &mut (u64, u64)) -> Result<Point> {
    let mut solver = Dopri5::new(Leg { leaf, tau }, 0.0, 1.0, 1.0, to_vec(z), opts.rtol, opts.atol);
    solver.set_output(OutputType::Sparse);
    let st = solver
        .integrate()
        .map_err(|e| Error::Holonomy(format!("leaf integration failed: {e}")))?;
    stats.0 += st.accepted_steps as u64;
    stats.1 += st.rejected_steps as u64;
    let y = solver.y_out().last().ok_or_else(|| Error::Holonomy("no output".into()))?;
    let out = to_point(y);
    if !out[0].is_finite() || !out[1].is_finite() {
        return Err(Error::Holonomy("leaf left every bounded region".into()));
    }
    Ok(out)
}

/// Complex time `τ` with `V·τ` closest to `target − z`.
fn aim(v: [C64; 2], z: Point, target: Point) -> C64 {
    let d = [target[0] - z[0], target[1] - z[1]];
    (v[0].conj() * d[0] + v[1].conj() * d[1]) / (v[0].norm_sqr() + v[1].norm_sqr())
}

/// Return map of the leaf through the point of `Σ` with `f`-parameter `t`,
/// following `guide` once.
pub fn holonomy(def: &DeformationSpec, fib: &Fibration, guide: &Cycle, t: C64, eps: f64, opts: &OracleOptions) -> Result<HolonomySample> {
    let g0 = guide.vertices[0];
    let (_, grad) = fib.f_grad(g0);
    let gn = grad[0].norm_sqr() + grad[1].norm_sqr();
    if gn == 0.0 {
        return Err(Error::Holonomy("guide starts at a critical point".into()));
    }
    let n0 = [grad[0].conj() / gn, grad[1].conj() / gn];
    let on_sigma = |u: C64| [g0[0] + n0[0] * u, g0[1] + n0[1] * u];
    // start point: f(g₀ + u n₀) = t
    let mut u = t - guide.level;
    for _ in 0..50 {
        let z = on_sigma(u);
        let (fv, g) = fib.f_grad(z);
        let du = (fv - t) / (g[0] * n0[0] + g[1] * n0[1]);
        u -= du;
        if du.norm() <= 1e-16 * (1.0 + u.norm()) {
            break;
        }
    }
    let start = on_sigma(u);
    if (fib.f(start) - t).norm() > 1e-12 * (1.0 + t.norm()) {
        return Err(Error::Holonomy("the section does not reach the requested level".into()));
    }
    let leaf = Leaf::new(def, eps);
    let tube = opts.tube * guide.diameter();
    let mut stats = (0u64, 0u64);
    let mut z = start;
    let mut dev: f64 = 0.0;
    let n = guide.len();
    for k in 1..=n {
        let target = guide.vertices[k % n];
        let tau = aim(leaf.field(z), z, target);
        z = flow(&leaf, z, tau, opts, &mut stats)?;
        let d = dist(z, target);
        dev = dev.max(d);
        if d > tube {
            return Err(Error::Holonomy(format!("leaf left the tube (distance {d:.3e} > {tube:.3e}); ε too large")));
        }
    }
    let ell = |w: Point| (w[0] - g0[0]) * n0[1] - (w[1] - g0[1]) * n0[0];
    let mut res = ell(z).norm();
    for _ in 0..opts.return_iters {
        let v = leaf.field(z);
        let lv = v[0] * n0[1] - v[1] * n0[0];
        if lv.norm() == 0.0 {
            return Err(Error::Holonomy("leaf is tangent to the section".into()));
        }
        let dtau = -ell(z) / lv;
        z = flow(&leaf, z, dtau, opts, &mut stats)?;
        let r = ell(z).norm();
        if r >= res && r <= 1e-15 * (1.0 + norm_point(z)) {
            res = r;
            break;
        }
        res = r;
    }
    Ok(HolonomySample {
        t,
        eps,
        h: fib.f(z),
        steps: stats.0,
        rejected: stats.1,
        tube_deviation: dev,
        return_residual: res,
    })
}

fn norm_point(z: Point) -> f64 {
    (z[0].norm_sqr() + z[1].norm_sqr()).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct FdEstimate {
    pub t: C64,
    pub order: usize,
    pub value: C64,
    pub error: f64,
    pub eps: Vec<f64>,
    pub samples: Vec<HolonomySample>,
}

/// Default largest `ε`: the leaf drifts roughly `ε·∫|ω₁/s||dz|/|∇f|` per turn;
/// keep that near 5% of the guide diameter, capped at 0.1.
pub fn default_eps_max(def: &DeformationSpec, fib: &Fibration, guide: &Cycle) -> f64 {
    let w = def.scaled(1);
    let fac = crate::relexact::Factors::of(&def.base);
    let Ok(form) = w.to_rational(&fac) else { return 1e-3 };
    let c = form.compiled();
    let mut total = 0.0;
    let mut min_grad = f64::INFINITY;
    for i in 0..guide.len() {
        let (a, b) = guide.edge(i);
        let (ca, cb, _) = c.coefficients(a);
        total += (ca.norm() + cb.norm()) * dist(a, b);
        let (_, g) = fib.f_grad(a);
        min_grad = min_grad.min((g[0].norm_sqr() + g[1].norm_sqr()).sqrt());
    }
    if total == 0.0 {
        return 0.1;
    }
    (0.05 * guide.diameter() * min_grad / total).min(0.1)
}

/// Neville extrapolation to `ε = 0`; returns the value and the smallest
/// difference between consecutive orders.
fn extrapolate(eps: &[f64], d: &[C64]) -> (C64, f64) {
    let n = d.len();
    let mut table: Vec<Vec<C64>> = vec![d.to_vec()];
    let mut best = (d[n - 1], f64::INFINITY);
    for m in 1..n {
        let prev = &table[m - 1];
        let row: Vec<C64> = (0..n - m)
            .map(|i| (prev[i + 1] * eps[i] - prev[i] * eps[i + m]) / (eps[i] - eps[i + m]))
            .collect();
        for i in 0..row.len() {
            let diff = (row[i] - prev[i + 1]).norm().max((row[i] - prev[i]).norm());
            if diff < best.1 {
                best = (row[i], diff);
            }
        }
        table.push(row);
    }
    best
}

/// Estimate of `M_k(t)` from `h_ε(t) − t` on a geometric grid
/// `ε_max·ratio^j`, given lower-order values `lower = [M₁, …, M_{k−1}]`.
#[allow(clippy::too_many_arguments)]
pub fn melnikov_fd(
    def: &DeformationSpec,
    fib: &Fibration,
    guide: &Cycle,
    t: C64,
    k: usize,
    lower: &[C64],
    eps_max: Option<f64>,
    grid: usize,
    opts: &OracleOptions,
) -> Result<FdEstimate> {
    if k == 0 || grid < k + 2 {
        return Err(Error::Invalid(format!("order {k} needs a grid of at least {} values", k + 2)));
    }
    let emax = eps_max.unwrap_or_else(|| default_eps_max(def, fib, guide));
    let eps: Vec<f64> = (0..grid).map(|j| emax * 0.5f64.powi(j as i32)).collect();
    let samples: Vec<HolonomySample> = eps
        .par_iter()
        .map(|&e| holonomy(def, fib, guide, t, e, opts))
        .collect::<Result<_>>()?;
    let d: Vec<C64> = samples
        .iter()
        .map(|s| {
            let mut r = s.h - t;
            for (i, m) in lower.iter().enumerate().take(k - 1) {
                r -= m * s.eps.powi(i as i32 + 1);
            }
            r / s.eps.powi(k as i32)
        })
        .collect();
    let (value, error) = extrapolate(&eps, &d);
    if !value.is_finite() || error > 0.1 * value.norm().max(1e-6) {
        return Err(Error::Extrapolation(format!(
            "extrapolation did not settle (value {value:.6e}, spread {error:.3e})"
        )));
    }
    Ok(FdEstimate { t, order: k, value, error, eps, samples })
}

/// `M₁` in the `d log f` convention from an `f`-parameter estimate.
pub fn to_log_convention(value: C64, t: C64) -> C64 {
    value / t
}

/// Direct `−∫ ω / s` over the guide, for cross-checks.
pub fn direct_integral(fib: &Fibration, form: &RationalForm, guide: &Cycle) -> Result<C64> {
    Ok(-integrate(fib, form, guide, &QuadOptions::default())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{exterior_d, parse_poly, OneForm};
    use crate::foliation::PencilSpec;
    use crate::melnikov::cycle_family;
    use crate::numeric::ZERO;
    use std::f64::consts::PI;

    fn p(s: &str) -> crate::algebra::BivarPoly {
        parse_poly(s).unwrap()
    }

    fn vdp() -> DeformationSpec {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        DeformationSpec::new(base, vec![OneForm::new(p("(x^2 - 1)*y"), p("0"))], None).unwrap()
    }

    #[test]
    fn integrable_base_returns_identity() {
        let def = vdp();
        let t = C64::new(0.8, 0.0);
        let (fib, cyc, _) = cycle_family(&def.base, 0, &[t], 64).unwrap();
        let s = holonomy(&def, &fib, &cyc[0], t, 0.0, &OracleOptions::default()).unwrap();
        assert!((s.h - t).norm() < 1e-9, "{s:?}");
    }

    #[test]
    fn van_der_pol_first_order() {
        let def = vdp();
        let t = C64::new(1.0, 0.0);
        let (fib, cyc, _) = cycle_family(&def.base, 0, &[t], 64).unwrap();
        let est = melnikov_fd(&def, &fib, &cyc[0], t, 1, &[], None, 8, &OracleOptions::default()).unwrap();
        let want = -PI * 2.0 * (1.0 - 0.5);
        assert!((est.value.re - want).abs() < 1e-4 * want.abs(), "{est:?}");
        assert!(est.value.im.abs() < 1e-4);
    }

    #[test]
    fn exact_first_order_gives_second_coefficient() {
        let base = PencilSpec::hamiltonian(p("(x^2 + y^2)/2")).unwrap();
        let w2 = OneForm::new(p("(x^2 - 1)*y"), p("0"));
        let def = DeformationSpec::new(base, vec![exterior_d(&p("x^2*y")), w2.clone()], None).unwrap();
        let t = C64::new(1.0, 0.0);
        let (fib, cyc, _) = cycle_family(&def.base, 0, &[t], 64).unwrap();
        let m1 = melnikov_fd(&def, &fib, &cyc[0], t, 1, &[], None, 8, &OracleOptions::default()).unwrap();
        assert!(m1.value.norm() < 1e-6, "{m1:?}");
        let est = melnikov_fd(&def, &fib, &cyc[0], t, 2, &[ZERO], None, 8, &OracleOptions::default()).unwrap();
        let direct = direct_integral(&fib, &RationalForm::polynomial(w2), &cyc[0]).unwrap();
        assert!((est.value - direct).norm() < 1e-3 * direct.norm(), "{est:?} vs {direct}");
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let eps: Vec<f64> = (0..6).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        let d: Vec<C64> = eps.iter().map(|e| C64::new(2.0 + 3.0 * e - e * e, 0.0)).collect();
        let (v, err) = extrapolate(&eps, &d);
        assert!((v - 2.0).norm() < 1e-12 && err < 1e-10);
    }
}
