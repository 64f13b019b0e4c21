//! Numerical Picard-Lefschetz layer: critical data of `f = F^p/G^q`,
//! vanishing and indeterminacy cycles as polylines on fibers, and their
//! transport along paths of levels.
//!
//! Fibers are handled through the polynomial `Φ_t = F^p - t·G^q`, so Newton
//! steps never divide by `G`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::system::{solve_system, SystemOptions};
use crate::algebra::univariate::complex_roots;
use crate::algebra::{exterior_d, BivarPoly, Mono, Poly};
use crate::error::{Error, Result};
use crate::foliation::PencilSpec;
use crate::numeric::{dist, norm2, NumPoly, Point, C64, ZERO};

/// Compiled evaluator for `f`, `Φ_t` and their gradients.
#[derive(Clone, Debug)]
pub struct Fibration {
    pub spec: PencilSpec,
    fpow: NumPoly,
    gpow: NumPoly,
}

impl Fibration {
    pub fn new(spec: &PencilSpec) -> Self {
        Self {
            spec: spec.clone(),
            fpow: NumPoly::from_exact(&spec.f.pow(spec.p)),
            gpow: NumPoly::from_exact(&spec.g.pow(spec.q)),
        }
    }

    pub fn f(&self, z: Point) -> C64 {
        self.fpow.eval(z[0], z[1]) / self.gpow.eval(z[0], z[1])
    }

    /// `f` and `∇f`.
    pub fn f_grad(&self, z: Point) -> (C64, [C64; 2]) {
        let (a, ga) = self.fpow.eval_grad(z[0], z[1]);
        let (b, gb) = self.gpow.eval_grad(z[0], z[1]);
        let f = a / b;
        (f, [(ga[0] - f * gb[0]) / b, (ga[1] - f * gb[1]) / b])
    }

    /// `G^q` at `z`.
    pub fn gq(&self, z: Point) -> C64 {
        self.gpow.eval(z[0], z[1])
    }

    /// `Φ_t(z)`, `∇Φ_t(z)` and `G^q(z)`.
    pub fn phi(&self, z: Point, t: C64) -> (C64, [C64; 2], C64) {
        let (a, ga) = self.fpow.eval_grad(z[0], z[1]);
        let (b, gb) = self.gpow.eval_grad(z[0], z[1]);
        (a - t * b, [ga[0] - t * gb[0], ga[1] - t * gb[1]], b)
    }

    /// Scale for `|Φ_t|` at `z`: `Σ|c||z^m|` over both terms.
    fn phi_scale(&self, z: Point, t: C64) -> f64 {
        self.fpow.abs_eval(z[0], z[1]) + t.norm() * self.gpow.abs_eval(z[0], z[1])
    }

    /// `|f(z) - t| / max(1, |t|)`.
    pub fn residual(&self, z: Point, t: C64) -> f64 {
        (self.f(z) - t).norm() / t.norm().max(1.0)
    }

    /// Minimal-norm Newton projection onto `{Φ_t = 0}`; returns the point
    /// and the total displacement.
    pub fn project(&self, z0: Point, t: C64, iters: usize) -> Option<(Point, f64)> {
        let mut z = z0;
        for _ in 0..iters {
            let (v, g, _) = self.phi(z, t);
            let scale = self.phi_scale(z, t).max(f64::MIN_POSITIVE);
            let gn = g[0].norm_sqr() + g[1].norm_sqr();
            if !v.is_finite() || gn == 0.0 {
                return None;
            }
            if v.norm() <= 4.0 * f64::EPSILON * scale {
                return Some((z, dist(z, z0)));
            }
            let step = [v * g[0].conj() / gn, v * g[1].conj() / gn];
            z = [z[0] - step[0], z[1] - step[1]];
            if norm2(step) <= 1e-15 * (1.0 + norm2(z)) {
                let (v, _, _) = self.phi(z, t);
                return (v.norm() <= 1e-10 * scale).then(|| (z, dist(z, z0)));
            }
        }
        let (v, _, _) = self.phi(z, t);
        (v.norm() <= 1e-11 * self.phi_scale(z, t)).then(|| (z, dist(z, z0)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub point: Point,
    pub value: C64,
    pub hessian: [[C64; 2]; 2],
    pub nondegenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasePoint {
    pub point: Point,
    /// `det(∂(F, G)/∂(x, y))` at the point.
    pub jacobian: C64,
    pub transversal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalData {
    pub points: Vec<CriticalPoint>,
    pub base_points: Vec<BasePoint>,
    pub distinct_values: bool,
    /// `deg F + deg G > 4`.
    pub simplicity_hypothesis: bool,
    pub warnings: Vec<String>,
}

impl CriticalData {
    pub fn values(&self) -> Vec<C64> {
        self.points.iter().map(|c| c.value).collect()
    }

    /// Values the fibration degenerates over, other than `∞`.
    pub fn atypical_values(&self, spec: &PencilSpec) -> Vec<C64> {
        let mut v = self.values();
        if !spec.is_hamiltonian() {
            v.push(ZERO);
        }
        v
    }

    /// Default safety margin: 5% of the minimal distance between atypical
    /// values (or 5% of their scale when there is only one).
    pub fn default_margin(&self, spec: &PencilSpec) -> f64 {
        let v = self.atypical_values(spec);
        let mut best = f64::INFINITY;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = (v[i] - v[j]).norm();
                if d > 1e-12 {
                    best = best.min(d);
                }
            }
        }
        if best.is_finite() {
            0.05 * best
        } else {
            0.05 * v.iter().map(|c| c.norm()).fold(1.0, f64::max)
        }
    }
}

fn smooth_curve_check(f: &BivarPoly, name: &str, warnings: &mut Vec<String>) {
    match solve_system(&f.diff_x(), &f.diff_y(), &SystemOptions::default()) {
        Ok(roots) => {
            let nf = NumPoly::from_exact(f);
            if roots.iter().any(|r| crate::algebra::system::relative_residual(&nf, r.point) <= 1e-9) {
                warnings.push(format!("{{{name} = 0}} is singular"));
            }
        }
        Err(_) => {
            if f.degree().unwrap_or(0) >= 2 {
                warnings.push(format!("smoothness of {{{name} = 0}} not checked (non-isolated gradient zeros)"));
            }
        }
    }
}

/// Critical points of `f` off `{FG = 0}`, base points, and genericity flags.
pub fn critical_data(spec: &PencilSpec) -> Result<CriticalData> {
    let w = spec.omega0();
    let roots = solve_system(&w.dx, &w.dy, &SystemOptions::default())?;
    let nf = NumPoly::from_exact(&spec.f);
    let ng = NumPoly::from_exact(&spec.g);
    let ha = [NumPoly::from_exact(&w.dx.diff_x()), NumPoly::from_exact(&w.dx.diff_y())];
    let hb = [NumPoly::from_exact(&w.dy.diff_x()), NumPoly::from_exact(&w.dy.diff_y())];
    let mut points = Vec::new();
    let mut warnings = spec.warnings.clone();
    for r in &roots {
        let z = r.point;
        let on_f = !spec.is_hamiltonian() && crate::algebra::system::relative_residual(&nf, z) <= 1e-9;
        let on_g = !spec.is_hamiltonian() && crate::algebra::system::relative_residual(&ng, z) <= 1e-9;
        if on_f || on_g {
            continue;
        }
        let fv = nf.eval(z[0], z[1]);
        let gv = ng.eval(z[0], z[1]);
        // d f = F^{p-1} G^{-q-1} ω_0 and ω_0(z) = 0
        let factor = fv.powu(spec.p - 1) / gv.powu(spec.q + 1);
        let j = [
            [ha[0].eval(z[0], z[1]), ha[1].eval(z[0], z[1])],
            [hb[0].eval(z[0], z[1]), hb[1].eval(z[0], z[1])],
        ];
        let h = [[j[0][0] * factor, j[0][1] * factor], [j[1][0] * factor, j[1][1] * factor]];
        let scale = h.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let nondegenerate = scale > 0.0 && det.norm() > 1e-8 * scale * scale;
        if !nondegenerate {
            warnings.push(format!("degenerate critical point at ({:.6}, {:.6})", z[0], z[1]));
        }
        points.push(CriticalPoint { point: z, value: spec.eval_f(z), hessian: h, nondegenerate });
    }
    let mut base_points = Vec::new();
    if !spec.is_hamiltonian() {
        let gf = exterior_d(&spec.f);
        let gg = exterior_d(&spec.g);
        let jac = NumPoly::from_exact(&(&(&gf.dx * &gg.dy) - &(&gf.dy * &gg.dx)));
        for r in solve_system(&spec.f, &spec.g, &SystemOptions::default())? {
            let jv = jac.eval(r.point[0], r.point[1]);
            let scale = NumPoly::from_exact(&gf.dx).eval(r.point[0], r.point[1]).norm()
                + NumPoly::from_exact(&gf.dy).eval(r.point[0], r.point[1]).norm();
            let scale2 = NumPoly::from_exact(&gg.dx).eval(r.point[0], r.point[1]).norm()
                + NumPoly::from_exact(&gg.dy).eval(r.point[0], r.point[1]).norm();
            let transversal = jv.norm() > 1e-8 * scale * scale2;
            if !transversal {
                warnings.push(format!("non-transversal base point at ({:.6}, {:.6})", r.point[0], r.point[1]));
            }
            base_points.push(BasePoint { point: r.point, jacobian: jv, transversal });
        }
        smooth_curve_check(&spec.f, "F", &mut warnings);
        smooth_curve_check(&spec.g, "G", &mut warnings);
    }
    let vals: Vec<C64> = points.iter().map(|c| c.value).collect();
    let scale = vals.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mut distinct_values = true;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            if (vals[i] - vals[j]).norm() <= 1e-9 * scale {
                distinct_values = false;
            }
        }
    }
    if !distinct_values {
        warnings.push("critical values are not pairwise distinct".into());
    }
    let dsum = spec.f.degree().unwrap() + if spec.is_hamiltonian() { 0 } else { spec.g.degree().unwrap() };
    let simplicity_hypothesis = dsum > 4;
    if !simplicity_hypothesis {
        warnings.push(format!(
            "deg F + deg G = {dsum} ≤ 4: vanishing cycles are not known to be simple"
        ));
    }
    Ok(CriticalData { points, base_points, distinct_values, simplicity_hypothesis, warnings })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    /// `critical`, `indeterminacy` or `file`.
    pub kind: String,
    pub index: Option<usize>,
    /// Seed point as `[xre, xim, yre, yim]`.
    pub point: Option<[f64; 4]>,
    /// Levels visited, as `[re, im]` pairs.
    pub path: Vec<[f64; 2]>,
}

/// Closed polyline on `{f = level}`; the closing edge is implicit.
#[derive(Clone, Debug)]
pub struct Cycle {
    pub level: C64,
    pub vertices: Vec<Point>,
    pub orientation: String,
    pub provenance: Provenance,
}

pub fn point_to_array(z: Point) -> [f64; 4] {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

pub fn array_to_point(a: [f64; 4]) -> Point {
    [C64::new(a[0], a[1]), C64::new(a[2], a[3])]
}

#[derive(Serialize, Deserialize)]
struct CycleFile {
    level: [f64; 2],
    vertices: Vec<[f64; 4]>,
    orientation: String,
    provenance: Provenance,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[(i + 1) % self.vertices.len()])
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len()).map(|i| {
            let (a, b) = self.edge(i);
            dist(a, b)
        }).sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        let step = (self.len() / 64).max(1);
        for i in (0..self.len()).step_by(step) {
            for j in (0..self.len()).step_by(step) {
                d = d.max(dist(self.vertices[i], self.vertices[j]));
            }
        }
        d
    }

    pub fn reversed(&self) -> Cycle {
        let mut c = self.clone();
        c.vertices.reverse();
        c.orientation = if self.orientation.ends_with("-reversed") {
            self.orientation.trim_end_matches("-reversed").to_string()
        } else {
            format!("{}-reversed", self.orientation)
        };
        c
    }

    pub fn max_residual(&self, fib: &Fibration) -> f64 {
        self.vertices.iter().map(|&z| fib.residual(z, self.level)).fold(0.0, f64::max)
    }

    /// JSON with the closing vertex repeated at the end.
    pub fn to_json(&self) -> String {
        let mut vertices: Vec<[f64; 4]> = self.vertices.iter().map(|&z| point_to_array(z)).collect();
        if let Some(&first) = vertices.first() {
            vertices.push(first);
        }
        let file = CycleFile {
            level: [self.level.re, self.level.im],
            vertices,
            orientation: self.orientation.clone(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&file).expect("cycle serializes")
    }

    pub fn from_json(text: &str) -> Result<Cycle> {
        let file: CycleFile = serde_json::from_str(text)?;
        let mut vertices: Vec<Point> = file.vertices.into_iter().map(array_to_point).collect();
        if vertices.len() >= 2 && dist(vertices[0], *vertices.last().unwrap()) == 0.0 {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::Invalid("a cycle needs at least three vertices".into()));
        }
        Ok(Cycle {
            level: C64::new(file.level[0], file.level[1]),
            vertices,
            orientation: file.orientation,
            provenance: file.provenance,
        })
    }
}

/// One piece of a path of levels.
#[derive(Clone, Debug)]
pub enum PathSeg {
    Line(C64, C64),
    /// `center + radius·e^{i(start + s·sweep)}`, `s ∈ [0, 1]`.
    Arc { center: C64, radius: f64, start: f64, sweep: f64 },
}

impl PathSeg {
    pub fn eval(&self, s: f64) -> C64 {
        match *self {
            PathSeg::Line(a, b) => a + (b - a) * s,
            PathSeg::Arc { center, radius, start, sweep } => center + C64::from_polar(radius, start + s * sweep),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            PathSeg::Line(a, b) => (b - a).norm(),
            PathSeg::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }
}

/// Piecewise path in the value plane.
#[derive(Clone, Debug, Default)]
pub struct TPath {
    pub segs: Vec<PathSeg>,
}

impl TPath {
    pub fn segment(a: C64, b: C64) -> Self {
        Self { segs: vec![PathSeg::Line(a, b)] }
    }

    pub fn polyline(points: &[C64]) -> Self {
        Self { segs: points.windows(2).map(|w| PathSeg::Line(w[0], w[1])).collect() }
    }

    /// Closed counterclockwise circle through `base` around `center`.
    pub fn circle(base: C64, center: C64, turns: f64) -> Self {
        let r = (base - center).norm();
        let start = (base - center).arg();
        Self { segs: vec![PathSeg::Arc { center, radius: r, start, sweep: turns * std::f64::consts::TAU }] }
    }

    pub fn then(mut self, other: TPath) -> Self {
        self.segs.extend(other.segs);
        self
    }

    pub fn start(&self) -> Option<C64> {
        self.segs.first().map(|s| s.eval(0.0))
    }

    pub fn end(&self) -> Option<C64> {
        self.segs.last().map(|s| s.eval(1.0))
    }

    pub fn reversed(&self) -> Self {
        let segs = self
            .segs
            .iter()
            .rev()
            .map(|s| match *s {
                PathSeg::Line(a, b) => PathSeg::Line(b, a),
                PathSeg::Arc { center, radius, start, sweep } => {
                    PathSeg::Arc { center, radius, start: start + sweep, sweep: -sweep }
                }
            })
            .collect();
        Self { segs }
    }

    /// Minimal distance from sampled path points to `v`.
    pub fn distance_to(&self, v: C64) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.segs {
            for k in 0..=256 {
                best = best.min((seg.eval(k as f64 / 256.0) - v).norm());
            }
        }
        best
    }

    /// Parses `segment:a,b`, `poly:a;b;c`, or `circle:base,center[,turns]`,
    /// with complex numbers in the scalar grammar. Pieces join with `|`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut path = TPath::default();
        for piece in text.split('|') {
            let (kind, rest) = piece
                .split_once(':')
                .ok_or_else(|| Error::Invalid(format!("path piece `{piece}` lacks a kind")))?;
            let nums = |s: &str, sep: char| -> Result<Vec<C64>> {
                s.split(sep).map(|v| crate::algebra::parse_scalar(v.trim()).map(|c| c.to_c64())).collect()
            };
            let add = match kind.trim() {
                "segment" => {
                    let v = nums(rest, ',')?;
                    if v.len() != 2 {
                        return Err(Error::Invalid("segment needs two endpoints".into()));
                    }
                    TPath::segment(v[0], v[1])
                }
                "poly" => TPath::polyline(&nums(rest, ';')?),
                "circle" => {
                    let v = nums(rest, ',')?;
                    if v.len() < 2 {
                        return Err(Error::Invalid("circle needs base and center".into()));
                    }
                    TPath::circle(v[0], v[1], v.get(2).map(|t| t.re).unwrap_or(1.0))
                }
                other => return Err(Error::Invalid(format!("unknown path kind `{other}`"))),
            };
            path = path.then(add);
        }
        Ok(path)
    }
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    /// Target vertex count; edges longer than `2·perimeter/target` are split.
    pub target_vertices: usize,
    /// Newton iterations for projections.
    pub newton_iters: usize,
    /// Values the path must keep `margin` away from.
    pub avoid: Vec<C64>,
    pub margin: f64,
    /// Values that limit the step length to a fraction of the distance.
    pub step_refs: Vec<C64>,
    /// Step length as a fraction of the distance to the nearest reference.
    pub step_fraction: f64,
    pub max_halvings: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            target_vertices: 96,
            newton_iters: 30,
            avoid: Vec::new(),
            margin: 0.0,
            step_refs: Vec::new(),
            step_fraction: 0.2,
            max_halvings: 40,
        }
    }
}

impl TraceOptions {
    /// Options for a spec's critical data, with `own` exempt from the margin.
    pub fn for_data(spec: &PencilSpec, data: &CriticalData, own: Option<C64>) -> Self {
        let refs = data.atypical_values(spec);
        let avoid = refs
            .iter()
            .copied()
            .filter(|v| own.is_none_or(|o| (o - v).norm() > 1e-12 * (1.0 + o.norm())))
            .collect();
        Self { avoid, margin: data.default_margin(spec), step_refs: refs, ..Default::default() }
    }
}

/// Drops vertices closer than `0.05·perimeter/target` to the previous kept one.
fn merge_close(verts: &mut Vec<Point>, target: usize) {
    let n = verts.len();
    let per: f64 = (0..n).map(|i| dist(verts[i], verts[(i + 1) % n])).sum();
    let min_edge = 0.05 * per / target as f64;
    let mut out: Vec<Point> = Vec::with_capacity(n);
    for (i, &v) in verts.iter().enumerate() {
        let close_prev = out.last().is_some_and(|&l| dist(l, v) < min_edge);
        let close_first = i == n - 1 && dist(v, verts[0]) < min_edge;
        if !(close_prev || close_first) {
            out.push(v);
        }
    }
    if out.len() >= 8 {
        *verts = out;
    }
}

fn refine(fib: &Fibration, verts: &mut Vec<Point>, t: C64, opts: &TraceOptions) -> Result<()> {
    for _ in 0..12 {
        merge_close(verts, opts.target_vertices);
        let n = verts.len();
        let per: f64 = (0..n).map(|i| dist(verts[i], verts[(i + 1) % n])).sum();
        let max_edge = 2.0 * per / opts.target_vertices as f64;
        let mut split = vec![false; n];
        for i in 0..n {
            let a = verts[(i + n - 1) % n];
            let b = verts[i];
            let c = verts[(i + 1) % n];
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            let dot = (e1[0].conj() * e2[0] + e1[1].conj() * e2[1]).re;
            let cosang = dot / (norm2(e1) * norm2(e2)).max(f64::MIN_POSITIVE);
            if dist(b, c) > max_edge {
                split[i] = true;
            }
            if cosang < 0.96 {
                split[i] = true;
                split[(i + n - 1) % n] = true;
            }
        }
        if !split.iter().any(|&s| s) {
            break;
        }
        if n > 64 * opts.target_vertices {
            return Err(Error::Tracing("vertex count exploded during refinement".into()));
        }
        let mut out = Vec::with_capacity(n * 2);
        for i in 0..n {
            out.push(verts[i]);
            if split[i] {
                let (a, b) = (verts[i], verts[(i + 1) % n]);
                let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
                let (m, moved) = fib
                    .project(mid, t, opts.newton_iters)
                    .ok_or_else(|| Error::Tracing("midpoint projection failed".into()))?;
                if moved > dist(a, b) {
                    return Err(Error::Tracing("midpoint projected off the local arc".into()));
                }
                out.push(m);
            }
        }
        *verts = out;
    }
    // Coarsen when far above target.
    if verts.len() > 3 * opts.target_vertices {
        let n = verts.len();
        let per: f64 = (0..n).map(|i| dist(verts[i], verts[(i + 1) % n])).sum();
        let min_edge = 0.5 * per / opts.target_vertices as f64;
        let mut out: Vec<Point> = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            out.push(verts[i]);
            if i + 2 < n && dist(verts[i], verts[i + 2]) < min_edge {
                i += 2;
            } else {
                i += 1;
            }
        }
        *verts = out;
    }
    Ok(())
}

fn check_margin(t: C64, opts: &TraceOptions) -> Result<()> {
    for &v in &opts.avoid {
        if (t - v).norm() < opts.margin {
            return Err(Error::Tracing(format!(
                "path passes within {:.3e} of the atypical value {v} (margin {:.3e})",
                (t - v).norm(),
                opts.margin
            )));
        }
    }
    Ok(())
}

/// Moves every vertex from level `t0` to `t1`; `None` if any vertex fails.
fn step_vertices(fib: &Fibration, verts: &[Point], t0: C64, t1: C64, opts: &TraceOptions) -> Option<Vec<Point>> {
    let n = verts.len();
    let dt = t1 - t0;
    let per: f64 = (0..n).map(|i| dist(verts[i], verts[(i + 1) % n])).sum();
    let spacing: Vec<f64> = (0..n)
        .map(|i| dist(verts[i], verts[(i + 1) % n]).min(dist(verts[i], verts[(i + n - 1) % n])))
        .collect();
    let moved: Vec<Option<Point>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = verts[i];
            // Heun predictor along ż = G^q conj(∇Φ)/|∇Φ|²
            let vel = |z: Point, t: C64| {
                let (_, g, gq) = fib.phi(z, t);
                let gn = g[0].norm_sqr() + g[1].norm_sqr();
                [gq * g[0].conj() / gn, gq * g[1].conj() / gn]
            };
            let k1 = vel(z, t0);
            let zp = [z[0] + k1[0] * dt, z[1] + k1[1] * dt];
            let k2 = vel(zp, t1);
            let pred = [z[0] + (k1[0] + k2[0]) * dt * 0.5, z[1] + (k1[1] + k2[1]) * dt * 0.5];
            if !pred[0].is_finite() || !pred[1].is_finite() || dist(pred, z) > 0.05 * per {
                return None;
            }
            let (w, corr) = fib.project(pred, t1, opts.newton_iters)?;
            (corr <= 0.05 * spacing[i]).then_some(w)
        })
        .collect();
    let out: Vec<Point> = moved.into_iter().collect::<Option<_>>()?;
    // Reject steps that turn or stretch an edge: neighbors overtaking each
    // other leave spikes that refinement cannot remove.
    for i in 0..n {
        let j = (i + 1) % n;
        let e0 = [verts[j][0] - verts[i][0], verts[j][1] - verts[i][1]];
        let e1 = [out[j][0] - out[i][0], out[j][1] - out[i][1]];
        let (l0, l1) = (norm2(e0), norm2(e1));
        let dot = (e0[0].conj() * e1[0] + e0[1].conj() * e1[1]).re;
        if dot < 0.8 * l0 * l1 || l1 > 2.0 * l0 || l0 > 2.0 * l1 {
            return None;
        }
    }
    Some(out)
}

/// Continues `cycle` along `path`.
pub fn transport(fib: &Fibration, cycle: &Cycle, path: &TPath, opts: &TraceOptions) -> Result<Cycle> {
    let mut verts = cycle.vertices.clone();
    let mut t = cycle.level;
    if let Some(s) = path.start() {
        if (s - t).norm() > 1e-9 * (1.0 + t.norm()) {
            return Err(Error::Precondition(format!("path starts at {s}, cycle level is {t}")));
        }
    }
    let mut visited = cycle.provenance.path.clone();
    for seg in &path.segs {
        let len = seg.length();
        if len == 0.0 {
            continue;
        }
        let mut s = 0.0;
        let mut ds: f64 = (0.05f64).min(1.0);
        let mut halvings = 0;
        while s < 1.0 {
            let tcur = seg.eval(s);
            let dref = opts.step_refs.iter().map(|v| (tcur - v).norm()).fold(f64::INFINITY, f64::min);
            let cap = if dref.is_finite() { opts.step_fraction * dref / len } else { 1.0 };
            if cap * len < 1e-12 * (1.0 + tcur.norm()) {
                return Err(Error::Tracing(format!("path runs into the atypical value near {tcur}")));
            }
            let h = ds.min(cap.max(1e-14)).min(1.0 - s);
            let s1 = if 1.0 - (s + h) < 1e-12 { 1.0 } else { s + h };
            let t1 = seg.eval(s1);
            check_margin(t1, opts)?;
            match step_vertices(fib, &verts, t, t1, opts) {
                Some(v) => {
                    verts = v;
                    refine(fib, &mut verts, t1, opts)?;
                    t = t1;
                    s = s1;
                    ds = (h * 1.5).min(0.25);
                    halvings = 0;
                }
                None => {
                    ds = h * 0.5;
                    halvings += 1;
                    if halvings > opts.max_halvings {
                        return Err(Error::Tracing(format!("corrector failed near level {t1}")));
                    }
                }
            }
        }
        let e = seg.eval(1.0);
        visited.push([e.re, e.im]);
    }
    let mut out = cycle.clone();
    out.vertices = verts;
    out.level = t;
    out.provenance.path = visited;
    Ok(out)
}

/// Transport around a closed loop based at the cycle's level.
pub fn monodromy_loop(fib: &Fibration, cycle: &Cycle, path: &TPath, opts: &TraceOptions) -> Result<Cycle> {
    match (path.start(), path.end()) {
        (Some(a), Some(b)) if (a - b).norm() <= 1e-9 * (1.0 + a.norm()) => transport(fib, cycle, path, opts),
        _ => Err(Error::Precondition("monodromy path is not closed".into())),
    }
}

/// Linear map `L` with `½ wᵀ H w = u·v` for `(u, v) = L w`.
fn morse_chart(h: &[[C64; 2]; 2]) -> Result<[[C64; 2]; 2]> {
    let alpha = h[0][0] * 0.5;
    let beta = (h[0][1] + h[1][0]) * 0.5;
    let gamma = h[1][1] * 0.5;
    let disc = beta * beta - alpha * gamma * 4.0;
    let disc = C64::new(disc.re + 0.0, disc.im + 0.0);
    let scale = alpha.norm().max(beta.norm()).max(gamma.norm());
    if disc.norm() <= 1e-12 * scale * scale {
        return Err(Error::Degenerate("critical point is degenerate".into()));
    }
    let sd = disc.sqrt();
    let tiny = 1e-12 * scale;
    Ok(if alpha.norm() >= gamma.norm() && alpha.norm() > tiny {
        let r1 = (-beta - sd) / (alpha * 2.0);
        let r2 = (-beta + sd) / (alpha * 2.0);
        let s = alpha.sqrt();
        [[s, -s * r1], [s, -s * r2]]
    } else if gamma.norm() > tiny {
        let s1 = (-beta - sd) / (gamma * 2.0);
        let s2 = (-beta + sd) / (gamma * 2.0);
        let s = gamma.sqrt();
        [[-s * s1, s], [-s * s2, s]]
    } else {
        let s = beta.sqrt();
        [[s, ZERO], [ZERO, s]]
    })
}

fn inv2(l: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    [[l[1][1] / det, -l[0][1] / det], [-l[1][0] / det, l[0][0] / det]]
}

/// Lefschetz vanishing cycle of `crit` on the fiber `t`, seeded from the
/// Morse model `u = √(t-c) e^{iθ}`, `v = √(t-c) e^{-iθ}` and projected.
pub fn seed_vanishing_cycle(
    fib: &Fibration,
    crit: &CriticalPoint,
    index: usize,
    t: C64,
    m: usize,
    opts: &TraceOptions,
) -> Result<Cycle> {
    if !crit.nondegenerate {
        return Err(Error::Degenerate("cannot seed at a degenerate critical point".into()));
    }
    let l = morse_chart(&crit.hessian)?;
    let li = inv2(&l);
    let s = t - crit.value;
    if s.norm() == 0.0 {
        return Err(Error::Precondition("level equals the critical value".into()));
    }
    let rs = s.sqrt();
    let m = m.max(8);
    let mut verts = Vec::with_capacity(m);
    let mut max_move: f64 = 0.0;
    let mut radius: f64 = 0.0;
    for k in 0..m {
        let th = std::f64::consts::TAU * k as f64 / m as f64;
        let u = rs * C64::from_polar(1.0, th);
        let v = rs * C64::from_polar(1.0, -th);
        let w = [li[0][0] * u + li[0][1] * v, li[1][0] * u + li[1][1] * v];
        let z0 = [crit.point[0] + w[0], crit.point[1] + w[1]];
        radius = radius.max(norm2(w));
        let (z, moved) = fib
            .project(z0, t, opts.newton_iters)
            .ok_or_else(|| Error::Tracing("Newton projection of the Morse model failed; level too far".into()))?;
        max_move = max_move.max(moved);
        verts.push(z);
    }
    if max_move > 0.25 * radius * (std::f64::consts::TAU / m as f64).max(0.05) * 4.0 {
        return Err(Error::Tracing(format!(
            "Morse model inaccurate at this level (projection moved {max_move:.2e}, radius {radius:.2e})"
        )));
    }
    refine(fib, &mut verts, t, opts)?;
    Ok(Cycle {
        level: t,
        vertices: verts,
        orientation: "ccw-seed".into(),
        provenance: Provenance {
            kind: "critical".into(),
            index: Some(index),
            point: Some(point_to_array(crit.point)),
            path: vec![[t.re, t.im]],
        },
    })
}

/// Residue cycle around a transversal base point `q`, from the local model
/// `(U, V) = (F, G)`, `V = σ^p e^{ipθ}`, `U = t^{1/p} σ^q e^{iqθ}`.
pub fn seed_indeterminacy_cycle(
    fib: &Fibration,
    base: &BasePoint,
    index: usize,
    t: C64,
    radius: f64,
    m: usize,
    opts: &TraceOptions,
) -> Result<Cycle> {
    if !base.transversal {
        return Err(Error::Precondition("base point is not a transversal intersection".into()));
    }
    let spec = &fib.spec;
    let q = base.point;
    let gf = exterior_d(&spec.f);
    let gg = exterior_d(&spec.g);
    let ev = |p: &BivarPoly| NumPoly::from_exact(p).eval(q[0], q[1]);
    let j = [[ev(&gf.dx), ev(&gf.dy)], [ev(&gg.dx), ev(&gg.dy)]];
    let ji = inv2(&j);
    let jin = ji.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let (p, qq) = (spec.p as i32, spec.q as i32);
    let tp = t.powf(1.0 / p as f64);
    // σ with max(|U|, |V|)·‖J⁻¹‖ = radius
    let size = |sig: f64| tp.norm().max(0.0) * sig.powi(qq) + sig.powi(p);
    let (mut lo, mut hi) = (1e-12f64, 1e3f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if size(mid) * jin > radius {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma = lo;
    let m = m.max(16) * (p.max(qq) as usize);
    let mut verts = Vec::with_capacity(m);
    for k in 0..m {
        let th = std::f64::consts::TAU * k as f64 / m as f64;
        let v = C64::from_polar(sigma.powi(p), p as f64 * th);
        let u = tp * C64::from_polar(sigma.powi(qq), qq as f64 * th);
        let w = [ji[0][0] * u + ji[0][1] * v, ji[1][0] * u + ji[1][1] * v];
        let z0 = [q[0] + w[0], q[1] + w[1]];
        let (z, _) = fib
            .project(z0, t, opts.newton_iters)
            .ok_or_else(|| Error::Tracing("projection near the base point failed".into()))?;
        verts.push(z);
    }
    refine(fib, &mut verts, t, opts)?;
    Ok(Cycle {
        level: t,
        vertices: verts,
        orientation: "ccw-seed".into(),
        provenance: Provenance {
            kind: "indeterminacy".into(),
            index: Some(index),
            point: Some(point_to_array(q)),
            path: vec![[t.re, t.im]],
        },
    })
}

/// A path from `from` to `to` keeping `margin` away from `avoid`; tries the
/// straight segment, then one-waypoint detours on either side.
pub fn plan_path(from: C64, to: C64, avoid: &[C64], margin: f64) -> Result<TPath> {
    let clear = |p: &TPath| avoid.iter().all(|&v| p.distance_to(v) >= margin * 1.5);
    let direct = TPath::segment(from, to);
    if clear(&direct) {
        return Ok(direct);
    }
    let d = to - from;
    let len = d.norm().max(margin);
    let perp = C64::new(-d.im, d.re) / d.norm().max(f64::MIN_POSITIVE);
    let mid = (from + to) * 0.5;
    for k in 1..=12 {
        for sign in [1.0, -1.0] {
            let w = mid + perp * (sign * 0.25 * k as f64 * len);
            let p = TPath::polyline(&[from, w, to]);
            if clear(&p) {
                return Ok(p);
            }
        }
    }
    Err(Error::Tracing(format!("no clear path from {from} to {to}")))
}

/// The vanishing cycle of critical point `index`, transported to each of
/// `levels` in order.
pub fn vanishing_family(
    fib: &Fibration,
    data: &CriticalData,
    index: usize,
    levels: &[C64],
    m: usize,
) -> Result<Vec<Cycle>> {
    let crit = data
        .points
        .get(index)
        .ok_or_else(|| Error::Invalid(format!("no critical point with index {index}")))?;
    let opts = TraceOptions::for_data(&fib.spec, data, Some(crit.value));
    let c = crit.value;
    let first = *levels.first().ok_or_else(|| Error::Invalid("no levels".into()))?;
    let others: Vec<C64> = opts.avoid.clone();
    let sep = others.iter().map(|v| (v - c).norm()).fold(f64::INFINITY, f64::min);
    let mut rho = (first - c).norm().min(if sep.is_finite() { 0.25 * sep } else { f64::INFINITY });
    rho = rho.min(1e-2 * (1.0 + c.norm()));
    let dir = if (first - c).norm() > 0.0 { (first - c) / (first - c).norm() } else { C64::new(1.0, 0.0) };
    let mut seed = None;
    for _ in 0..12 {
        match seed_vanishing_cycle(fib, crit, index, c + dir * rho, m, &opts) {
            Ok(cy) => {
                seed = Some(cy);
                break;
            }
            Err(_) => rho *= 0.5,
        }
    }
    let mut cur = seed.ok_or_else(|| Error::Tracing("could not seed the vanishing cycle".into()))?;
    let mut out = Vec::with_capacity(levels.len());
    for &lv in levels {
        if (lv - cur.level).norm() > 0.0 {
            let path = plan_path(cur.level, lv, &opts.avoid, opts.margin)?;
            cur = transport(fib, &cur, &path, &opts)?;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Heuristic count of irreducible components of `{Φ_t = 0}` from the
/// monodromy of a generic line section around random loops. A result above
/// one means the fiber may be disconnected.
pub fn fiber_component_count(fib: &Fibration, t: C64, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rc = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let dir = [rc(), rc()];
    let normal = [rc(), rc()];
    // Line family z(λ, s) = λ·normal + s·dir; restricted polynomial in s.
    let fp = fib.spec.f.pow(fib.spec.p).to_c64();
    let gq = fib.spec.g.pow(fib.spec.q).to_c64();
    let phi = &fp - &gq.scale(&t);
    let coeffs_at = |lam: C64| -> Vec<C64> {
        let px = Poly::from_terms([(Mono::ONE, lam * normal[0]), (Mono::new(1, 0), dir[0])]);
        let py = Poly::from_terms([(Mono::ONE, lam * normal[1]), (Mono::new(1, 0), dir[1])]);
        let r = phi.substitute(&px, &py);
        let d = r.degree().unwrap_or(0) as usize;
        (0..=d).map(|k| r.coeff(Mono::new(k as u32, 0))).collect()
    };
    let lam0 = rc();
    let roots0 = complex_roots(&coeffs_at(lam0));
    let n = roots0.len();
    if n <= 1 {
        return Ok(n);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let horner = |c: &[C64], s: C64| -> (C64, C64) {
        let mut v = ZERO;
        let mut dv = ZERO;
        for a in c.iter().rev() {
            dv = dv * s + v;
            v = v * s + a;
        }
        (v, dv)
    };
    let scale = roots0.iter().map(|r| r.norm()).fold(1.0, f64::max);
    for _ in 0..10 {
        let center = lam0 + rc() * 2.0 * scale;
        let radius = (lam0 - center).norm();
        let start = (lam0 - center).arg();
        let mut cur = roots0.clone();
        let steps = 720;
        let mut ok = true;
        for k in 1..=steps {
            let lam = center + C64::from_polar(radius, start + std::f64::consts::TAU * k as f64 / steps as f64);
            let c = coeffs_at(lam);
            let mut next = cur.clone();
            for r in next.iter_mut() {
                for _ in 0..20 {
                    let (v, dv) = horner(&c, *r);
                    if dv.norm() == 0.0 {
                        break;
                    }
                    let st = v / dv;
                    *r -= st;
                    if st.norm() < 1e-14 * (1.0 + r.norm()) {
                        break;
                    }
                }
            }
            // tracking must stay injective
            for i in 0..n {
                for j in i + 1..n {
                    if (next[i] - next[j]).norm() < 1e-8 * scale {
                        ok = false;
                    }
                }
            }
            if !ok {
                break;
            }
            cur = next;
        }
        if !ok {
            continue;
        }
        for (i, r) in cur.iter().enumerate() {
            let j = (0..n)
                .min_by(|&a, &b| (roots0[a] - r).norm().partial_cmp(&(roots0[b] - r).norm()).unwrap())
                .unwrap();
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            parent[a] = b;
        }
    }
    let mut roots = std::collections::BTreeSet::new();
    for i in 0..n {
        roots.insert(find(&mut parent, i));
    }
    Ok(roots.len())
}
