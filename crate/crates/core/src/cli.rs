//! Command-line front end. The binary only forwards its arguments to [`run`].
//!
//! Every command writes one artifact (a JSON report, a CSV table, a plot
//! file or a cycle file) to `--out` or standard output. Exit status is 0 on
//! success, 2 on an infeasibility verdict and 1 on errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::abelian::{default_residue_radius, integrate, QuadOptions, RationalForm};
use crate::algebra::{parse_poly, parse_scalar, system::SystemOptions, BivarPoly, Coeff, ExactOneForm, OneForm, Poly};
use crate::center::{
    float_center_residual, normalize_linear_part, obstructions_with_gauge, symbolic_template, Germ, NormalizeMode,
    ObstructionReport, MAX_ORDER, MAX_SYMBOLIC_ORDER,
};
use crate::error::{Error, Result};
use crate::fibration::{
    critical_data, fiber_component_count, seed_indeterminacy_cycle, transport, vanishing_family, Cycle, Fibration,
    TPath, TraceOptions,
};
use crate::foliation::{
    logarithmic_center_count, logarithmic_form, parse_lambdas, pencil_singular_points, singular_points, FoliationForm,
    PencilSpec, SingularKind, SingularOptions,
};
use crate::melnikov::{
    count_zeros, cycle_family, first_melnikov, higher_melnikov, pole_fn_string, DeformationSpec, Normalization, Sample,
};
use crate::numeric::C64;
use crate::oracle::{holonomy, melnikov_fd, to_log_convention, FdEstimate, OracleOptions};
use crate::relexact::{
    decompose, degree_cap, tangent_form, tangent_membership, DecomposeOutcome, DecompositionBounds, Factors,
    TangentOutcome,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Plot,
}

/// Tolerances, caps, output location and seed shared by all commands.
#[derive(Clone, Debug, Serialize, Args)]
pub struct RunConfig {
    /// Largest relative fiber residual accepted on cycle vertices.
    #[arg(long = "tol-fiber", default_value_t = 1e-10, global = true)]
    pub tol_fiber: f64,
    /// Quadrature fails when its error estimate exceeds this.
    #[arg(long = "tol-quad", default_value_t = 1e-6, global = true)]
    pub tol_quad: f64,
    /// Threshold below which sampled Melnikov values count as zero.
    #[arg(long = "tol-zero", global = true)]
    pub tol_zero: Option<f64>,
    /// Pole distance tolerance, relative to the cycle diameter.
    #[arg(long = "tol-pole", default_value_t = 1e-6, global = true)]
    pub tol_pole: f64,
    /// Relative residual accepted for polished singular points.
    #[arg(long = "tol-newton", default_value_t = 1e-9, global = true)]
    pub tol_newton: f64,
    /// Cap on ansatz degrees (at most `MELNIKOV_KIT_MAXDEG`, default 24).
    #[arg(long = "max-degree", global = true)]
    pub max_degree: Option<u32>,
    /// Target vertex count for traced cycles.
    #[arg(long, default_value_t = 96, global = true)]
    pub vertices: usize,
    /// Seed for randomized heuristics.
    #[arg(long, default_value_t = 1, global = true)]
    pub seed: u64,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; csv and plot apply to sampled Melnikov values.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol_fiber: 1e-10,
            tol_quad: 1e-6,
            tol_zero: None,
            tol_pole: 1e-6,
            tol_newton: 1e-9,
            max_degree: None,
            vertices: 96,
            seed: 1,
            out: None,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("tol-fiber", Some(self.tol_fiber)),
            ("tol-quad", Some(self.tol_quad)),
            ("tol-zero", self.tol_zero),
            ("tol-pole", Some(self.tol_pole)),
            ("tol-newton", Some(self.tol_newton)),
        ];
        for (name, v) in tols {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Invalid(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(d) = self.max_degree {
            if d > degree_cap() {
                return Err(Error::Cap(format!("--max-degree {d} exceeds the global cap {}", degree_cap())));
            }
        }
        if !(8..=4096).contains(&self.vertices) {
            return Err(Error::Invalid(format!("--vertices must lie in 8..=4096, got {}", self.vertices)));
        }
        Ok(())
    }

    pub fn quad(&self) -> QuadOptions {
        QuadOptions { pole_rel: self.tol_pole, fail_tol: self.tol_quad, ..Default::default() }
    }

    fn degree_limit(&self) -> u32 {
        self.max_degree.unwrap_or_else(degree_cap)
    }
}

#[derive(Debug, Parser)]
#[command(name = "melnikov-kit", version, about = "Melnikov functions, vanishing cycles and center conditions")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points and values of the first integral, base points and genericity flags.
    CriticalValues {
        #[arg(long)]
        spec: PathBuf,
        /// Level used for the fiber connectivity heuristic.
        #[arg(long)]
        level: Option<String>,
    },
    /// Singular points of a pencil, logarithmic or explicit foliation.
    SingularPoints {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        real_only: bool,
        /// Keep points with max(|x|, |y|) at most this.
        #[arg(long = "box")]
        box_radius: Option<f64>,
        #[arg(long, default_value_t = 6)]
        center_order: u32,
    },
    /// Seeds a vanishing or residue cycle and optionally transports it.
    TraceCycle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "from-critical", conflicts_with = "from_base")]
        from_critical: Option<usize>,
        #[arg(long = "from-base")]
        from_base: Option<usize>,
        #[arg(long)]
        level: String,
        /// `segment:a,b`, `poly:a;b;c` or `circle:base,center[,turns]`, joined by `|`.
        #[arg(long)]
        path: Option<String>,
        /// Residue cycle radius (base point seeds only).
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Integrates `num_dx,num_dy[,den]` over a cycle file.
    Integrate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cycle: PathBuf,
        #[arg(long)]
        form: String,
    },
    /// Samples the first non-vanishing Melnikov function up to `--order`.
    Melnikov {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// `a:b:n` or a comma separated list of levels.
        #[arg(long)]
        levels: String,
        /// Index of the critical point whose vanishing cycle is followed.
        #[arg(long, default_value_t = 0)]
        critical: usize,
        #[arg(long)]
        gbound: Option<u32>,
        #[arg(long)]
        pbound: Option<u32>,
    },
    /// Finite-difference Melnikov estimates from the holonomy oracle.
    MelnikovFd {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, required_unless_present = "t")]
        levels: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// Largest ε of the grid.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 6)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        critical: usize,
    },
    /// Holonomy `h_ε(t)` of the perturbed foliation along a cycle.
    Holonomy {
        #[arg(long)]
        spec: PathBuf,
        /// Guide cycle; traced from `--critical` when absent.
        #[arg(long)]
        cycle: Option<PathBuf>,
        #[arg(long)]
        t: String,
        #[arg(long)]
        eps: f64,
        /// Repeat with ε halved this many times in total.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 0)]
        critical: usize,
    },
    /// Solves `ω/s = dg + p·ω₀/s` with bounded degrees.
    Decompose {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        form: String,
        #[arg(long)]
        gbound: Option<u32>,
        #[arg(long)]
        pbound: Option<u32>,
    },
    /// Exact membership of a form in the tangent space of the pencil's center component.
    TangentTest {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        form: String,
    },
    /// Obstructions to a formal first integral at the origin.
    CenterObstructions {
        #[arg(long, required_unless_present = "symbolic")]
        spec: Option<PathBuf>,
        #[arg(long = "max-order")]
        max_order: u32,
        /// Run on the quadratic template with indeterminate coefficients.
        #[arg(long)]
        symbolic: bool,
        /// Add the cubic `h(x dy - y dx)` terms to the template.
        #[arg(long, requires = "symbolic")]
        cubic: bool,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
        /// Kernel gauge `m:c`, adding `c·(xy)^{m/2}` to `f_m`.
        #[arg(long)]
        gauge: Vec<String>,
    },
    /// Sign changes of sampled Melnikov values on a segment.
    CountZeros {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
        segment: Vec<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long = "max-gap")]
        max_gap: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
    Auto,
}

impl From<ModeArg> for NormalizeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => NormalizeMode::Exact,
            ModeArg::Float => NormalizeMode::Float,
            ModeArg::Auto => NormalizeMode::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Infeasible,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Infeasible => 2,
        }
    }
}

/// Rendered artifact of one command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub text: String,
    pub status: Status,
    /// Diagnostics for standard error when the artifact has no room for them.
    pub notes: Vec<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, status: Status::Success, notes: Vec::new() }
    }
}

// ---------------------------------------------------------------- spec files

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PencilEntry {
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "G", default = "one")]
    pub g: String,
    #[serde(default = "unit")]
    pub p: u32,
    #[serde(default = "unit")]
    pub q: u32,
}

fn one() -> String {
    "1".into()
}

fn unit() -> u32 {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogarithmicEntry {
    pub factors: Vec<String>,
    pub lambdas: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormEntry {
    pub dx: String,
    pub dy: String,
    pub degree: Option<u32>,
}

impl FormEntry {
    fn parse(&self) -> Result<ExactOneForm> {
        Ok(OneForm::new(parse_poly(&self.dx)?, parse_poly(&self.dy)?))
    }
}

/// Contents of a `--spec` file. Exactly one of `pencil`, `logarithmic` and
/// `form` describes the foliation; `deformation` lists `ω₁, ω₂, …`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub pencil: Option<PencilEntry>,
    pub logarithmic: Option<LogarithmicEntry>,
    pub form: Option<FormEntry>,
    #[serde(default)]
    pub deformation: Vec<FormEntry>,
    pub normalization: Option<Normalization>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SpecFile = serde_json::from_str(text)?;
        let n = [s.pencil.is_some(), s.logarithmic.is_some(), s.form.is_some()].iter().filter(|b| **b).count();
        if n != 1 {
            return Err(Error::Invalid("spec needs exactly one of `pencil`, `logarithmic`, `form`".into()));
        }
        Ok(s)
    }

    pub fn pencil(&self) -> Result<PencilSpec> {
        let e = self
            .pencil
            .as_ref()
            .ok_or_else(|| Error::Invalid("this command needs a `pencil` spec".into()))?;
        PencilSpec::new(parse_poly(&e.f)?, parse_poly(&e.g)?, e.p, e.q)
    }

    pub fn deformation(&self) -> Result<DeformationSpec> {
        let forms = self.deformation.iter().map(FormEntry::parse).collect::<Result<Vec<_>>>()?;
        DeformationSpec::new(self.pencil()?, forms, self.normalization)
    }

    pub fn normalization_for(&self, spec: &PencilSpec) -> Normalization {
        self.normalization.unwrap_or_else(|| Normalization::default_for(spec))
    }

    /// The defining 1-form: `ω₀` for pencils.
    pub fn foliation(&self) -> Result<FoliationForm> {
        if let Some(e) = &self.form {
            let w = e.parse()?;
            let d = e.degree.unwrap_or_else(|| w.degree().unwrap_or(1).saturating_sub(1));
            return Ok(FoliationForm::new(w, d));
        }
        if let Some(e) = &self.logarithmic {
            let factors = e.factors.iter().map(|s| parse_poly(s)).collect::<Result<Vec<_>>>()?;
            return logarithmic_form(&factors, &parse_lambdas(&e.lambdas)?);
        }
        let spec = self.pencil()?;
        let mut f = FoliationForm::new(spec.omega0(), spec.degree());
        f.warnings.extend(spec.warnings.iter().cloned());
        Ok(f)
    }
}

// ------------------------------------------------------------ value parsing

/// Parses `a`, `a+bi`, `a-bi`, `bi` or `(a,b)`.
pub fn parse_c64(text: &str) -> Result<C64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Invalid(format!("cannot read `{text}` as a complex number"));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        if let Some((a, b)) = inner.split_once(',') {
            return Ok(C64::new(num(a)?, num(b)?));
        }
        return parse_c64(inner);
    }
    let Some(body) = s.strip_suffix('i') else {
        return Ok(C64::new(num(&s)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |v: &str| match v {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => num(v),
    };
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

/// `a:b:n` (n equally spaced values including both ends) or a comma list.
pub fn parse_levels(text: &str) -> Result<Vec<C64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let levels = match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (parse_c64(a)?, parse_c64(b)?);
            let n: usize = n.trim().parse().map_err(|_| Error::Invalid(format!("bad level count in `{text}`")))?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect(),
            }
        }
        [_] => text.split(',').map(parse_c64).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Invalid(format!("levels must be `a:b:n` or a list, got `{text}`"))),
    };
    if levels.is_empty() {
        return Err(Error::Invalid("no levels".into()));
    }
    Ok(levels)
}

/// `A,B` as the 1-form `A dx + B dy`.
pub fn parse_form(text: &str) -> Result<ExactOneForm> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Invalid(format!("form must be `A,B`, got `{text}`")));
    }
    Ok(OneForm::new(parse_poly(parts[0])?, parse_poly(parts[1])?))
}

fn parse_gauge(items: &[String]) -> Result<Vec<(u32, crate::algebra::Scalar)>> {
    items
        .iter()
        .map(|s| {
            let (m, c) = s.split_once(':').ok_or_else(|| Error::Invalid(format!("gauge must be `m:c`, got `{s}`")))?;
            let m: u32 = m.trim().parse().map_err(|_| Error::Invalid(format!("bad gauge order in `{s}`")))?;
            Ok((m, parse_scalar(c)?))
        })
        .collect()
}

// ---------------------------------------------------------------- rendering

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    warnings: Vec<String>,
    #[serde(flatten)]
    body: T,
}

fn report<T: Serialize>(command: &str, config: &RunConfig, warnings: Vec<String>, body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Report { command, config, warnings: dedup(warnings), body })?;
    s.push('\n');
    Ok(s)
}

fn dedup(mut w: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    w.retain(|s| seen.insert(s.clone()));
    w
}

/// Renders a polynomial with arbitrary coefficients in the parser grammar,
/// wrapping each coefficient in parentheses.
fn render_poly<K: Coeff>(p: &Poly<K>, coef: impl Fn(&K) -> String) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (m, c) in p.terms().rev() {
        if !out.is_empty() {
            out.push_str(" + ");
        }
        let mono = m.to_string();
        if mono.is_empty() {
            let _ = write!(out, "({})", coef(c));
        } else {
            let _ = write!(out, "({})*{mono}", coef(c));
        }
    }
    out
}

fn c64_text(c: &C64) -> String {
    format!("{:e}{:+e}i", c.re, c.im)
}

fn table(
    header: &[&str],
    rows: &[Sample],
    format: Format,
    comments: &[String],
) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    match format {
        Format::Plot => {
            for s in rows {
                let _ = writeln!(out, "{:.16e} {:.16e}", s.t.re + 0.0, s.value.re + 0.0);
            }
        }
        _ => {
            let _ = writeln!(out, "{}", header.join(","));
            for s in rows {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    s.t.re + 0.0,
                    s.t.im + 0.0,
                    s.value.re + 0.0,
                    s.value.im + 0.0,
                    s.error
                );
            }
        }
    }
    out
}

/// Reads a table written by `melnikov` (CSV), ignoring comment lines.
/// Returns the samples and the `zero_tol` recorded in the comments.
pub fn read_samples(text: &str) -> Result<(Vec<Sample>, Option<f64>)> {
    let mut samples = Vec::new();
    let mut zero_tol = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("zero_tol:") {
                zero_tol = v.trim().parse().ok();
            }
            continue;
        }
        if line.is_empty() || line.starts_with("t_re") {
            continue;
        }
        let cols: Vec<f64> = line
            .split([',', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Invalid(format!("line {}: not numeric", i + 1)))?;
        let s = match cols.as_slice() {
            [t, m] => Sample { t: C64::new(*t, 0.0), value: C64::new(*m, 0.0), error: 0.0 },
            [tr, ti, mr, mi, e] => Sample { t: C64::new(*tr, *ti), value: C64::new(*mr, *mi), error: *e },
            _ => return Err(Error::Invalid(format!("line {}: expected 2 or 5 columns", i + 1))),
        };
        samples.push(s);
    }
    Ok((samples, zero_tol))
}

// ----------------------------------------------------------------- commands

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = &cli.config;
    cfg.validate()?;
    let json_only = |name: &str| -> Result<()> {
        match cfg.format {
            None | Some(Format::Json) => Ok(()),
            Some(f) => Err(Error::Invalid(format!("`{name}` writes JSON only, not {f:?}"))),
        }
    };
    match &cli.command {
        Command::CriticalValues { spec, level } => {
            json_only("critical-values")?;
            critical_values(cfg, spec, level.as_deref())
        }
        Command::SingularPoints { spec, real_only, box_radius, center_order } => {
            json_only("singular-points")?;
            singular(cfg, spec, *real_only, *box_radius, *center_order)
        }
        Command::TraceCycle { spec, from_critical, from_base, level, path, radius } => {
            json_only("trace-cycle")?;
            trace_cycle(cfg, spec, *from_critical, *from_base, level, path.as_deref(), *radius)
        }
        Command::Integrate { spec, cycle, form } => {
            json_only("integrate")?;
            integrate_cmd(cfg, spec, cycle, form)
        }
        Command::Melnikov { spec, order, levels, critical, gbound, pbound } => {
            melnikov_cmd(cfg, spec, *order, levels, *critical, *gbound, *pbound)
        }
        Command::MelnikovFd { spec, order, levels, t, eps, grid, critical } => {
            let text = levels.as_deref().or(t.as_deref()).unwrap_or_default();
            melnikov_fd_cmd(cfg, spec, *order, text, *eps, *grid, *critical)
        }
        Command::Holonomy { spec, cycle, t, eps, grid, critical } => {
            json_only("holonomy")?;
            holonomy_cmd(cfg, spec, cycle.as_deref(), t, *eps, grid.unwrap_or(1), *critical)
        }
        Command::Decompose { spec, form, gbound, pbound } => {
            json_only("decompose")?;
            decompose_cmd(cfg, spec, form, *gbound, *pbound)
        }
        Command::TangentTest { spec, form } => {
            json_only("tangent-test")?;
            tangent_cmd(cfg, spec, form)
        }
        Command::CenterObstructions { spec, max_order, symbolic, cubic, mode, gauge } => {
            json_only("center-obstructions")?;
            center_cmd(cfg, spec.as_deref(), *max_order, *symbolic, *cubic, (*mode).into(), gauge)
        }
        Command::CountZeros { input, segment, t0, max_gap } => {
            json_only("count-zeros")?;
            count_zeros_cmd(cfg, input, [segment[0], segment[1]], *t0, *max_gap)
        }
    }
}

fn critical_values(cfg: &RunConfig, path: &Path, level: Option<&str>) -> Result<Outcome> {
    let spec = SpecFile::load(path)?.pencil()?;
    let data = critical_data(&spec)?;
    let mut warnings = spec.warnings.clone();
    warnings.extend(data.warnings.iter().cloned());
    let t = match level {
        Some(s) => parse_c64(s)?,
        None => C64::new(data.atypical_values(&spec).iter().map(|v| v.norm()).fold(0.0, f64::max) + 1.0, 0.25),
    };
    let fib = Fibration::new(&spec);
    let components = match fiber_component_count(&fib, t, cfg.seed) {
        Ok(n) => {
            if n > 1 {
                warnings.push(format!("fiber at {t} may be disconnected ({n} components by the line-section heuristic)"));
            }
            Some(n)
        }
        Err(e) => {
            warnings.push(format!("connectivity heuristic failed: {e}"));
            None
        }
    };
    #[derive(Serialize)]
    struct Body<'a> {
        hamiltonian: bool,
        values: Vec<C64>,
        data: &'a crate::fibration::CriticalData,
        connectivity_level: C64,
        fiber_components: Option<usize>,
    }
    let body = Body {
        hamiltonian: spec.is_hamiltonian(),
        values: data.values(),
        data: &data,
        connectivity_level: t,
        fiber_components: components,
    };
    Ok(Outcome::ok(report("critical-values", cfg, warnings, body)?))
}

fn singular(cfg: &RunConfig, path: &Path, real_only: bool, box_radius: Option<f64>, center_order: u32) -> Result<Outcome> {
    let file = SpecFile::load(path)?;
    let fol = file.foliation()?;
    let mut warnings = fol.warnings.clone();
    let opts = SingularOptions {
        system: SystemOptions { residual_tol: cfg.tol_newton, ..Default::default() },
        box_radius,
        real_only,
        center_order,
    };
    let points = if file.pencil.is_some() {
        pencil_singular_points(&file.pencil()?, &opts)?
    } else {
        singular_points(&fol.omega, &fol.factors, &opts)?
    };
    let centers = points.iter().filter(|p| p.kind == SingularKind::MorseCenterCandidate).count();
    let expected = file.logarithmic.as_ref().map(|_| {
        let degrees: Vec<u32> = fol.factors.iter().map(|f| f.degree().unwrap_or(0)).collect();
        logarithmic_center_count(&degrees)
    });
    if let Some(e) = expected {
        if e != centers as i64 && !real_only && box_radius.is_none() {
            warnings.push(format!("found {centers} center candidates, the generic count is {e}"));
        }
    }
    #[derive(Serialize)]
    struct Body<'a> {
        degree: u32,
        count: usize,
        center_candidates: usize,
        expected_centers: Option<i64>,
        residual_tol: f64,
        points: &'a [crate::foliation::SingularPoint],
    }
    let body = Body {
        degree: fol.degree,
        count: points.len(),
        center_candidates: centers,
        expected_centers: expected,
        residual_tol: cfg.tol_newton,
        points: &points,
    };
    Ok(Outcome::ok(report("singular-points", cfg, warnings, body)?))
}

fn trace_cycle(
    cfg: &RunConfig,
    path: &Path,
    from_critical: Option<usize>,
    from_base: Option<usize>,
    level: &str,
    tpath: Option<&str>,
    radius: Option<f64>,
) -> Result<Outcome> {
    let spec = SpecFile::load(path)?.pencil()?;
    let data = critical_data(&spec)?;
    let fib = Fibration::new(&spec);
    let t = parse_c64(level)?;
    let mut notes = data.warnings.clone();
    let (mut cycle, opts) = match (from_critical, from_base) {
        (Some(i), None) => {
            let cy = vanishing_family(&fib, &data, i, &[t], cfg.vertices)?.remove(0);
            let own = data.points[i].value;
            (cy, TraceOptions::for_data(&spec, &data, Some(own)))
        }
        (None, Some(i)) => {
            let b = data
                .base_points
                .get(i)
                .ok_or_else(|| Error::Invalid(format!("no base point with index {i}")))?;
            let r = radius.unwrap_or_else(|| default_residue_radius(&data, b.point));
            let opts = TraceOptions { target_vertices: cfg.vertices, ..TraceOptions::for_data(&spec, &data, None) };
            (seed_indeterminacy_cycle(&fib, b, i, t, r, cfg.vertices.min(64), &opts)?, opts)
        }
        _ => return Err(Error::Invalid("give exactly one of --from-critical and --from-base".into())),
    };
    if let Some(text) = tpath {
        let p = TPath::parse(text)?;
        let start = p.start().ok_or_else(|| Error::Invalid("empty path".into()))?;
        if (start - t).norm() > 1e-12 * (1.0 + t.norm()) {
            return Err(Error::Invalid(format!("path starts at {start}, not at the seed level {t}")));
        }
        cycle = transport(&fib, &cycle, &p, &opts)?;
    }
    let res = cycle.max_residual(&fib);
    if res > cfg.tol_fiber {
        notes.push(format!("cycle residual {res:.3e} exceeds --tol-fiber {:.3e}", cfg.tol_fiber));
    }
    let mut text = cycle.to_json();
    text.push('\n');
    Ok(Outcome { text, status: Status::Success, notes })
}

fn load_cycle(fib: &Fibration, cfg: &RunConfig, path: &Path, warnings: &mut Vec<String>) -> Result<Cycle> {
    let c = Cycle::from_json(&std::fs::read_to_string(path)?)?;
    let res = c.max_residual(fib);
    if res > cfg.tol_fiber {
        warnings.push(format!("cycle residual {res:.3e} exceeds --tol-fiber {:.3e}", cfg.tol_fiber));
    }
    Ok(c)
}

fn integrate_cmd(cfg: &RunConfig, spec_path: &Path, cycle_path: &Path, form: &str) -> Result<Outcome> {
    let spec = SpecFile::load(spec_path)?.pencil()?;
    let fib = Fibration::new(&spec);
    let mut warnings = spec.warnings.clone();
    let cycle = load_cycle(&fib, cfg, cycle_path, &mut warnings)?;
    let form = RationalForm::parse(form)?;
    let r = integrate(&fib, &form, &cycle, &cfg.quad())?;
    #[derive(Serialize)]
    struct Body {
        value: C64,
        error: f64,
        tol: f64,
        level: C64,
        vertices: usize,
        cycle_residual: f64,
    }
    let body = Body {
        value: r.value,
        error: r.error,
        tol: cfg.tol_quad,
        level: cycle.level,
        vertices: cycle.len(),
        cycle_residual: cycle.max_residual(&fib),
    };
    Ok(Outcome::ok(report("integrate", cfg, warnings, body)?))
}

fn bounds_for(cfg: &RunConfig, g: Option<u32>, p: Option<u32>, default: DecompositionBounds) -> Result<DecompositionBounds> {
    let b = match (g, p) {
        (None, None) => default,
        (g, p) => DecompositionBounds::fixed(g.unwrap_or(default.g_degree), p.unwrap_or(default.p_degree)),
    };
    let top = b.g_degree.max(b.p_degree) + b.max_growth * b.step;
    if top > cfg.degree_limit() {
        return Err(Error::Cap(format!("ansatz degree {top} exceeds the cap {}", cfg.degree_limit())));
    }
    Ok(b)
}

fn melnikov_cmd(
    cfg: &RunConfig,
    path: &Path,
    order: usize,
    levels: &str,
    critical: usize,
    gbound: Option<u32>,
    pbound: Option<u32>,
) -> Result<Outcome> {
    if order == 0 {
        return Err(Error::Invalid("--order must be at least 1".into()));
    }
    let def = SpecFile::load(path)?.deformation()?;
    let levels = parse_levels(levels)?;
    let (fib, cycles, mut warnings) = cycle_family(&def.base, critical, &levels, cfg.vertices)?;
    warnings.extend(def.base.warnings.iter().cloned());
    let q = cfg.quad();
    let mut result = if order == 1 {
        first_melnikov(&def, &fib, &cycles, &q)?
    } else {
        let b = bounds_for(cfg, gbound, pbound, DecompositionBounds::for_order(2, &def.base))?;
        let explicit = (gbound.is_some() || pbound.is_some()).then_some(&b);
        higher_melnikov(&def, &fib, &cycles, order, explicit, cfg.tol_zero, &q)?
    };
    if let Some(z) = cfg.tol_zero {
        result.zero_tol = z;
    }
    warnings.append(&mut result.warnings);
    let warnings = dedup(warnings);
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let body = serde_json::json!({
                "order": result.order,
                "normalization": result.normalization,
                "zero_tol": result.zero_tol,
                "section": result.section,
                "samples": result.samples,
                "chain": result.chain,
                "max_abs": result.max_abs(),
                "vanishes": result.vanishes(),
            });
            Ok(Outcome::ok(report("melnikov", cfg, warnings, body)?))
        }
        f => {
            let mut comments = vec![
                format!(
                    "melnikov order={} normalization={} critical={critical}",
                    result.order,
                    serde_json::to_string(&result.normalization)?.trim_matches('"')
                ),
                format!("config: {}", serde_json::to_string(cfg)?),
                format!("zero_tol: {:e}", result.zero_tol),
                format!("section: {}", result.section),
            ];
            comments.extend(result.chain.iter().map(|c| format!("chain {}: p = {}; g = {}", c.order, c.p, c.g)));
            comments.extend(warnings.iter().map(|w| format!("warning: {w}")));
            let header = ["t_re", "t_im", "M_re", "M_im", "quad_err"];
            Ok(Outcome::ok(table(&header, &result.samples, f, &comments)))
        }
    }
}

fn guide_cycles(cfg: &RunConfig, def: &DeformationSpec, critical: usize, levels: &[C64]) -> Result<(Fibration, Vec<Cycle>, Vec<String>)> {
    cycle_family(&def.base, critical, levels, cfg.vertices)
}

fn melnikov_fd_cmd(
    cfg: &RunConfig,
    path: &Path,
    order: usize,
    levels: &str,
    eps: Option<f64>,
    grid: usize,
    critical: usize,
) -> Result<Outcome> {
    if order == 0 {
        return Err(Error::Invalid("--order must be at least 1".into()));
    }
    let def = SpecFile::load(path)?.deformation()?;
    let levels = parse_levels(levels)?;
    let (fib, cycles, mut warnings) = guide_cycles(cfg, &def, critical, &levels)?;
    warnings.extend(def.hypothesis_warnings());
    let opts = OracleOptions::default();
    #[derive(Serialize)]
    struct Level {
        t: C64,
        /// Estimates of `M_1 … M_k` in the f-parameter convention.
        estimates: Vec<FdEstimate>,
        /// `M_k` in the spec's normalization, valid at the first non-vanishing order.
        normalized: C64,
    }
    let mut out = Vec::new();
    for (t, guide) in levels.iter().zip(&cycles) {
        let mut lower: Vec<C64> = Vec::new();
        let mut ests = Vec::new();
        for k in 1..=order {
            let e = melnikov_fd(&def, &fib, guide, *t, k, &lower, eps, grid, &opts)?;
            lower.push(e.value);
            ests.push(e);
        }
        let v = ests.last().unwrap().value;
        let normalized = match def.normalization {
            Normalization::Df => v,
            Normalization::Dlogf => to_log_convention(v, *t),
        };
        out.push(Level { t: *t, estimates: ests, normalized });
    }
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => {
            let body = serde_json::json!({
                "order": order,
                "normalization": def.normalization,
                "grid": grid,
                "oracle": { "rtol": opts.rtol, "atol": opts.atol, "tube": opts.tube },
                "levels": out,
            });
            Ok(Outcome::ok(report("melnikov-fd", cfg, warnings, body)?))
        }
        f => {
            let rows: Vec<Sample> = out
                .iter()
                .map(|l| Sample { t: l.t, value: l.normalized, error: l.estimates.last().unwrap().error })
                .collect();
            let mut comments = vec![
                format!("melnikov-fd order={order} grid={grid}"),
                format!("config: {}", serde_json::to_string(cfg)?),
            ];
            comments.extend(warnings.iter().map(|w| format!("warning: {w}")));
            let header = ["t_re", "t_im", "M_re", "M_im", "fd_err"];
            Ok(Outcome::ok(table(&header, &rows, f, &comments)))
        }
    }
}

fn holonomy_cmd(
    cfg: &RunConfig,
    path: &Path,
    cycle: Option<&Path>,
    t: &str,
    eps: f64,
    grid: usize,
    critical: usize,
) -> Result<Outcome> {
    if !(eps.is_finite() && eps > 0.0) || grid == 0 {
        return Err(Error::Invalid("--eps must be positive and --grid at least 1".into()));
    }
    let def = SpecFile::load(path)?.deformation()?;
    let t = parse_c64(t)?;
    let mut warnings = def.hypothesis_warnings();
    let (fib, guide) = match cycle {
        Some(p) => {
            let fib = Fibration::new(&def.base);
            let mut c = load_cycle(&fib, cfg, p, &mut warnings)?;
            if (c.level - t).norm() > 1e-12 * (1.0 + t.norm()) {
                let data = critical_data(&def.base)?;
                let opts = TraceOptions::for_data(&def.base, &data, None);
                let path = crate::fibration::plan_path(c.level, t, &opts.avoid, opts.margin)?;
                c = transport(&fib, &c, &path, &opts)?;
            }
            (fib, c)
        }
        None => {
            let (fib, mut cs, w) = guide_cycles(cfg, &def, critical, &[t])?;
            warnings.extend(w);
            (fib, cs.remove(0))
        }
    };
    let opts = OracleOptions::default();
    #[derive(Serialize)]
    struct Row {
        #[serde(flatten)]
        sample: crate::oracle::HolonomySample,
        /// `(h − t)/ε`.
        displacement_over_eps: C64,
    }
    let rows = (0..grid)
        .map(|j| {
            let e = eps * 0.5f64.powi(j as i32);
            let s = holonomy(&def, &fib, &guide, t, e, &opts)?;
            let d = (s.h - t) / e;
            Ok(Row { sample: s, displacement_over_eps: d })
        })
        .collect::<Result<Vec<_>>>()?;
    let body = serde_json::json!({
        "t": t,
        "oracle": { "rtol": opts.rtol, "atol": opts.atol, "tube": opts.tube },
        "samples": rows,
    });
    Ok(Outcome::ok(report("holonomy", cfg, warnings, body)?))
}

fn decompose_cmd(cfg: &RunConfig, path: &Path, form: &str, gbound: Option<u32>, pbound: Option<u32>) -> Result<Outcome> {
    let file = SpecFile::load(path)?;
    let spec = file.pencil()?;
    let norm = file.normalization_for(&spec);
    let w = parse_form(form)?;
    let df = spec.f.degree().unwrap_or(1).max(1);
    let dw = w.degree().unwrap_or(0) + 1;
    let default = DecompositionBounds::for_order(dw.div_ceil(df).max(1), &spec);
    let bounds = bounds_for(cfg, gbound, pbound, default)?;
    let target = norm.divide(&spec, &w);
    let fac = Factors::of(&spec);
    let warnings = spec.warnings.clone();
    match decompose(&target, &spec, norm, &bounds)? {
        DecomposeOutcome::Found(d) => {
            let body = serde_json::json!({
                "feasible": true,
                "normalization": norm,
                "bounds": bounds,
                "g": pole_fn_string(&d.g, &fac),
                "p": pole_fn_string(&d.p, &fac),
                "g_degree": d.g_degree,
                "p_degree": d.p_degree,
                "residual_zero": d.residual_zero,
            });
            Ok(Outcome::ok(report("decompose", cfg, warnings, body)?))
        }
        DecomposeOutcome::Infeasible(c) => {
            let body = serde_json::json!({
                "feasible": false,
                "normalization": norm,
                "bounds": bounds,
                "certificate": c,
            });
            Ok(Outcome { text: report("decompose", cfg, warnings, body)?, status: Status::Infeasible, notes: Vec::new() })
        }
    }
}

fn tangent_cmd(cfg: &RunConfig, path: &Path, form: &str) -> Result<Outcome> {
    let spec = SpecFile::load(path)?.pencil()?;
    let w = parse_form(form)?;
    let warnings = spec.warnings.clone();
    match tangent_membership(&w, &spec)? {
        TangentOutcome::Witness(t) => {
            let check = tangent_form(&spec, &t.p_poly, &t.q_poly) == w;
            let body = serde_json::json!({
                "tangent": true,
                "P": t.p_poly.to_string(),
                "Q": t.q_poly.to_string(),
                "kernel": [spec.f.to_string(), (-&spec.g).to_string()],
                "residual_zero": t.residual_zero && check,
            });
            Ok(Outcome::ok(report("tangent-test", cfg, warnings, body)?))
        }
        TangentOutcome::NotTangent { cokernel_support, lsq_residual } => {
            let body = serde_json::json!({
                "tangent": false,
                "cokernel_support": cokernel_support,
                "lsq_residual": lsq_residual,
            });
            Ok(Outcome { text: report("tangent-test", cfg, warnings, body)?, status: Status::Infeasible, notes: Vec::new() })
        }
    }
}

#[derive(Serialize)]
struct Obstruction {
    n: u32,
    #[serde(rename = "P")]
    value: String,
    zero: bool,
}

#[derive(Serialize)]
struct Jet {
    n: u32,
    f: String,
}

fn obstruction_body<K: Coeff>(
    r: &ObstructionReport<K>,
    coef: impl Fn(&K) -> String + Copy,
    is_zero: impl Fn(&K) -> bool,
) -> (Vec<Obstruction>, Vec<Jet>) {
    let values = r
        .values
        .iter()
        .map(|(n, v)| Obstruction { n: *n, value: coef(v), zero: is_zero(v) })
        .collect();
    let jets = r.jets.iter().map(|(n, f)| Jet { n: *n, f: render_poly(f, coef) }).collect();
    (values, jets)
}

fn center_cmd(
    cfg: &RunConfig,
    path: Option<&Path>,
    max_order: u32,
    symbolic: bool,
    cubic: bool,
    mode: NormalizeMode,
    gauge: &[String],
) -> Result<Outcome> {
    let gauge = parse_gauge(gauge)?;
    if symbolic {
        if max_order > MAX_SYMBOLIC_ORDER {
            return Err(Error::Cap(format!("symbolic runs stop at order {MAX_SYMBOLIC_ORDER}")));
        }
        let w = symbolic_template(cubic);
        let g: Vec<_> = gauge.iter().map(|(m, c)| (*m, crate::algebra::MultiPoly::constant(c.re.clone()))).collect();
        if gauge.iter().any(|(_, c)| !c.is_real()) {
            return Err(Error::Invalid("symbolic gauge constants must be rational".into()));
        }
        let r = obstructions_with_gauge(&w, max_order, &g)?;
        let (values, jets) = obstruction_body(&r, |c| c.to_string(), |c| c.is_zero());
        let body = serde_json::json!({
            "mode": "symbolic",
            "template": { "dx": render_poly(&w.dx, |c| c.to_string()), "dy": render_poly(&w.dy, |c| c.to_string()) },
            "max_order": max_order,
            "all_zero": values.iter().all(|o| o.zero),
            "obstructions": values,
            "jets": jets,
        });
        return Ok(Outcome::ok(report("center-obstructions", cfg, Vec::new(), body)?));
    }
    if max_order > MAX_ORDER {
        return Err(Error::Cap(format!("obstructions stop at order {MAX_ORDER}")));
    }
    let path = path.ok_or_else(|| Error::Invalid("--spec is required without --symbolic".into()))?;
    let fol = SpecFile::load(path)?.foliation()?;
    let warnings = fol.warnings.clone();
    match normalize_linear_part(&fol.omega, mode)? {
        Germ::Exact(g) => {
            let r = obstructions_with_gauge(&g.omega, max_order, &gauge)?;
            let (values, jets) = obstruction_body(&r, |c| format!("{}", BivarPoly::constant(c.clone())), |c| c.is_zero());
            let body = serde_json::json!({
                "mode": "exact",
                "linear_map": g.linear_map.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "k": g.k.to_string(),
                "normalized": { "dx": g.omega.dx.to_string(), "dy": g.omega.dy.to_string() },
                "max_order": max_order,
                "all_zero": values.iter().all(|o| o.zero),
                "obstructions": values,
                "jets": jets,
            });
            Ok(Outcome::ok(report("center-obstructions", cfg, warnings, body)?))
        }
        Germ::Float { germ, condition } => {
            let gauge_c: Vec<_> = gauge.iter().map(|(m, c)| (*m, c.to_c64())).collect();
            let r = obstructions_with_gauge(&germ.omega, max_order, &gauge_c)?;
            let (worst, tol) = float_center_residual(&fol.omega.map_coeffs(|c| c.to_c64()), max_order)?;
            let (values, jets) = obstruction_body(&r, c64_text, |c| c.norm() <= tol);
            let body = serde_json::json!({
                "mode": "float",
                "condition": condition,
                "max_abs": worst,
                "tol": tol,
                "max_order": max_order,
                "all_zero": worst <= tol,
                "obstructions": values,
                "jets": jets,
            });
            Ok(Outcome::ok(report("center-obstructions", cfg, warnings, body)?))
        }
    }
}

fn count_zeros_cmd(cfg: &RunConfig, input: &Path, segment: [f64; 2], t0: Option<f64>, max_gap: Option<f64>) -> Result<Outcome> {
    let (samples, recorded) = read_samples(&std::fs::read_to_string(input)?)?;
    let zero_tol = cfg.tol_zero.or(recorded).unwrap_or(1e-8);
    let r = count_zeros(&samples, segment, t0, zero_tol, max_gap)?;
    let body = serde_json::json!({
        "count": r.zeros.len(),
        "zero_tol": zero_tol,
        "report": r,
    });
    Ok(Outcome::ok(report("count-zeros", cfg, r.warnings.clone(), body)?))
}

/// Writes the outcome to `--out` or standard output; notes go to standard error.
pub fn emit(cfg: &RunConfig, o: &Outcome) -> Result<()> {
    for n in &o.notes {
        eprintln!("warning: {n}");
    }
    match &cfg.out {
        Some(p) => std::fs::write(p, &o.text)?,
        None => print!("{}", o.text),
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|o| emit(&cli.config, &o).map(|_| o.status)) {
        Ok(s) => s.code(),
        Err(Error::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
