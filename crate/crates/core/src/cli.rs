//! The `regcalc` command line: one job per invocation.
//!
//! Exit codes: 0 when the job succeeds and every check passes, 1 when a
//! hypothesis or assertion fails, 2 on input errors.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::extreal::ExtReal;
use crate::lhospital::{
    self, common_domain, Conclusion, HypStatus, Oracle, RuleConfig, RuleError, RuleReport,
};
use crate::limit::LimitEngine;
use crate::lsmeasure::{self, Integrand, LSMeasure, LsError};
use crate::mvt::{self, MvtError};
use crate::regulated::deffile::{self, Definitions};
use crate::regulated::{end_behavior, interior_grid, Endpoint, RegError, Regulated};
use crate::sequence::Sequence;
use crate::stieltjes::{self, DerivError, Options};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Point values and one-sided limits.
    Eval,
    /// One-sided limits at points, or the limit at an endpoint.
    Limits,
    /// The Stieltjes derivative D_alpha f at points.
    Dalpha,
    /// Rolle or Cauchy witnesses, or the sandwich bound.
    Mvt,
    /// L'Hospital's rule at an endpoint.
    Lhospital,
    /// The monotone rule.
    Monotone,
    /// Stolz–Cesàro for two sequences.
    Stolz,
    /// Integral against d alpha over (s, t).
    Integrate,
    /// h⁻(t) - h⁺(s) against the integral of D_alpha h.
    Ftc,
    /// L'Hospital's rule (or the monotone rule) for integrals.
    Lsrule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MvtKind {
    Rolle,
    Cauchy,
    Sandwich,
}

#[derive(Debug, Parser)]
#[command(name = "regcalc", version, about = "Calculus for regulated functions")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Definition file (functions and sequences).
    pub file: PathBuf,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// Points, comma separated or repeated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// `a`, `b`, `+inf`, `-inf`, or a finite end of the common domain.
    #[arg(long, allow_hyphen_values = true)]
    pub endpoint: Option<String>,
    /// Integrand: a function name, or `D(name)` for D_alpha of it.
    #[arg(long)]
    pub u: Option<String>,
    #[arg(long)]
    pub v: Option<String>,
    /// Relative tolerance for agreement between a rule and its oracle.
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Write (x, f⁻, f⁺, D_alpha f) samples to this file.
    #[arg(long)]
    pub plot_csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<MvtKind>,
    /// Probe horizon for `stolz`.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// Skip the classical one-sided-derivative shortcut in `dalpha`.
    #[arg(long)]
    pub no_shortcut: bool,
    /// `lsrule`: the monotone rule from the left end instead of the limit.
    #[arg(long)]
    pub monotone: bool,
    /// `monotone`: limit of f at the zero end, subtracted before the check.
    #[arg(long, allow_hyphen_values = true)]
    pub shift_f: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub shift_g: Option<f64>,
}

/// A failed job: input errors exit with 2, computational failures with 1.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Compute(String),
}

impl From<RegError> for Failure {
    fn from(e: RegError) -> Self {
        match e {
            RegError::OutOfDomain { .. } | RegError::Invalid { .. } => Failure::Input(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<DerivError> for Failure {
    fn from(e: DerivError) -> Self {
        match e {
            DerivError::Reg(r) => r.into(),
            e => Failure::Compute(e.to_string()),
        }
    }
}

impl From<RuleError> for Failure {
    fn from(e: RuleError) -> Self {
        match e {
            RuleError::Reg(r) => r.into(),
            RuleError::Input(s) => Failure::Input(s),
        }
    }
}

impl From<MvtError> for Failure {
    fn from(e: MvtError) -> Self {
        match e {
            MvtError::Deriv(d) => d.into(),
            e => Failure::Compute(e.to_string()),
        }
    }
}

impl From<LsError> for Failure {
    fn from(e: LsError) -> Self {
        match e {
            LsError::Reg(r) => r.into(),
            LsError::Input(s) => Failure::Input(s),
            e => Failure::Compute(e.to_string()),
        }
    }
}

/// What a job produced.
pub struct Outcome {
    pub json: Value,
    pub text: String,
    pub success: bool,
}

/// Runs the command line and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            let text = if cli.json { serde_json::to_string_pretty(&out.json).expect("reports serialize") + "\n" } else { out.text };
            // A closed pipe (e.g. `| head`) is not an error of ours.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            if out.success {
                0
            } else {
                1
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("failed: {msg}");
            1
        }
    }
}

struct Job<'a> {
    cli: &'a Cli,
    defs: Definitions,
}

impl<'a> Job<'a> {
    fn function(&self, flag: &str, name: &Option<String>) -> Result<&dyn Regulated, Failure> {
        let name = name.as_deref().ok_or_else(|| Failure::Input(format!("`{}` needs --{flag}", self.command())))?;
        self.defs
            .function(name)
            .map(|f| f as &dyn Regulated)
            .ok_or_else(|| Failure::Input(format!("{}: no function named `{name}`", self.cli.file.display())))
    }

    fn sequence(&self, flag: &str, name: &Option<String>) -> Result<&Sequence, Failure> {
        let name = name.as_deref().ok_or_else(|| Failure::Input(format!("`{}` needs --{flag}", self.command())))?;
        self.defs
            .sequence(name)
            .ok_or_else(|| Failure::Input(format!("{}: no sequence named `{name}`", self.cli.file.display())))
    }

    fn integrand(&self, flag: &str, spec: &Option<String>, alpha: &'a dyn Regulated) -> Result<Integrand<'_>, Failure> {
        let text = spec.as_deref().ok_or_else(|| Failure::Input(format!("`{}` needs --{flag}", self.command())))?;
        match text.strip_prefix("D(").and_then(|r| r.strip_suffix(')')) {
            Some(inner) => Ok(Integrand::DAlpha { f: self.function(flag, &Some(inner.trim().to_string()))?, alpha }),
            None => Ok(Integrand::Function(self.function(flag, spec)?)),
        }
    }

    fn command(&self) -> String {
        format!("{:?}", self.cli.command).to_lowercase()
    }

    fn interval(&self) -> Result<(f64, f64), Failure> {
        match (self.cli.s, self.cli.t) {
            (Some(s), Some(t)) if s < t => Ok((s, t)),
            (Some(s), Some(t)) => Err(Failure::Input(format!("need s < t, got s = {s}, t = {t}"))),
            _ => Err(Failure::Input(format!("`{}` needs --s and --t", self.command()))),
        }
    }

    fn points(&self) -> Result<&[f64], Failure> {
        if self.cli.x.is_empty() {
            return Err(Failure::Input(format!("`{}` needs --x", self.command())));
        }
        Ok(&self.cli.x)
    }

    fn endpoint(&self, fs: &[&dyn Regulated]) -> Result<Endpoint, Failure> {
        let text = self.cli.endpoint.as_deref().ok_or_else(|| Failure::Input(format!("`{}` needs --endpoint", self.command())))?;
        let (a, b) = common_domain(fs)?;
        match text.trim() {
            "a" => return Ok(Endpoint::A),
            "b" => return Ok(Endpoint::B),
            _ => {}
        }
        let v: ExtReal = text.parse().map_err(|_| Failure::Input(format!("bad endpoint `{text}`")))?;
        if v == a {
            Ok(Endpoint::A)
        } else if v == b {
            Ok(Endpoint::B)
        } else {
            Err(Failure::Input(format!("endpoint {v} is not an end of the common domain ({a}, {b})")))
        }
    }

    fn config(&self) -> RuleConfig {
        let mut cfg = RuleConfig::default();
        if let Some(r) = self.cli.rtol {
            cfg.agree.rtol = r;
        }
        if let Some(a) = self.cli.atol {
            cfg.agree.atol = a;
        }
        cfg
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let defs = deffile::load(&cli.file).map_err(|e| Failure::Input(format!("{}: {e}", cli.file.display())))?;
    let job = Job { cli, defs };
    let out = match cli.command {
        Command::Eval => eval(&job)?,
        Command::Limits => limits(&job)?,
        Command::Dalpha => dalpha(&job)?,
        Command::Mvt => mvt_job(&job)?,
        Command::Lhospital => {
            let (f, g, alpha) = (job.function("f", &cli.f)?, job.function("g", &cli.g)?, job.function("alpha", &cli.alpha)?);
            let e = job.endpoint(&[f, g, alpha])?;
            report_outcome(lhospital::lhospital_limit(f, g, alpha, e, &job.config())?)
        }
        Command::Monotone => {
            let (f, g, alpha) = (job.function("f", &cli.f)?, job.function("g", &cli.g)?, job.function("alpha", &cli.alpha)?);
            let e = job.endpoint(&[f, g, alpha])?;
            let r = match (cli.shift_f, cli.shift_g) {
                (None, None) => lhospital::monotone_certify(f, g, alpha, e, &job.config())?,
                (a, b) => lhospital::monotone_certify_shifted(f, g, alpha, e, a.unwrap_or(0.0), b.unwrap_or(0.0), &job.config())?,
            };
            report_outcome(r)
        }
        Command::Stolz => {
            let (f, g) = (job.sequence("f", &cli.f)?, job.sequence("g", &cli.g)?);
            report_outcome(lhospital::stolz_limit(f, g, cli.n, &job.config())?)
        }
        Command::Integrate => integrate(&job)?,
        Command::Ftc => ftc(&job)?,
        Command::Lsrule => {
            let alpha = job.function("alpha", &cli.alpha)?;
            let (u, v) = (job.integrand("u", &cli.u, alpha)?, job.integrand("v", &cli.v, alpha)?);
            let r = if cli.monotone {
                lsmeasure::monotone_integral(&u, &v, alpha)?
            } else {
                let mut fs: Vec<&dyn Regulated> = vec![alpha];
                for i in [&u, &v] {
                    fs.push(match i {
                        Integrand::Function(f) | Integrand::DAlpha { f, .. } => *f,
                    });
                }
                let e = job.endpoint(&fs)?;
                lsmeasure::lhospital_integral(&u, &v, alpha, e, &job.config())?
            };
            report_outcome(r)
        }
    };
    if let Some(path) = &cli.plot_csv {
        plot_csv(&job, path)?;
    }
    Ok(out)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn eval(job: &Job) -> Result<Outcome, Failure> {
    let f = job.function("f", &job.cli.f)?;
    let mut rows = Vec::new();
    let mut text = String::new();
    for &x in job.points()? {
        let value = f.value(x)?;
        let p = f.one_sided(x)?;
        let _ = writeln!(text, "{}({x}) = {value}   left {}   right {}", f.name(), p.left, p.right);
        rows.push(json!({ "x": x, "value": value, "left": p.left, "right": p.right }));
    }
    Ok(Outcome { json: json!({ "function": f.name(), "points": rows }), text, success: true })
}

fn limits(job: &Job) -> Result<Outcome, Failure> {
    let f = job.function("f", &job.cli.f)?;
    let mut text = String::new();
    let mut rows = Vec::new();
    for &x in &job.cli.x {
        let p = f.one_sided(x)?;
        let _ = writeln!(text, "{0}⁻({x}) = {1}   {0}⁺({x}) = {2}", f.name(), p.left, p.right);
        rows.push(json!({ "x": x, "left": p.left, "right": p.right, "jump": p.jump() }));
    }
    let mut end = Value::Null;
    if job.cli.endpoint.is_some() {
        let e = job.endpoint(&[f])?;
        let est = end_behavior(f, e, &LimitEngine::default());
        let _ = writeln!(text, "limit of {}⁻ at {}: {}", f.name(), lhospital::endpoint_label(e), lhospital::limit_evidence(&est));
        end = json!({ "endpoint": lhospital::endpoint_label(e), "estimate": est });
    }
    if job.cli.x.is_empty() && end.is_null() {
        return Err(Failure::Input("`limits` needs --x or --endpoint".into()));
    }
    let success = end.get("estimate").is_none_or(|e| e.get("value").is_some_and(|v| !v.is_null()));
    Ok(Outcome { json: json!({ "function": f.name(), "points": rows, "endpoint": end }), text, success })
}

fn dalpha(job: &Job) -> Result<Outcome, Failure> {
    let (f, alpha) = (job.function("f", &job.cli.f)?, job.function("alpha", &job.cli.alpha)?);
    let opts = if job.cli.no_shortcut { Options::numeric() } else { Options::default() };
    let mut text = String::new();
    let mut rows = Vec::new();
    for &x in job.points()? {
        let r = stieltjes::d_alpha_with(f, alpha, x, &opts)?;
        let _ = writeln!(text, "D_{} {}({x}) = {}   [{:?}]", alpha.name(), f.name(), r.value, r.method);
        rows.push(json!({ "x": x, "result": r }));
    }
    Ok(Outcome { json: json!({ "f": f.name(), "alpha": alpha.name(), "points": rows }), text, success: true })
}

fn mvt_job(job: &Job) -> Result<Outcome, Failure> {
    let (f, alpha) = (job.function("f", &job.cli.f)?, job.function("alpha", &job.cli.alpha)?);
    let (s, t) = job.interval()?;
    let kind = job.cli.kind.unwrap_or(if job.cli.g.is_some() { MvtKind::Cauchy } else { MvtKind::Rolle });
    let attempt = match kind {
        MvtKind::Rolle => mvt::rolle_witness(f, alpha, s, t).map(|w| (to_json(&w), witness_text("Rolle", &w), true)),
        MvtKind::Cauchy => {
            let g = job.function("g", &job.cli.g)?;
            mvt::cauchy_witness(f, g, alpha, s, t).map(|w| (to_json(&w), witness_text("Cauchy", &w), true))
        }
        MvtKind::Sandwich => {
            let g = job.function("g", &job.cli.g)?;
            mvt::sandwich_check(f, g, alpha, s, t).map(|r| {
                let mut text = format!("{} <= {} <= {}   ok = {}\n", r.lo, r.mid, r.hi, r.ok);
                if let Some(m) = r.monotone {
                    let _ = writeln!(text, "monotone ratio: between {} and {}   ok = {}", m.ratio_s, m.ratio_t, m.ok);
                }
                (to_json(&r), text, r.ok && r.monotone.is_none_or(|m| m.ok))
            })
        }
    };
    match attempt {
        Ok((json, text, success)) => Ok(Outcome { json, text, success }),
        Err(e @ (MvtError::NotFound { .. } | MvtError::Precondition(_))) => {
            let msg = e.to_string();
            Ok(Outcome { json: json!({ "error": msg }), text: format!("{msg}\n"), success: false })
        }
        Err(e) => Err(e.into()),
    }
}

fn witness_text(name: &str, w: &mvt::WitnessPair) -> String {
    format!(
        "{name} witnesses u = {}, v = {}: values {} and {}, product {} (resolution {})\n",
        w.u, w.v, w.lhs_value, w.rhs_value, w.product, w.grid_resolution
    )
}

fn integrate(job: &Job) -> Result<Outcome, Failure> {
    let alpha = job.function("alpha", &job.cli.alpha)?;
    let spec = job.cli.u.clone().or_else(|| job.cli.f.clone());
    let phi = job.integrand("u", &spec, alpha)?;
    let (s, t) = job.interval()?;
    let i = LSMeasure::new(alpha).integrate(&phi, s, t)?;
    let text = format!(
        "∫_({s}, {t}) {} d{} = {}   (density {}, atoms {} over {} atoms, {} cells)\n",
        phi.name(),
        alpha.name(),
        i.value,
        i.density,
        i.atomic,
        i.atoms,
        i.cells
    );
    Ok(Outcome { json: to_json(&i), text, success: true })
}

fn ftc(job: &Job) -> Result<Outcome, Failure> {
    let (h, alpha) = (job.function("f", &job.cli.f)?, job.function("alpha", &job.cli.alpha)?);
    let (s, t) = job.interval()?;
    match lsmeasure::ftc_check(h, alpha, s, t) {
        Ok(r) => {
            let text = format!("lhs {} rhs {} residual {:.3e} ok = {}\n", r.lhs, r.rhs, r.residual, r.ok);
            Ok(Outcome { json: to_json(&r), text, success: r.ok })
        }
        Err(e @ LsError::AcViolation { .. }) => {
            let msg = e.to_string();
            Ok(Outcome { json: json!({ "error": msg }), text: format!("{msg}\n"), success: false })
        }
        Err(e) => Err(e.into()),
    }
}

fn report_outcome(r: RuleReport) -> Outcome {
    let success = r.all_verified() && r.agree;
    Outcome { json: to_json(&r), text: report_text(&r), success }
}

pub fn report_text(r: &RuleReport) -> String {
    let mut t = format!("rule: {}\n", r.rule);
    for h in &r.hypotheses {
        let status = match h.status {
            HypStatus::VerifiedOnGrid => "verified-on-grid",
            HypStatus::Failed => "FAILED",
            HypStatus::Assumed => "assumed",
        };
        let _ = writeln!(t, "  [{status}] {}: {}", h.name, h.evidence);
    }
    if let Some(c) = r.case {
        let _ = writeln!(t, "case: {c:?}");
    }
    match &r.conclusion {
        Some(Conclusion::Limit(a)) => {
            let _ = writeln!(t, "conclusion: A = {a}");
        }
        Some(Conclusion::Monotone(c)) => {
            let _ = writeln!(t, "conclusion: {}{:?}", if c.strict { "strictly " } else { "" }, c.direction);
        }
        None => t.push_str("conclusion: none\n"),
    }
    match &r.oracle {
        Some(Oracle::Limit(e)) => {
            let _ = writeln!(t, "oracle: {}", lhospital::limit_evidence(e));
        }
        Some(Oracle::Grid(v)) => {
            let _ = writeln!(t, "oracle: {} points, {} violations of {:?} (largest {:.3e})", v.points, v.violations, v.direction, v.max_violation);
        }
        None => t.push_str("oracle: none\n"),
    }
    let _ = writeln!(t, "agree: {}", r.agree);
    t
}

/// Rows `x, f⁻, f⁺, D_αf` over `[s, t]` or the domain (cut at the horizon).
fn plot_csv(job: &Job, path: &PathBuf) -> Result<(), Failure> {
    let f = job.function("f", &job.cli.f)?;
    let alpha = match &job.cli.alpha {
        Some(_) => Some(job.function("alpha", &job.cli.alpha)?),
        None => None,
    };
    let (a, b) = match (job.cli.s, job.cli.t) {
        (Some(s), Some(t)) => (ExtReal::Finite(s), ExtReal::Finite(t)),
        _ => f.domain(),
    };
    let horizon = f.horizon().unwrap_or(f64::INFINITY);
    let mut out = String::from("x,f_left,f_right,dalpha_f\n");
    for x in interior_grid(a, b, 512).into_iter().filter(|&x| x <= horizon) {
        let p = f.one_sided(x).ok();
        let d = alpha.and_then(|al| stieltjes::d_alpha(f, al, x).ok()).map(|r| r.value);
        let cell = |v: Option<ExtReal>| v.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(out, "{x},{},{},{}", cell(p.map(|p| p.left)), cell(p.map(|p| p.right)), cell(d));
    }
    std::fs::write(path, out).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}
