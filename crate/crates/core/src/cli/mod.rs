//! Command-line front end: ansatz ingestion, the `verify`, `classify`,
//! `derive`, `integrate` and `report-forms` commands, and JSON reports.
//!
//! Exit codes: 0 success, 1 a check failed (residuals above tolerance,
//! uncertified or impossible derivation), 2 input error.

mod document;
mod report;

pub use document::{parse_closure, AnsatzDocument, DocError, DocOptions};
pub use report::{digest, ClassEntry, FlowEntry, NearlyParallelEntry, Report, TrajectoryEntry};

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::exterior::Form;
use crate::expr::{Expr, Rational};
use crate::flows::{
    derive_flow, integrate, residuals_along, DeriveOptions, DerivativeSource, FlowSystem, LambdaChoice, StepControl,
};
use crate::frames::AnsatzFrame;
use crate::structures::{
    builtin_ansatz, g2_fundamental_form, hermitian_forms, sign_difference, spin7_form, BuiltinParams,
    ReferenceSystem, Spin7Mode, StructureKind, BUILTIN_NAMES,
};
use crate::torsion::{classify, torsion_forms, SampleOptions};

pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "holonomy", version, about = "G2 and Spin(7) structures on warped-like ansaetze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the closure conditions; exit 1 if residuals exceed the tolerance.
    Verify(CommonArgs),
    /// Membership in the torsion classes.
    Classify(CommonArgs),
    /// Derive the first-order flow equivalent to the closure conditions.
    Derive(CommonArgs),
    /// Integrate a flow and monitor the torsion along the trajectory.
    Integrate(IntegrateArgs),
    /// Print the canonical structure forms.
    ReportForms(FormsArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Ansatz document.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub ansatz: Option<PathBuf>,
    /// Built-in ansatz name.
    #[arg(long)]
    pub builtin: Option<String>,
    /// g2 or spin7; defaults to the ansatz declaration.
    #[arg(long)]
    pub structure: Option<StructureKind>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// none, derived, or a file of `du/dt = rhs` lines.
    #[arg(long)]
    pub closure: Option<String>,
    /// Number of sample points [default: 100].
    #[arg(long)]
    pub points: Option<usize>,
    /// Residual tolerance [default: 1e-8].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sampling seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// auto, one scale for every su2 block, or a comma-separated list.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial values, e.g. `a=1,b=1`.
    #[arg(long)]
    pub initial: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    /// Fixed RK4 step; adaptive Dormand-Prince otherwise.
    #[arg(long, conflicts_with = "adaptive")]
    pub step: Option<f64>,
    /// Local error tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub adaptive: f64,
    /// Write the trajectory CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FormsArgs {
    #[arg(long)]
    pub structure: StructureKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code and the text destined for stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

struct Input {
    frame: AnsatzFrame,
    kind: StructureKind,
    reference: Option<ReferenceSystem>,
    source: Vec<u8>,
    points: usize,
    tol: f64,
    seed: u64,
    lambda: Option<Vec<Rational>>,
}

fn parse_lambda(text: &str, blocks: usize) -> Result<Option<Vec<Rational>>, Failure> {
    if text.trim() == "auto" {
        return Ok(None);
    }
    let vals: Vec<Rational> = text
        .split(',')
        .map(|t| t.trim().parse::<Rational>().map_err(|_| input_error(format!("bad --lambda entry `{}`", t.trim()))))
        .collect::<Result<_, _>>()?;
    match vals.len() {
        1 => Ok(Some(vec![vals[0]; blocks])),
        n if n == blocks => Ok(Some(vals)),
        n => Err(input_error(format!("--lambda gives {n} scales for {blocks} su2 blocks"))),
    }
}

fn load_input(args: &CommonArgs) -> Result<Input, Failure> {
    let (frame, kind, reference, source, doc_opts) = match (&args.input.ansatz, &args.input.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
            let doc = AnsatzDocument::parse(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            let kind = args.input.structure.or(doc.structure).ok_or_else(|| {
                input_error("no structure given: use --structure or a [structure] section".to_string())
            })?;
            let mut doc = doc;
            doc.structure = Some(kind);
            let frame = doc.to_frame().map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            (frame, kind, None, text.into_bytes(), doc.options.clone())
        }
        (None, Some(name)) => {
            let b = builtin_ansatz(name, &BuiltinParams::default()).map_err(|e| {
                input_error(format!("{e}; available: {}", BUILTIN_NAMES.join(", ")))
            })?;
            let kind = args.input.structure.unwrap_or(b.kind);
            if kind.dim() != b.frame.dim() {
                return Err(input_error(format!(
                    "builtin {name} has {} frame elements; {kind} needs {}",
                    b.frame.dim(),
                    kind.dim()
                )));
            }
            (b.frame, kind, b.reference, format!("builtin:{name}").into_bytes(), DocOptions::default())
        }
        (None, None) => return Err(input_error("one of --ansatz or --builtin is required")),
    };
    let lambda_text = args.lambda.clone().or(doc_opts.lambda).unwrap_or_else(|| "auto".into());
    let lambda = parse_lambda(&lambda_text, frame.coframe().lambdas().len())?;
    let frame = match &lambda {
        Some(l) => frame.with_lambdas(l).map_err(|e| input_error(e.to_string()))?,
        None => frame,
    };
    let tol = args.tol.or(doc_opts.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(input_error("--tol must be positive"));
    }
    let points = args.points.or(doc_opts.points).unwrap_or(DEFAULT_POINTS);
    if points == 0 {
        return Err(input_error("--points must be at least 1"));
    }
    Ok(Input {
        frame,
        kind,
        reference,
        source,
        points,
        tol,
        seed: args.seed.or(doc_opts.seed).unwrap_or(DEFAULT_SEED),
        lambda,
    })
}

enum Closure {
    None,
    Derived,
    File(PathBuf, Vec<u8>),
}

fn closure_arg(args: &CommonArgs, default: &str) -> Result<Closure, Failure> {
    let text = args.closure.clone().unwrap_or_else(|| default.to_string());
    Ok(match text.as_str() {
        "none" => Closure::None,
        "derived" => Closure::Derived,
        path => {
            let p = PathBuf::from(path);
            let bytes = std::fs::read(&p).map_err(|e| input_error(format!("cannot read closure {path}: {e}")))?;
            Closure::File(p, bytes)
        }
    })
}

fn closure_tag(c: &Closure) -> Vec<u8> {
    match c {
        Closure::None => b"none".to_vec(),
        Closure::Derived => b"derived".to_vec(),
        Closure::File(_, bytes) => [b"file:".as_slice(), bytes].concat(),
    }
}

fn rationals(l: &[Rational]) -> Vec<String> {
    l.iter().map(|r| r.to_string()).collect()
}

fn digest_of(command: &str, input: &Input, closure: &Closure, extra: &[&[u8]]) -> String {
    let kind = input.kind.name().as_bytes();
    let lambda = input.lambda.as_ref().map(|l| rationals(l).join(",")).unwrap_or_else(|| "auto".into());
    let settings = format!("points={} tol={:e} seed={}", input.points, input.tol, input.seed);
    let tag = closure_tag(closure);
    let mut parts: Vec<&[u8]> =
        vec![command.as_bytes(), &input.source, kind, lambda.as_bytes(), settings.as_bytes(), &tag];
    parts.extend_from_slice(extra);
    digest(&parts)
}

fn derive_options(input: &Input) -> DeriveOptions {
    DeriveOptions {
        lambda: match &input.lambda {
            Some(l) => LambdaChoice::Fixed(l.clone()),
            None => LambdaChoice::Auto,
        },
        seed: input.seed,
        reference: input.reference.clone(),
        ..DeriveOptions::default()
    }
}

/// Resolves the closure. Derivation failures are check failures (exit 1)
/// reported through `Err(Some(message))`.
fn resolve_closure(input: &Input, closure: &Closure) -> Result<Option<FlowSystem>, Result<String, Failure>> {
    match closure {
        Closure::None => Ok(None),
        Closure::Derived => derive_flow(&input.frame, input.kind, &derive_options(input))
            .map(Some)
            .map_err(|e| Ok(format!("derivation failed: {e}"))),
        Closure::File(path, bytes) => {
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Err(input_error(format!("{} is not UTF-8", path.display()))))?;
            let mut flow = parse_closure(&text, &input.frame)
                .map_err(|e| Err(input_error(format!("{}: {e}", path.display()))))?;
            flow.lambdas = input.frame.coframe().lambdas();
            Ok(Some(flow))
        }
    }
}

fn flow_entry(flow: &FlowSystem) -> FlowEntry {
    let d = flow.derivation.as_ref();
    FlowEntry {
        variable: flow.variable.clone(),
        unknowns: flow.unknowns.clone(),
        rhs: flow.render().lines().map(str::to_string).collect(),
        leftovers_ok: flow.leftovers_ok,
        selection: d.map(|d| d.selection.name().to_string()),
        reference_matches: d
            .filter(|d| !d.reference.is_empty())
            .map(|d| d.reference.iter().map(|m| (m.unknown.clone(), m.matches)).collect()),
    }
}

fn torsion_failure(e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

/// Shared body of `verify`, `classify` and `derive`.
fn analyse(command: &str, args: &CommonArgs, default_closure: &str) -> Result<(i32, Report), Failure> {
    let input = load_input(args)?;
    let closure = closure_arg(args, default_closure)?;
    let mut report = Report::new(
        command,
        digest_of(command, &input, &closure, &[]),
        input.kind.name(),
        input.tol,
        input.seed,
        input.points,
    );
    report.lambda = input.lambda.as_ref().map(|l| rationals(l));
    let flow = match resolve_closure(&input, &closure) {
        Ok(f) => f,
        Err(Ok(message)) => {
            report.status = "fail".into();
            report.error = Some(message);
            return Ok((1, report));
        }
        Err(Err(f)) => return Err(f),
    };
    if let Some(f) = &flow {
        report.lambda = Some(rationals(&f.lambdas));
        report.flow = Some(flow_entry(f));
    }
    let torsion = torsion_forms(&input.frame, input.kind, flow.as_ref(), SampleOptions { points: input.points, seed: input.seed })
        .map_err(torsion_failure)?;
    if report.lambda.is_none() {
        report.lambda = Some(rationals(&torsion.lambdas));
    }
    for (name, stats) in torsion.names.iter().zip(torsion.residuals()) {
        report.residuals.insert(format!("{name}_max"), report::clean(stats.max));
    }
    let classes = classify(&torsion, input.tol).map_err(torsion_failure)?;
    report.set_classes(&classes);
    let failed = match command {
        "verify" => torsion.max_residual() > input.tol,
        "derive" => !flow.as_ref().is_some_and(|f| f.leftovers_ok),
        _ => false,
    };
    if failed {
        report.status = "fail".into();
    }
    Ok((i32::from(failed), report))
}

fn parse_initial(text: &str, unknowns: &[String]) -> Result<Vec<f64>, Failure> {
    let mut vals: BTreeMap<String, f64> = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| input_error(format!("--initial entry `{part}` is not name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| input_error(format!("--initial value `{}` is not a number", v.trim())))?;
        vals.insert(k.trim().to_string(), v);
    }
    let out = unknowns
        .iter()
        .map(|u| vals.remove(u).ok_or_else(|| input_error(format!("--initial has no value for `{u}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = vals.keys().next() {
        return Err(input_error(format!("--initial names `{extra}`, which is not an unknown")));
    }
    Ok(out)
}

fn run_integrate(args: &IntegrateArgs) -> Result<(i32, Report), Failure> {
    let common = &args.common;
    let input = load_input(common)?;
    let closure = closure_arg(common, "derived")?;
    if matches!(closure, Closure::None) {
        return Err(input_error("integrate needs a closure: derived or a file"));
    }
    let control = match args.step {
        Some(h) if h > 0.0 => StepControl::Fixed { h },
        Some(_) => return Err(input_error("--step must be positive")),
        None if args.adaptive > 0.0 => StepControl::Adaptive { tol: args.adaptive },
        None => return Err(input_error("--adaptive must be positive")),
    };
    let settings = format!("{} {} {} {:?} {:?}", args.initial, args.from, args.to, args.step, args.adaptive);
    let mut report = Report::new(
        "integrate",
        digest_of("integrate", &input, &closure, &[settings.as_bytes()]),
        input.kind.name(),
        input.tol,
        input.seed,
        input.points,
    );
    let flow = match resolve_closure(&input, &closure) {
        Ok(Some(f)) => f,
        Ok(None) => unreachable!("closure none rejected above"),
        Err(Ok(message)) => {
            report.status = "fail".into();
            report.error = Some(message);
            return Ok((1, report));
        }
        Err(Err(f)) => return Err(f),
    };
    report.lambda = Some(rationals(&flow.lambdas));
    report.flow = Some(flow_entry(&flow));
    let y0 = parse_initial(&args.initial, &flow.unknowns)?;
    let traj = match integrate(&flow, &y0, (args.from, args.to), control) {
        Ok(t) => t,
        Err(e) => {
            report.status = "fail".into();
            report.error = Some(e.to_string());
            return Ok((1, report));
        }
    };
    let series = residuals_along(&traj, &input.frame, input.kind, DerivativeSource::Stored).map_err(torsion_failure)?;
    for (name, m) in crate::torsion::torsion_names(input.kind).iter().zip(&series.per_form) {
        report.residuals.insert(format!("{name}_max"), report::clean(*m));
    }
    let meta = traj.meta.as_ref();
    report.trajectory = Some(TrajectoryEntry {
        method: meta.map_or("unknown", |m| m.method.as_str()).to_string(),
        samples: traj.len(),
        start: traj.t.first().copied().unwrap_or(args.from),
        end: traj.t.last().copied().unwrap_or(args.from),
        truncated: meta.is_some_and(|m| m.truncated.is_some()),
    });
    if let Some(path) = &args.csv {
        let per_point: Vec<f64> = series.points.iter().map(|p| p.1).collect();
        std::fs::write(path, traj.to_csv(Some(&per_point)))
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
        report.trajectory_csv_path = Some(path.display().to_string());
    }
    let failed = series.stats.max > input.tol;
    if failed {
        report.status = "fail".into();
    }
    Ok((i32::from(failed), report))
}

fn expr_form(f: &Form<Rational>) -> Form<Expr> {
    f.map(|r| Expr::constant(*r))
}

fn render_lines(f: &Form<Rational>) -> Vec<String> {
    expr_form(f).render().lines().map(str::to_string).collect()
}

fn run_forms(args: &FormsArgs) -> Report {
    let kind = args.structure;
    let mut report = Report::new(
        "report-forms",
        digest(&[b"report-forms", kind.name().as_bytes()]),
        kind.name(),
        0.0,
        0,
        0,
    );
    match kind {
        StructureKind::G2 => {
            let phi: Form<Rational> = g2_fundamental_form();
            let star = phi.hodge_star(Default::default());
            let (omega, psi_plus, psi_minus) = hermitian_forms::<Rational>();
            report.forms.insert("phi".into(), render_lines(&phi));
            report.forms.insert("star_phi".into(), render_lines(&star));
            report.forms.insert("omega".into(), render_lines(&omega));
            report.forms.insert("psi_plus".into(), render_lines(&psi_plus));
            report.forms.insert("psi_minus".into(), render_lines(&psi_minus));
        }
        StructureKind::Spin7 => {
            let omega: Form<Rational> = spin7_form(Spin7Mode::FromG2);
            let bonan: Form<Rational> = spin7_form(Spin7Mode::BonanLiteral);
            report.forms.insert("Omega".into(), render_lines(&omega));
            report.forms.insert("Omega_bonan".into(), render_lines(&bonan));
            let diff = sign_difference(&omega, &bonan)
                .into_iter()
                .map(|(b, x, y)| format!("{b}: {x} vs {y}"))
                .collect();
            report.forms.insert("sign_difference".into(), diff);
        }
    }
    report
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<String, Failure> {
    let json = report.to_json();
    match out {
        Some(path) => {
            std::fs::write(path, &json).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(json),
    }
}

/// Runs one command line (including the program name) and returns its
/// outcome without touching the process state.
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 2, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let result = match &cli.command {
        Command::Verify(a) => analyse("verify", a, "none").map(|r| (r, a.out.as_ref())),
        Command::Classify(a) => analyse("classify", a, "none").map(|r| (r, a.out.as_ref())),
        Command::Derive(a) => analyse("derive", a, "derived").map(|r| (r, a.out.as_ref())),
        Command::Integrate(a) => run_integrate(a).map(|r| (r, a.common.out.as_ref())),
        Command::ReportForms(a) => Ok(((0, run_forms(a)), a.out.as_ref())),
    };
    let finish = |code: i32, report: &Report, out: Option<&PathBuf>| match emit(report, out) {
        Ok(stdout) => {
            let stderr = report.error.clone().map(|e| format!("error: {e}\n")).unwrap_or_default();
            Outcome { code, stdout, stderr }
        }
        Err(f) => Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) },
    };
    match result {
        Ok(((code, report), out)) => finish(code, &report, out),
        Err(f) => Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_argument_forms() {
        assert_eq!(parse_lambda("auto", 2).unwrap(), None);
        assert_eq!(parse_lambda("2", 2).unwrap(), Some(vec![Rational::from_integer(2); 2]));
        assert_eq!(
            parse_lambda("1, -1/2", 2).unwrap(),
            Some(vec![Rational::from_integer(1), Rational::new(-1, 2)])
        );
        assert_eq!(parse_lambda("1,2,3", 2).unwrap_err().code, 2);
    }

    #[test]
    fn initial_values_follow_unknown_order() {
        let u = vec!["a".to_string(), "b".to_string()];
        assert_eq!(parse_initial("b=2, a=1", &u).unwrap(), vec![1.0, 2.0]);
        assert!(parse_initial("a=1", &u).is_err());
        assert!(parse_initial("a=1,b=2,c=3", &u).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let o = run_command(["holonomy", "verify"]);
        assert_eq!(o.code, 2);
        let o = run_command(["holonomy", "verify", "--builtin", "nope"]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("available"));
    }
}
