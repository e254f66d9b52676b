//! Command-line front end. JSON goes to stdout, everything else to stderr.
//!
//! Exit codes: 0 success, 1 a check failed, 2 invalid or resonant input,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{default_tolerance, DEFAULT_PRECISION};
use crate::oracle::{self, LoopSpec};
use crate::params::{parse_rational, parse_rational_list, validate_fc, validate_ghg, FcParams, GhgParams, ParamSource};
use crate::verify::{self, Report, SuiteOptions, System};
use crate::{fc, ghg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const ORACLE_PRECISION: u32 = 128;
const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "hypermono", version, about = "Monodromy of hypergeometric systems in arbitrary precision")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build M₀, M₁, H and λ for ₚF_{p−1}.
    BuildGhg(Flags),
    /// Build M₁, …, M_{m+1}, H and λ for Lauricella's F_C.
    BuildFc(Flags),
    /// Run the identity suite on random or given parameters.
    Verify(Flags),
    /// Continue the series basis numerically and compare with the closed form.
    Oracle(Flags),
    /// Print the Riemann scheme of the rank-p equation.
    Scheme(Flags),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Upper parameters, comma separated rationals.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Lower parameters, comma separated rationals.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Number of F_C variables.
    #[arg(long)]
    m: Option<usize>,
    /// Rank of the ₚF_{p−1} equation.
    #[arg(long)]
    p: Option<usize>,
    /// Working precision in bits.
    #[arg(long)]
    prec: Option<u32>,
    /// Residual tolerance, a decimal such as 1e-40.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Base point of the oracle loops.
    #[arg(long)]
    eps: Option<String>,
    /// Key-value file mirroring the flags; flags given on the command line win.
    #[arg(long)]
    config: Option<String>,
    /// Which system `verify` draws from: ghg or fc.
    #[arg(long)]
    system: Option<String>,
    /// Include the continuation paths in the oracle output.
    #[arg(long)]
    dump_path: bool,
}

impl Flags {
    fn prec(&self, default: u32) -> u32 {
        self.prec.unwrap_or(default)
    }

    fn tol(&self, default: f64) -> Result<f64> {
        match &self.tol {
            None => Ok(default),
            Some(s) => match s.trim().parse::<f64>() {
                Ok(v) if v >= 0.0 => Ok(v),
                _ => Err(Error::Parse(format!("bad tolerance `{s}`"))),
            },
        }
    }

    fn list(&self, which: &str) -> Result<Option<Vec<Rational64>>> {
        let raw = if which == "a" { &self.a } else { &self.b };
        raw.as_deref().map(parse_rational_list).transpose()
    }

    fn ghg_params(&self) -> Result<GhgParams> {
        let a = self.list("a")?.ok_or_else(|| Error::Parse("--a is required".into()))?;
        let b = self.list("b")?.ok_or_else(|| Error::Parse("--b is required".into()))?;
        let params = GhgParams::new(a, b)?;
        if let Some(p) = self.p {
            if p != params.p() {
                return Err(Error::Parse(format!("--p {p} disagrees with {} upper parameters", params.p())));
            }
        }
        Ok(params)
    }

    fn fc_params(&self) -> Result<FcParams> {
        let a = self.list("a")?.ok_or_else(|| Error::Parse("--a is required".into()))?;
        let b = self.list("b")?.ok_or_else(|| Error::Parse("--b is required".into()))?;
        if a.len() != 2 {
            return Err(Error::Parse(format!("F_C takes two upper parameters, got {}", a.len())));
        }
        let params = FcParams::new(a[0], a[1], b)?;
        if let Some(m) = self.m {
            if m != params.m() {
                return Err(Error::Parse(format!("--m {m} disagrees with {} lower parameters", params.m())));
            }
        }
        Ok(params)
    }

    fn system(&self) -> Result<System> {
        match self.system.as_deref() {
            None | Some("ghg") => Ok(System::Ghg),
            Some("fc") => Ok(System::Fc),
            Some(other) => Err(Error::Parse(format!("unknown system `{other}`, expected ghg or fc"))),
        }
    }

    fn eps(&self) -> Result<Rational64> {
        self.eps.as_deref().map(parse_rational).transpose().map(|e| e.unwrap_or_else(oracle::default_eps))
    }
}

fn validated_ghg(flags: &Flags) -> Result<GhgParams> {
    let params = flags.ghg_params()?;
    let v = validate_ghg(&params);
    if v.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(v))
    }
}

fn validated_fc(flags: &Flags) -> Result<FcParams> {
    let params = flags.fc_params()?;
    let v = validate_fc(&params)?;
    if v.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(v))
    }
}

/// Reads `key = value` lines (`#` comments) into `--key value` pairs.
pub fn config_to_args(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(Error::Parse("config files cannot include other config files".into()));
        }
        let value = value.trim();
        if key == "dump-path" {
            match value {
                "" | "true" => out.push("--dump-path".into()),
                "false" => {}
                other => return Err(Error::Parse(format!("config line {}: dump_path = `{other}`", n + 1))),
            }
            continue;
        }
        out.push(format!("--{key}").into());
        out.push(value.into());
    }
    Ok(out)
}

/// Inserts the flags from `--config <path>` right after the subcommand so
/// that explicit flags, which come later, override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, arg) in argv.iter().enumerate() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).map(|p| p.to_string_lossy().into_owned());
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| Error::Parse(format!("config `{path}`: {e}")))?;
    let extra = config_to_args(&text)?;
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn error_json(err: &Error) -> Value {
    let kind = match err {
        Error::InvalidParams(_) => "invalid_params",
        Error::Parse(_) => "parse",
        Error::Domain(_) => "domain",
        Error::MTooLarge { .. } => "m_too_large",
        e if e.is_numeric() => "numeric",
        _ => "error",
    };
    let mut v = json!({ "error": kind, "message": err.to_string() });
    if let Error::InvalidParams(list) = err {
        v["violations"] = json!(list.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    }
    v
}

fn exit_code_for(err: &Error) -> i32 {
    if err.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_INVALID
    }
}

struct Outcome {
    json: Value,
    code: i32,
    summary: String,
}

fn report_outcome(report: Report) -> Outcome {
    let code = if report.all_passed() { EXIT_OK } else { EXIT_CHECK_FAILED };
    let mut summary = report.summary();
    for c in report.failures().take(10) {
        summary.push_str(&format!(
            "\n  FAIL {} residual {} > {:e}",
            c.name,
            c.residual.map(verify::format_residual).unwrap_or_default(),
            c.tolerance
        ));
    }
    Outcome { json: report.to_json(), code, summary }
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::BuildGhg(f) => {
            let params = validated_ghg(f)?;
            let prec = f.prec(DEFAULT_PRECISION);
            let set = ghg::build_circuit_set(&params, prec)?;
            let mut json = set.to_json();
            json["precision_bits"] = json!(prec);
            Ok(Outcome { json, code: EXIT_OK, summary: format!("built rank-{} circuit set at {prec} bits", set.p()) })
        }
        Command::BuildFc(f) => {
            let params = validated_fc(f)?;
            let prec = f.prec(DEFAULT_PRECISION);
            let set = fc::build_circuit_set(&params, prec)?;
            let mut json = set.to_json();
            json["precision_bits"] = json!(prec);
            Ok(Outcome { json, code: EXIT_OK, summary: format!("built {}-variable F_C circuit set at {prec} bits", set.vars()) })
        }
        Command::Scheme(f) => {
            let params = f.ghg_params()?;
            let scheme = ghg::riemann_scheme(&params);
            let mut summary = format!("Riemann scheme, Fuchs relation {}", if scheme.satisfies_fuchs() { "holds" } else { "fails" });
            let violations = validate_ghg(&params);
            if !violations.is_empty() {
                summary.push_str(&format!(" (note: {} non-integrality conditions fail)", violations.len()));
            }
            Ok(Outcome { json: scheme.to_json(), code: EXIT_OK, summary })
        }
        Command::Verify(f) => {
            let prec = f.prec(DEFAULT_PRECISION);
            let tol = f.tol(default_tolerance(prec))?;
            let system = f.system()?;
            if f.a.is_some() || f.b.is_some() {
                let source = match system {
                    System::Ghg => ParamSource::Ghg(validated_ghg(f)?),
                    System::Fc => ParamSource::Fc(validated_fc(f)?),
                };
                return Ok(report_outcome(verify::run_fixed(&source, prec, tol)));
            }
            if f.trials == 0 {
                return Err(Error::Parse("--trials must be at least 1".into()));
            }
            let mut opts = SuiteOptions::new(system, f.trials, f.seed, prec).tolerance(tol).jobs(f.jobs);
            let size = match system {
                System::Ghg => f.p,
                System::Fc => f.m,
            };
            if let Some(s) = size {
                let min = if system == System::Ghg { 2 } else { 1 };
                if s < min || (system == System::Fc && s > fc::FC_BUILD_MAX_M) {
                    return Err(Error::Parse(format!("size {s} is outside the supported range")));
                }
                opts = opts.sizes(s..=s);
            }
            Ok(report_outcome(verify::run_suite(&opts)))
        }
        Command::Oracle(f) => {
            let params = validated_ghg(f)?;
            let prec = f.prec(ORACLE_PRECISION);
            let tol = f.tol(ORACLE_TOLERANCE)?;
            let eps = f.eps()?;
            let run = || -> Result<Outcome> {
                let report = oracle::compare_to_closed_form(&params, prec, tol, eps)?;
                let mut outcome = report_outcome(report);
                if f.dump_path {
                    let (_, p0) = oracle::numeric_monodromy_with_path(&params, &LoopSpec::rho0(eps), prec)?;
                    let (_, p1) = oracle::numeric_monodromy_with_path(&params, &LoopSpec::rho1(eps), prec)?;
                    outcome.json["paths"] = json!({ "rho0": p0.to_json(), "rho1": p1.to_json() });
                }
                Ok(outcome)
            };
            match f.jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Parse(e.to_string()))?
                    .install(run),
                None => run(),
            }
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let emit_error = |err: &Error, stdout: &mut dyn Write, stderr: &mut dyn Write| {
        let _ = writeln!(stderr, "error: {err}");
        let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&error_json(err)).unwrap_or_default());
        exit_code_for(err)
    };
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return emit_error(&e, stdout, stderr),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stderr, "{e}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{e}");
            let err = Error::Parse(e.kind().to_string());
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&error_json(&err)).unwrap_or_default());
            return EXIT_INVALID;
        }
    };
    match dispatch(&cli.command) {
        Ok(outcome) => {
            let _ = writeln!(stderr, "{}", outcome.summary);
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&outcome.json).unwrap_or_default());
            outcome.code
        }
        Err(e) => emit_error(&e, stdout, stderr),
    }
}
