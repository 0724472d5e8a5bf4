use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use symsage::bench::{render_json_lines, render_table, run_benchmark, BenchConfig};
use symsage::certificate::{extract_certificate, verify_certificate, ReducedCertificate};
use symsage::group::parse_group;
use symsage::program::{
    BuildOptions, CanonicalProgram, ConicProgram, Instance, Objective, OriginPlacement,
    SupportOracle,
};
use symsage::signomial::symmetrize;
use symsage::solver::{solve, SolveResult, SolveStatus, SolverConfig};
use symsage::{parse_signomial, Family, Mode, PermutationGroup, SageError, Signomial};

const EXIT_NEGATIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "symsage",
    version,
    about = "SAGE bounds and certificates for signomials, with symmetry reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Largest λ with f − λ in the SAGE cone
    Bound(BoundArgs),
    /// Decide SAGE membership of f
    Member(ProblemArgs),
    /// Predicted program sizes, without solving
    Sizes(SizesArgs),
    /// Run a benchmark family over a range of dimensions
    Bench(BenchArgs),
    /// Reynolds average of f over a group
    Symmetrize(SymmetrizeArgs),
    /// Write the conic program for f
    Export(ExportArgs),
    /// Check a certificate against f
    Verify(VerifyArgs),
    /// Solve an exported program
    Solve(SolveArgs),
}

#[derive(Args)]
struct GroupArgs {
    /// Group document (JSON)
    #[arg(long, conflicts_with = "sym")]
    group: Option<PathBuf>,
    /// Use the full symmetric group on all coordinates
    #[arg(long)]
    sym: bool,
}

#[derive(Args)]
struct ModeArgs {
    /// Unreduced program
    #[arg(long, conflicts_with_all = ["reduced", "both"])]
    standard: bool,
    /// Symmetry-reduced program (default)
    #[arg(long, conflicts_with = "both")]
    reduced: bool,
    /// Run both programs
    #[arg(long)]
    both: bool,
}

impl ModeArgs {
    fn modes(&self) -> Vec<Mode> {
        if self.both {
            vec![Mode::Standard, Mode::Reduced]
        } else if self.standard {
            vec![Mode::Standard]
        } else {
            vec![Mode::Reduced]
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Signomial document (JSON)
    signomial: PathBuf,
    #[command(flatten)]
    group: GroupArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Restrict to the box [L, U]^n
    #[arg(long = "box", num_args = 2, value_names = ["L", "U"], allow_negative_numbers = true)]
    bounds: Option<Vec<f64>>,
    /// Write the certificate of the reduced (or only) solve here
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Accept multiplicities above 2^53
    #[arg(long)]
    allow_inexact_counts: bool,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Maximize δ, the common scale of the negative coefficients, instead of λ
    #[arg(long)]
    maximize_coefficient: bool,
}

#[derive(Args)]
struct SizesArgs {
    signomial: PathBuf,
    #[command(flatten)]
    group: GroupArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Sizes of the bound program instead of the membership program
    #[arg(long)]
    bound: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// f1, f2, f3, f4 or g
    family: Family,
    /// Dimension range `a..b` (inclusive) or a single value
    #[arg(long, value_parser = parse_range)]
    n: (usize, usize),
    #[command(flatten)]
    mode: BenchModeArgs,
    /// Largest n for standard programs of factorial-orbit families
    #[arg(long, default_value_t = symsage::families::DEFAULT_MATERIALIZE_CAP)]
    cap: usize,
    /// Skip certificate verification
    #[arg(long)]
    no_verify: bool,
    /// JSON lines instead of a table
    #[arg(long)]
    json: bool,
    /// Leave timing fields out of JSON output
    #[arg(long, requires = "json")]
    no_timing: bool,
}

#[derive(Args)]
struct BenchModeArgs {
    #[arg(long, conflicts_with = "reduced")]
    standard: bool,
    #[arg(long)]
    reduced: bool,
}

#[derive(Args)]
struct SymmetrizeArgs {
    signomial: PathBuf,
    #[command(flatten)]
    group: GroupArgs,
}

#[derive(Args)]
struct ExportArgs {
    signomial: PathBuf,
    #[arg(long, default_value = "program-json")]
    format: String,
    #[command(flatten)]
    group: GroupArgs,
    #[arg(long, conflicts_with = "reduced")]
    standard: bool,
    #[arg(long)]
    reduced: bool,
    /// Membership program instead of the bound program
    #[arg(long, conflicts_with = "maximize_coefficient")]
    member: bool,
    #[arg(long)]
    maximize_coefficient: bool,
    #[arg(long = "box", num_args = 2, value_names = ["L", "U"], allow_negative_numbers = true)]
    bounds: Option<Vec<f64>>,
    #[arg(long)]
    allow_inexact_counts: bool,
    /// Output file (stdout when absent)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    signomial: PathBuf,
    certificate: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    program: PathBuf,
    /// Include the primal point in the output
    #[arg(long)]
    point: bool,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if a > b {
        return Err(format!("empty range {s}"));
    }
    Ok((a, b))
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<SageError>() {
            Some(SageError::Solver(_)) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure { code, error }
    }
}

impl From<SageError> for Failure {
    fn from(e: SageError) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CliResult = Result<u8, Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_signomial(path: &Path) -> anyhow::Result<Signomial> {
    parse_signomial(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_group(args: &GroupArgs, n: usize) -> anyhow::Result<PermutationGroup> {
    if let Some(path) = &args.group {
        let g = parse_group(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        if g.degree() != n {
            return Err(SageError::DimensionMismatch {
                expected: n,
                got: g.degree(),
            }
            .into());
        }
        Ok(g)
    } else if args.sym {
        Ok(PermutationGroup::symmetric(n))
    } else {
        Ok(PermutationGroup::trivial(n))
    }
}

fn support(bounds: &Option<Vec<f64>>, n: usize) -> SupportOracle {
    match bounds.as_deref() {
        Some([l, u]) => SupportOracle::cube(n, *l, *u),
        _ => SupportOracle::Free,
    }
}

fn exit_for(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_NEGATIVE,
        _ => EXIT_NUMERICAL,
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

struct Solved {
    mode: Mode,
    program: ConicProgram,
    result: SolveResult,
}

fn summary(s: &Solved) -> Value {
    let size = s.program.size();
    json!({
        "mode": s.mode,
        "status": s.result.status,
        "value": (s.result.status == SolveStatus::Optimal).then_some(s.result.objective),
        "variables": size.variables,
        "constraints": size.constraints(),
        "residual": s.result.residuals.max(),
        "iterations": s.result.iterations,
        "solve_time": s.result.solve_time,
    })
}

fn run_problem(args: &ProblemArgs, objective: Objective) -> CliResult {
    let f = load_signomial(&args.signomial)?;
    let n = f.dim();
    let group = load_group(&args.group, n)?;
    let label = objective.parameter_name().unwrap_or("member");

    if objective == Objective::Membership && f.terms().all(|(_, c)| c >= 0.0) {
        if args.json {
            println!(
                "{}",
                json!({"member": true, "reason": "no negative coefficients"})
            );
        } else {
            println!("member: yes (no negative coefficients)");
        }
        return Ok(0);
    }

    let instance = match Instance::from_signomial(
        &f,
        &group,
        objective,
        support(&args.bounds, n),
        OriginPlacement::Auto,
    ) {
        Err(SageError::EmptyInner) if objective == Objective::Membership => {
            if args.json {
                println!(
                    "{}",
                    json!({"member": false, "reason": "no positive terms"})
                );
            } else {
                println!("member: no (negative terms without positive terms)");
            }
            return Ok(EXIT_NEGATIVE);
        }
        other => other?,
    };
    let opts = BuildOptions {
        allow_inexact_counts: args.allow_inexact_counts,
    };
    let cfg = SolverConfig::from_env();
    let mut solved = Vec::new();
    for mode in args.mode.modes() {
        let program = ConicProgram::build(&instance, mode, opts)?;
        let result = solve(&program.canonicalize(), &cfg)?;
        solved.push(Solved {
            mode,
            program,
            result,
        });
    }

    let code = solved
        .iter()
        .map(|s| exit_for(s.result.status))
        .max()
        .unwrap_or(0);
    if let Some(path) = &args.cert {
        let last = solved.last().expect("at least one mode");
        if last.result.status == SolveStatus::Optimal {
            let cert = extract_certificate(&last.result, &last.program)?;
            fs::write(path, cert.to_json())
                .with_context(|| format!("writing {}", path.display()))?;
        } else {
            log::warn!("no certificate: status {:?}", last.result.status);
        }
    }

    if args.json {
        let runs: Vec<Value> = solved.iter().map(summary).collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "objective": objective, "runs": runs }))
                .expect("json")
        );
    } else {
        for s in &solved {
            let size = s.program.size();
            let status = format!("{:?}", s.result.status).to_lowercase();
            if objective == Objective::Membership {
                let verdict = match s.result.status {
                    SolveStatus::Optimal => "yes",
                    SolveStatus::Infeasible => "no",
                    _ => "unknown",
                };
                println!("{}: member {verdict} ({status}, {size})", s.mode);
            } else if s.result.status == SolveStatus::Optimal {
                println!(
                    "{}: {label} = {:.6} ({size}, {:.3}s)",
                    s.mode, s.result.objective, s.result.solve_time
                );
            } else {
                println!("{}: {status} ({size})", s.mode);
            }
        }
    }
    Ok(code)
}

fn run_sizes(args: &SizesArgs) -> CliResult {
    let f = load_signomial(&args.signomial)?;
    let group = load_group(&args.group, f.dim())?;
    let objective = if args.bound {
        Objective::Bound
    } else {
        Objective::Membership
    };
    let instance = Instance::from_signomial(
        &f,
        &group,
        objective,
        SupportOracle::Free,
        OriginPlacement::Auto,
    )?;
    let modes = if args.mode.both {
        vec![Mode::Reduced, Mode::Standard]
    } else {
        args.mode.modes()
    };
    let mut rows = Vec::new();
    for mode in modes {
        let p = instance.predict_sizes(mode)?;
        if args.json {
            rows.push(json!({
                "mode": mode,
                "variables": p.variables.to_string(),
                "constraints": p.constraints(),
                "equalities": p.equalities,
                "inequalities": p.inequalities,
            }));
        } else {
            println!(
                "{mode}: {} variables, {} constraints",
                p.variables,
                p.constraints()
            );
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("json"));
    }
    Ok(0)
}

fn run_bench(args: &BenchArgs) -> CliResult {
    let modes = if args.mode.standard {
        vec![Mode::Standard]
    } else if args.mode.reduced {
        vec![Mode::Reduced]
    } else {
        vec![Mode::Standard, Mode::Reduced]
    };
    let cfg = BenchConfig {
        modes,
        solver: SolverConfig::from_env(),
        verify: !args.no_verify,
        standard_cap: args.cap,
    };
    let rows = run_benchmark(args.family, args.n.0..=args.n.1, &cfg)?;
    if args.json {
        print!("{}", render_json_lines(&rows, !args.no_timing));
    } else {
        println!("{}", args.family);
        print!("{}", render_table(&rows));
    }
    let mut code = 0;
    for row in &rows {
        if row.bounds_agree() == Some(false) {
            log::error!("n = {}: standard and reduced bounds disagree", row.n);
            code = code.max(EXIT_NUMERICAL);
        }
        for m in [&row.standard, &row.reduced].into_iter().flatten() {
            code = code.max(exit_for(m.status));
            if m.certificate_verified == Some(false) {
                code = code.max(EXIT_NEGATIVE);
            }
        }
    }
    Ok(code)
}

fn run_symmetrize(args: &SymmetrizeArgs) -> CliResult {
    let f = load_signomial(&args.signomial)?;
    let group = load_group(&args.group, f.dim())?;
    println!("{}", symmetrize(&f, &group)?.to_json());
    Ok(0)
}

fn run_export(args: &ExportArgs) -> CliResult {
    if args.format != "program-json" {
        return Err(
            anyhow::anyhow!("unknown format {:?} (expected program-json)", args.format).into(),
        );
    }
    let f = load_signomial(&args.signomial)?;
    let group = load_group(&args.group, f.dim())?;
    let objective = if args.member {
        Objective::Membership
    } else if args.maximize_coefficient {
        Objective::MaximizeCoefficient
    } else {
        Objective::Bound
    };
    let instance = Instance::from_signomial(
        &f,
        &group,
        objective,
        support(&args.bounds, f.dim()),
        OriginPlacement::Auto,
    )?;
    let mode = if args.standard {
        Mode::Standard
    } else {
        Mode::Reduced
    };
    let opts = BuildOptions {
        allow_inexact_counts: args.allow_inexact_counts,
    };
    let program = ConicProgram::build(&instance, mode, opts)?;
    write_or_print(args.output.as_deref(), &program.export_json())?;
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> CliResult {
    let f = load_signomial(&args.signomial)?;
    let cert = ReducedCertificate::from_json(&read(&args.certificate)?)
        .with_context(|| format!("parsing {}", args.certificate.display()))?;
    let report = verify_certificate(&f, &cert, args.tol)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        for c in &report.checks {
            let mark = if c.passed { "ok" } else { "FAIL" };
            println!("{:<22} {:>10.3e}  {mark}", c.name, c.max_violation);
        }
        println!(
            "{}",
            if report.passed {
                "certificate valid"
            } else {
                "certificate rejected"
            }
        );
    }
    Ok(if report.passed { 0 } else { EXIT_NEGATIVE })
}

fn run_solve(args: &SolveArgs) -> CliResult {
    let program = CanonicalProgram::from_json(&read(&args.program)?)
        .with_context(|| format!("parsing {}", args.program.display()))?;
    let result = solve(&program, &SolverConfig::from_env())?;
    let mut value = serde_json::to_value(&result).expect("json");
    if !args.point {
        value.as_object_mut().expect("object").remove("x");
        value.as_object_mut().expect("object").remove("ray");
    }
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
    Ok(exit_for(result.status))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Bound(a) => {
            let objective = if a.maximize_coefficient {
                Objective::MaximizeCoefficient
            } else {
                Objective::Bound
            };
            run_problem(&a.problem, objective)
        }
        Command::Member(a) => run_problem(a, Objective::Membership),
        Command::Sizes(a) => run_sizes(a),
        Command::Bench(a) => run_bench(a),
        Command::Symmetrize(a) => run_symmetrize(a),
        Command::Export(a) => run_export(a),
        Command::Verify(a) => run_verify(a),
        Command::Solve(a) => run_solve(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
