//! Benchmark harness: build, solve and verify standard and reduced programs
//! for the benchmark families, and render the results.

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::certificate::{extract_certificate, verify_certificate};
use crate::combinatorics::Mode;
use crate::error::{Result, SageError};
use crate::families::{family_instance, Family, DEFAULT_MATERIALIZE_CAP};
use crate::program::{BuildOptions, ConicProgram, Instance, Objective};
use crate::solver::{solve, SolveStatus, SolverConfig};

/// Tolerance used when the harness verifies certificates.
pub const BENCH_VERIFY_TOL: f64 = 1e-6;

/// Certificates of signomials with more terms than this are not verified.
pub const VERIFY_TERM_LIMIT: u64 = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub build: f64,
    pub solve: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub mode: Mode,
    pub status: SolveStatus,
    pub bound: Option<f64>,
    pub variables: usize,
    pub constraints: usize,
    pub certificate_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub family: String,
    pub n: usize,
    pub standard: Option<MethodResult>,
    pub reduced: Option<MethodResult>,
}

impl BenchmarkRow {
    /// `|bound_std − bound_sym| ≤ 1e-5·max(1, |bound|)` when both are optimal.
    pub fn bounds_agree(&self) -> Option<bool> {
        let s = self.standard.as_ref()?.bound?;
        let r = self.reduced.as_ref()?.bound?;
        Some((s - r).abs() <= 1e-5 * r.abs().max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub modes: Vec<Mode>,
    pub solver: SolverConfig,
    pub verify: bool,
    /// Standard programs for families with `n!`-element orbits are skipped
    /// above this `n`.
    pub standard_cap: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            modes: vec![Mode::Standard, Mode::Reduced],
            solver: SolverConfig::from_env(),
            verify: true,
            standard_cap: DEFAULT_MATERIALIZE_CAP,
        }
    }
}

/// Build and solve one program. The emitted size must equal the predicted
/// one; a mismatch is an error, not a recorded status.
pub fn run_method(instance: &Instance, mode: Mode, cfg: &BenchConfig) -> Result<MethodResult> {
    let started = Instant::now();
    let program = ConicProgram::build(instance, mode, BuildOptions::default())?;
    let predicted = instance.predict_sizes(mode)?;
    let size = program.size();
    if !size.matches(&predicted) {
        return Err(SageError::InvalidProgram(format!(
            "{mode} program has {size} but the prediction is V={} C={}",
            predicted.variables,
            predicted.constraints()
        )));
    }
    let canonical = program.canonicalize();
    let build = started.elapsed().as_secs_f64();
    let result = solve(&canonical, &cfg.solver)?;
    let solve_time = result.solve_time;
    let total = started.elapsed().as_secs_f64();

    let optimal = result.status == SolveStatus::Optimal;
    let terms: BigUint = instance
        .inner
        .iter()
        .chain(&instance.outer)
        .map(|t| &t.class.size)
        .sum();
    let certificate_verified = if cfg.verify && optimal && terms <= BigUint::from(VERIFY_TERM_LIMIT)
    {
        let cert = extract_certificate(&result, &program)?;
        match instance.to_signomial(0.0) {
            Ok(f) => Some(verify_certificate(&f, &cert, BENCH_VERIFY_TOL)?.passed),
            Err(SageError::OrbitTooLarge { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(MethodResult {
        mode,
        status: result.status,
        bound: optimal.then_some(result.objective),
        variables: size.variables,
        constraints: size.constraints(),
        certificate_verified,
        timing: Some(Timing {
            build,
            solve: solve_time,
            total,
        }),
    })
}

pub fn run_row(family: Family, n: usize, cfg: &BenchConfig) -> Result<BenchmarkRow> {
    let instance = family_instance(family, n, Objective::Bound)?;
    let mut row = BenchmarkRow {
        family: family.name().to_string(),
        n,
        standard: None,
        reduced: None,
    };
    for &mode in &cfg.modes {
        match mode {
            Mode::Standard => {
                if family.has_factorial_orbit() && n > cfg.standard_cap {
                    continue;
                }
                row.standard = Some(run_method(&instance, mode, cfg)?);
            }
            Mode::Reduced => row.reduced = Some(run_method(&instance, mode, cfg)?),
        }
    }
    Ok(row)
}

pub fn run_benchmark(
    family: Family,
    ns: impl IntoIterator<Item = usize>,
    cfg: &BenchConfig,
) -> Result<Vec<BenchmarkRow>> {
    ns.into_iter().map(|n| run_row(family, n, cfg)).collect()
}

fn method_cells(m: Option<&MethodResult>) -> [String; 5] {
    match m {
        None => ["-".into(), "-".into(), "-".into(), "-".into(), "-".into()],
        Some(m) => {
            let t = m.timing.as_ref();
            [
                m.variables.to_string(),
                m.constraints.to_string(),
                t.map(|t| format!("{:.4}", t.solve)).unwrap_or_default(),
                t.map(|t| format!("{:.4}", t.total)).unwrap_or_default(),
                match m.certificate_verified {
                    Some(true) => "ok".into(),
                    Some(false) => "FAIL".into(),
                    None => format!("{:?}", m.status).to_lowercase(),
                },
            ]
        }
    }
}

/// Human-readable table in the layout `dim | bound | standard | reduced`.
pub fn render_table(rows: &[BenchmarkRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>10} | {:>8} {:>8} {:>9} {:>9} {:>5} | {:>8} {:>8} {:>9} {:>9} {:>5}",
        "dim",
        "bound",
        "V_std",
        "C_std",
        "t_s",
        "t_r",
        "cert",
        "V_sym",
        "C_sym",
        "t_s",
        "t_r",
        "cert"
    );
    for row in rows {
        let bound = row
            .reduced
            .as_ref()
            .and_then(|m| m.bound)
            .or_else(|| row.standard.as_ref().and_then(|m| m.bound))
            .map(|b| format!("{b:.4}"))
            .unwrap_or_else(|| "-".into());
        let s = method_cells(row.standard.as_ref());
        let r = method_cells(row.reduced.as_ref());
        let _ = writeln!(
            out,
            "{:>5} {:>10} | {:>8} {:>8} {:>9} {:>9} {:>5} | {:>8} {:>8} {:>9} {:>9} {:>5}",
            row.n, bound, s[0], s[1], s[2], s[3], s[4], r[0], r[1], r[2], r[3], r[4]
        );
    }
    out
}

/// One JSON object per row. With `with_timing = false` the output is
/// reproducible byte for byte.
pub fn render_json_lines(rows: &[BenchmarkRow], with_timing: bool) -> String {
    let mut out = String::new();
    for row in rows {
        let mut row = row.clone();
        if !with_timing {
            for m in [&mut row.standard, &mut row.reduced].into_iter().flatten() {
                m.timing = None;
            }
        }
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}
