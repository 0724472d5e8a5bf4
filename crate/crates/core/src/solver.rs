//! Exponential-cone solves via Clarabel's interior-point method, plus an
//! independent residual check of the returned point.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::program::{AffineExpr, CanonicalProgram};

/// Environment variable overriding both solver tolerances.
pub const TOLERANCE_ENV: &str = "SYMSAGE_TOL";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: u32,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-8,
            gap_tol: 1e-8,
            max_iterations: 100_000,
            verbose: false,
        }
    }
}

impl SolverConfig {
    /// Defaults, with tolerances taken from `SYMSAGE_TOL` when it is set to a
    /// positive number.
    pub fn from_env() -> Self {
        let mut cfg = SolverConfig::default();
        if let Some(t) = std::env::var(TOLERANCE_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
        {
            cfg.feasibility_tol = t;
            cfg.gap_tol = t;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feasibility_tol > 0.0 && self.gap_tol > 0.0) {
            return Err(SageError::Solver("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalTrouble,
}

/// Largest relative violations. Linear rows are scaled by
/// `1 + |b| + Σ|a_j x_j|`; cone violations are distance estimates scaled by
/// `1 + ‖(x, y, z)‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equality: f64,
    pub inequality: f64,
    pub nonnegativity: f64,
    pub cone: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.equality
            .max(self.inequality)
            .max(self.nonnegativity)
            .max(self.cone)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Value of the maximized objective at `x` (NaN when no point).
    pub objective: f64,
    pub x: Vec<f64>,
    pub residuals: ResidualReport,
    pub iterations: u32,
    pub solve_time: f64,
    /// Dual ray for infeasible programs, primal ray for unbounded ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray: Option<Vec<f64>>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

fn row_residual(terms: &[(usize, f64)], rhs: f64, x: &[f64]) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut scale = rhs.abs();
    for &(j, a) in terms {
        lhs += a * x[j];
        scale = scale.max((a * x[j]).abs());
    }
    (lhs - rhs, 1.0 + scale)
}

/// Distance estimate from `(x, y, z)` to the exponential cone.
pub fn exp_cone_violation(x: f64, y: f64, z: f64) -> f64 {
    let inside =
        (y > 0.0 && z > 0.0 && y * (x / y).exp() <= z) || (y == 0.0 && x <= 0.0 && z >= 0.0);
    if inside {
        return 0.0;
    }
    let mut best = (x * x + y * y + z * z).sqrt();
    // face y = 0
    let face = (x.max(0.0).powi(2) + y.powi(2) + z.min(0.0).powi(2)).sqrt();
    best = best.min(face);
    if y > 0.0 {
        let zz = y * (x / y).exp();
        if zz.is_finite() {
            best = best.min(zz - z);
        }
        if z > 0.0 {
            let xx = y * (z / y).ln();
            best = best.min(x - xx);
        }
    }
    best.max(0.0)
}

pub fn residuals(p: &CanonicalProgram, x: &[f64]) -> ResidualReport {
    let mut r = ResidualReport::default();
    for row in &p.equalities {
        let (d, s) = row_residual(&row.terms, row.rhs, x);
        r.equality = r.equality.max(d.abs() / s);
    }
    for row in &p.inequalities {
        let (d, s) = row_residual(&row.terms, row.rhs, x);
        r.inequality = r.inequality.max(d.max(0.0) / s);
    }
    for (v, &xj) in p.variables.iter().zip(x) {
        if v.nonneg {
            r.nonnegativity = r.nonnegativity.max((-xj).max(0.0));
        }
    }
    for c in &p.exp_cones {
        let (a, b, d) = (c.x.eval(x), c.y.eval(x), c.z.eval(x));
        let v = exp_cone_violation(a, b, d) / (1.0 + (a * a + b * b + d * d).sqrt());
        r.cone = r.cone.max(v);
    }
    r
}

/// Variables already forced nonnegative by appearing alone as the `y` or `z`
/// entry of some cone.
fn cone_implied_nonneg(p: &CanonicalProgram) -> Vec<bool> {
    let mut implied = vec![false; p.variables.len()];
    let mark = |e: &AffineExpr, implied: &mut Vec<bool>| {
        if let [(j, a)] = e.terms.as_slice() {
            if *a > 0.0 && e.constant == 0.0 {
                implied[*j] = true;
            }
        }
    };
    for c in &p.exp_cones {
        mark(&c.y, &mut implied);
        mark(&c.z, &mut implied);
    }
    implied
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn push(&mut self, terms: &[(usize, f64)], sign: f64, rhs: f64) {
        let row = self.b.len();
        for &(j, a) in terms {
            if a != 0.0 {
                self.i.push(row);
                self.j.push(j);
                self.v.push(sign * a);
            }
        }
        self.b.push(rhs);
    }
}

fn empty_result(status: SolveStatus, n: usize, started: Instant) -> SolveResult {
    SolveResult {
        status,
        objective: f64::NAN,
        x: vec![0.0; n],
        residuals: ResidualReport::default(),
        iterations: 0,
        solve_time: started.elapsed().as_secs_f64(),
        ray: None,
    }
}

/// Solve `max objective·x` over the canonical program.
pub fn solve(p: &CanonicalProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    p.validate()?;
    let started = Instant::now();
    let n = p.variables.len();
    let tol = cfg.feasibility_tol;

    // presolve: empty rows are either trivially satisfied or prove
    // infeasibility
    let nonempty = |terms: &[(usize, f64)]| terms.iter().any(|&(_, a)| a != 0.0);
    let mut rows = Rows {
        i: Vec::new(),
        j: Vec::new(),
        v: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();
    let mut zeros = 0;
    for row in &p.equalities {
        if nonempty(&row.terms) {
            rows.push(&row.terms, 1.0, row.rhs);
            zeros += 1;
        } else if row.rhs.abs() > tol {
            return Ok(empty_result(SolveStatus::Infeasible, n, started));
        }
    }
    if zeros > 0 {
        cones.push(SupportedConeT::ZeroConeT(zeros));
    }
    let mut nonneg = 0;
    for row in &p.inequalities {
        if nonempty(&row.terms) {
            rows.push(&row.terms, 1.0, row.rhs);
            nonneg += 1;
        } else if row.rhs < -tol {
            return Ok(empty_result(SolveStatus::Infeasible, n, started));
        }
    }
    let implied = cone_implied_nonneg(p);
    for (j, v) in p.variables.iter().enumerate() {
        if v.nonneg && !implied[j] {
            rows.push(&[(j, 1.0)], -1.0, 0.0);
            nonneg += 1;
        }
    }
    if nonneg > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg));
    }
    for c in &p.exp_cones {
        for e in [&c.x, &c.y, &c.z] {
            rows.push(&e.terms, -1.0, e.constant);
        }
        cones.push(SupportedConeT::ExponentialConeT());
    }

    let m = rows.b.len();
    if m == 0 {
        let status = if p.objective.iter().all(|&c| c == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Unbounded
        };
        let mut r = empty_result(status, n, started);
        if status == SolveStatus::Optimal {
            r.objective = 0.0;
        }
        return Ok(r);
    }

    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let q: Vec<f64> = p.objective.iter().map(|c| -c).collect();
    let settings = DefaultSettingsBuilder::default()
        .verbose(cfg.verbose)
        .max_iter(cfg.max_iterations)
        .tol_feas(tol)
        .tol_gap_abs(cfg.gap_tol)
        .tol_gap_rel(cfg.gap_tol)
        .build()
        .map_err(|e| SageError::Solver(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&pmat, &q, &a, &rows.b, &cones, settings)
        .map_err(|e| SageError::Solver(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let x = sol.x.clone();
    let report = residuals(p, &x);
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved if report.max() <= tol => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalTrouble,
    };
    let ray = match status {
        SolveStatus::Infeasible => Some(sol.z.clone()),
        SolveStatus::Unbounded => Some(x.clone()),
        _ => None,
    };
    let objective = if status == SolveStatus::Optimal {
        p.objective.iter().zip(&x).map(|(c, v)| c * v).sum()
    } else {
        f64::NAN
    };
    Ok(SolveResult {
        status,
        objective,
        x,
        residuals: report,
        iterations: sol.iterations,
        solve_time: started.elapsed().as_secs_f64(),
        ray,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{ExpTriple, LinearRow, VariableInfo};

    fn var(name: &str, nonneg: bool) -> VariableInfo {
        VariableInfo {
            name: name.into(),
            nonneg,
        }
    }

    #[test]
    fn pure_lp() {
        let p = CanonicalProgram {
            variables: vec![var("lambda", false)],
            objective: vec![1.0],
            equalities: vec![],
            inequalities: vec![LinearRow {
                terms: vec![(0, 1.0)],
                rhs: 3.0,
            }],
            exp_cones: vec![],
            original_variables: 1,
        };
        let r = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-7, "{}", r.objective);
        let scaled = CanonicalProgram {
            objective: vec![2.5],
            ..p.clone()
        };
        let r2 = solve(&scaled, &SolverConfig::default()).unwrap();
        assert!((r2.objective - 7.5).abs() < 1e-6);
    }

    #[test]
    fn unbounded_lp() {
        let p = CanonicalProgram {
            variables: vec![var("x", false)],
            objective: vec![1.0],
            equalities: vec![],
            inequalities: vec![LinearRow {
                terms: vec![(0, -1.0)],
                rhs: 3.0,
            }],
            exp_cones: vec![],
            original_variables: 1,
        };
        assert_eq!(
            solve(&p, &SolverConfig::default()).unwrap().status,
            SolveStatus::Unbounded
        );
    }

    #[test]
    fn log_epigraph() {
        // maximize x subject to (x, 1, 2) ∈ K_exp, i.e. e^x ≤ 2
        let p = CanonicalProgram {
            variables: vec![var("x", false)],
            objective: vec![1.0],
            equalities: vec![],
            inequalities: vec![],
            exp_cones: vec![ExpTriple {
                x: AffineExpr::new(vec![(0, 1.0)]),
                y: AffineExpr {
                    terms: vec![],
                    constant: 1.0,
                },
                z: AffineExpr {
                    terms: vec![],
                    constant: 2.0,
                },
            }],
            original_variables: 1,
        };
        let r = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 2f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn cone_violation_estimates() {
        assert_eq!(exp_cone_violation(0.0, 1.0, 1.0), 0.0);
        assert_eq!(exp_cone_violation(-1.0, 0.0, 0.0), 0.0);
        assert!(exp_cone_violation(1.0, 1.0, 1.0) > 0.5);
        assert!(exp_cone_violation(0.0, -1.0, 1.0) >= 1.0 - 1e-12);
    }
}
