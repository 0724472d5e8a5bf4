use symsage::program::{
    BuildOptions, CanonicalProgram, ConicProgram, Instance, Objective, OriginPlacement,
    SupportOracle,
};
use symsage::solver::{residuals, solve, SolveStatus, SolverConfig};
use symsage::{family_instance, Exponent, Family, Mode, PermutationGroup, Signomial};

fn canonical(inst: &Instance, mode: Mode) -> CanonicalProgram {
    ConicProgram::build(inst, mode, BuildOptions::default())
        .unwrap()
        .canonicalize()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn linear_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `min_x Σ c_k e^{⟨d_k, x⟩}` for positive `c_k`, by damped Newton. The
/// function is convex, so the stationary point is the global minimum.
fn convex_min(terms: &[(Vec<f64>, f64)], n: usize) -> f64 {
    let value = |x: &[f64]| -> f64 {
        terms
            .iter()
            .map(|(d, c)| c * d.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp())
            .sum()
    };
    let mut x = vec![0.0; n];
    for _ in 0..200 {
        let mut g = vec![0.0; n];
        let mut h = vec![vec![0.0; n]; n];
        for (d, c) in terms {
            let w = c * d.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().exp();
            for i in 0..n {
                g[i] += w * d[i];
                for j in 0..n {
                    h[i][j] += w * d[i] * d[j];
                }
            }
        }
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-13 {
            break;
        }
        for (i, row) in h.iter_mut().enumerate() {
            row[i] += 1e-14;
        }
        let step = linear_solve(h, g.iter().map(|v| -v).collect());
        let f0 = value(&x);
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if value(&trial) <= f0 + 0.25 * t * slope || t < 1e-12 {
                x = trial;
                break;
            }
            t *= 0.5;
        }
    }
    value(&x)
}

/// Independent bound for a signomial with exactly one negative term `β`:
/// `f − λ` is nonnegative iff `min_x Σ_{α≠β} c_α e^{⟨α−β,x⟩} ≥ |c_β|`,
/// where the origin carries `c₀ − λ`. Found by a grid scan and bisection.
fn bisection_bound(f: &Signomial) -> f64 {
    let n = f.dim();
    let origin = Exponent::zeros(n);
    let (beta, cb) = f
        .terms()
        .find(|(_, c)| *c < 0.0)
        .map(|(e, c)| (e.to_f64(), c))
        .unwrap();
    assert_eq!(f.terms().filter(|(_, c)| *c < 0.0).count(), 1);
    let c0 = f.coefficient(&origin);
    let feasible = |lambda: f64| -> bool {
        if c0 - lambda < 0.0 {
            return false;
        }
        let mut terms: Vec<(Vec<f64>, f64)> = f
            .terms()
            .filter(|(e, c)| *c > 0.0 && **e != origin)
            .map(|(e, c)| {
                (
                    e.to_f64().iter().zip(&beta).map(|(a, b)| a - b).collect(),
                    c,
                )
            })
            .collect();
        if c0 - lambda > 0.0 {
            terms.push((beta.iter().map(|b| -b).collect(), c0 - lambda));
        }
        convex_min(&terms, n) >= -cb
    };
    let mut lo = -10.0;
    assert!(feasible(lo));
    while feasible(lo + 0.05) {
        lo += 0.05;
    }
    let mut hi = lo + 0.05;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn e(v: &[i64]) -> Exponent {
    Exponent::from_ints(v.iter().copied())
}

#[test]
fn bound_matches_bisection_oracle() {
    let mut cases: Vec<(Signomial, PermutationGroup)> = Vec::new();
    for n in [2, 3] {
        let inst = family_instance(Family::F1, n, Objective::Bound).unwrap();
        cases.push((
            inst.to_signomial(0.0).unwrap(),
            PermutationGroup::symmetric(n),
        ));
    }
    let custom = [
        vec![
            (e(&[4, 0]), 1.0),
            (e(&[0, 4]), 0.5),
            (e(&[-2, -2]), 2.0),
            (e(&[1, 1]), -1.5),
        ],
        vec![
            (e(&[3, 0]), 1.0),
            (e(&[0, 3]), 1.0),
            (e(&[-1, -1]), 1.0),
            (e(&[1, 0]), -2.0),
        ],
        vec![
            (e(&[2]), 0.5),
            (e(&[-2]), 0.5),
            (e(&[1]), -1.0),
            (e(&[0]), 0.25),
        ],
    ];
    for terms in custom {
        let n = terms[0].0.dim();
        cases.push((
            Signomial::from_terms(n, terms).unwrap(),
            PermutationGroup::trivial(n),
        ));
    }
    for (f, g) in cases {
        let oracle = bisection_bound(&f);
        let inst = Instance::from_signomial(
            &f,
            &g,
            Objective::Bound,
            SupportOracle::Free,
            OriginPlacement::Auto,
        )
        .unwrap();
        for mode in [Mode::Reduced, Mode::Standard] {
            let r = solve(&canonical(&inst, mode), &SolverConfig::default()).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!(
                (r.objective - oracle).abs() <= 1e-3,
                "{mode}: solver {} vs oracle {oracle}",
                r.objective
            );
        }
    }
}

#[test]
fn optimal_points_meet_the_tolerance() {
    let cfg = SolverConfig::default();
    for (family, n) in [
        (Family::F1, 4),
        (Family::F2, 4),
        (Family::F3, 3),
        (Family::F4, 30),
        (Family::G, 3),
    ] {
        let inst = family_instance(family, n, Objective::Bound).unwrap();
        for mode in [Mode::Reduced, Mode::Standard] {
            let p = canonical(&inst, mode);
            let r = solve(&p, &cfg).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            let again = residuals(&p, &r.x);
            assert_eq!(again, r.residuals);
            assert!(
                again.max() <= cfg.feasibility_tol,
                "{family}_{n} {mode}: {again:?}"
            );
        }
    }
}

#[test]
fn relaxing_a_row_never_lowers_the_bound() {
    for (family, n) in [(Family::F1, 3), (Family::G, 2)] {
        let inst = family_instance(family, n, Objective::Bound).unwrap();
        let p = canonical(&inst, Mode::Reduced);
        let base = solve(&p, &SolverConfig::default()).unwrap().objective;
        for i in 0..p.inequalities.len() {
            let mut q = p.clone();
            q.inequalities[i].rhs += 0.1;
            let r = solve(&q, &SolverConfig::default()).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!(
                r.objective >= base - 1e-7,
                "row {i}: {} < {base}",
                r.objective
            );
        }
    }
}

#[test]
fn objective_scaling_scales_the_optimum() {
    let inst = family_instance(Family::G, 2, Objective::Bound).unwrap();
    let p = canonical(&inst, Mode::Reduced);
    let base = solve(&p, &SolverConfig::default()).unwrap();
    for s in [0.5, 3.0] {
        let mut q = p.clone();
        q.objective.iter_mut().for_each(|c| *c *= s);
        let r = solve(&q, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, base.status);
        assert!((r.objective - s * base.objective).abs() <= 1e-6 * s.max(1.0));
    }
}

#[test]
fn infeasible_membership_is_reported() {
    // The negative term lies outside the convex hull of the positive ones.
    let f =
        Signomial::from_terms(1, vec![(e(&[1]), 1.0), (e(&[2]), 1.0), (e(&[3]), -1.0)]).unwrap();
    let inst = Instance::from_signomial(
        &f,
        &PermutationGroup::trivial(1),
        Objective::Membership,
        SupportOracle::Free,
        OriginPlacement::Auto,
    )
    .unwrap();
    let r = solve(&canonical(&inst, Mode::Standard), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert!(r.ray.is_some());
}

#[test]
fn exported_program_round_trips() {
    let inst = family_instance(Family::F2, 3, Objective::Bound).unwrap();
    let program = ConicProgram::build(&inst, Mode::Reduced, BuildOptions::default()).unwrap();
    let text = program.export_json();
    let back = CanonicalProgram::from_json(&text).unwrap();
    assert_eq!(back, program.canonicalize());
    let a = solve(&back, &SolverConfig::default()).unwrap();
    let b = solve(&program.canonicalize(), &SolverConfig::default()).unwrap();
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.x, b.x);
}
