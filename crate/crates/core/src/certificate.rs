//! Reduced SAGE certificates: extraction from a solver point, expansion to a
//! full AGE decomposition, and verification that uses no solver state.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::Mode;
use crate::error::{Result, SageError};
use crate::group::{GroupDoc, PermutationGroup};
use crate::program::{ConicProgram, Objective, SupportOracle};
use crate::signomial::{rational_to_f64, Exponent, Signomial};
use crate::solver::{SolveResult, SolveStatus};

pub const CERTIFICATE_VERSION: u32 = 1;
/// Solver noise below this magnitude on nonnegative values is floored to 0.
pub const CLIP_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepEntry {
    pub exponent: Exponent,
    #[serde(with = "crate::bigint_string")]
    pub orbit_size: BigUint,
    /// Coefficient of the orbit at the certified parameter value.
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertClass {
    pub representative: Exponent,
    #[serde(with = "crate::bigint_string")]
    pub size: BigUint,
    pub inner_index: usize,
    pub c: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertBlock {
    pub outer_index: usize,
    pub classes: Vec<CertClass>,
}

/// Per outer representative `β̂`, the values `(c, ν)` on the suborbit
/// classes of `Stab(β̂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCertificate {
    pub version: u32,
    pub mode: Mode,
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    pub group: GroupDoc,
    pub dimension: usize,
    pub support: SupportOracle,
    pub inner: Vec<RepEntry>,
    pub outer: Vec<RepEntry>,
    pub blocks: Vec<CertBlock>,
}

fn clip(v: f64) -> f64 {
    if (-CLIP_THRESHOLD..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Read the certificate off an optimal (or feasible) solve of `program`.
pub fn extract_certificate(
    result: &SolveResult,
    program: &ConicProgram,
) -> Result<ReducedCertificate> {
    if result.status != SolveStatus::Optimal {
        return Err(SageError::Solver(format!(
            "no certificate for status {:?}",
            result.status
        )));
    }
    let meta = &program.meta;
    let x = &result.x;
    let parameter = meta.parameter.map(|p| x[p]);
    let at = |c: &crate::program::Coefficient| c.at(parameter.unwrap_or(0.0));
    let reps = |list: &[crate::program::RepMeta]| {
        list.iter()
            .map(|r| RepEntry {
                exponent: r.exponent.clone(),
                orbit_size: r.orbit_size.clone(),
                coefficient: at(&r.coefficient),
            })
            .collect()
    };
    let blocks = meta
        .blocks
        .iter()
        .map(|b| CertBlock {
            outer_index: b.outer_index,
            classes: b
                .classes
                .iter()
                .map(|cm| CertClass {
                    representative: cm.representative.clone(),
                    size: cm.size.clone(),
                    inner_index: cm.inner_index,
                    c: clip(x[cm.c_var]),
                    nu: clip(x[cm.nu_var]),
                })
                .collect(),
        })
        .collect();
    Ok(ReducedCertificate {
        version: CERTIFICATE_VERSION,
        mode: meta.mode,
        objective: meta.objective,
        parameter,
        group: meta.group.clone(),
        dimension: meta.dimension,
        support: meta.support.clone(),
        inner: reps(&meta.inner),
        outer: reps(&meta.outer),
        blocks,
    })
}

impl ReducedCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: ReducedCertificate =
            serde_json::from_str(text).map_err(|e| SageError::Malformed(e.to_string()))?;
        if cert.version != CERTIFICATE_VERSION {
            return Err(SageError::Malformed(format!(
                "unsupported certificate version {}",
                cert.version
            )));
        }
        Ok(cert)
    }

    /// The same certificate claiming a different parameter value.
    pub fn with_parameter(&self, p: f64) -> Self {
        let mut c = self.clone();
        c.parameter = Some(p);
        c
    }

    fn group(&self) -> Result<PermutationGroup> {
        PermutationGroup::from_doc(&self.group)
    }
}

/// One AGE signomial of the decomposition: nonnegative `c` on the positive
/// exponents and a single possibly negative coefficient at `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgeSummand {
    pub beta: Exponent,
    pub beta_coefficient: f64,
    /// `(α, c_α, ν_α)`
    pub terms: Vec<(Exponent, f64, f64)>,
}

impl AgeSummand {
    pub fn to_signomial(&self) -> Result<Signomial> {
        let n = self.beta.dim();
        Signomial::from_terms(
            n,
            self.terms
                .iter()
                .map(|(a, c, _)| (a.clone(), *c))
                .chain(std::iter::once((self.beta.clone(), self.beta_coefficient))),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgeDecomposition {
    pub summands: Vec<AgeSummand>,
    /// Positive terms left over when there is no negative exponent at all.
    pub remainder: Vec<(Exponent, f64)>,
}

impl AgeDecomposition {
    /// Coefficientwise sum of all summands and the remainder.
    pub fn total(&self) -> HashMap<Exponent, f64> {
        let mut acc: HashMap<Exponent, Neumaier> = HashMap::new();
        let mut add = |e: &Exponent, c: f64| match acc.get_mut(e) {
            Some(s) => s.add(c),
            None => acc.entry(e.clone()).or_default().add(c),
        };
        for s in &self.summands {
            add(&s.beta, s.beta_coefficient);
            for (a, c, _) in &s.terms {
                add(a, *c);
            }
        }
        for (a, c) in &self.remainder {
            add(a, *c);
        }
        acc.into_iter().map(|(e, s)| (e, s.value())).collect()
    }
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            // Compensation is meaningless once the sum has left the reals.
            self.sum = t;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.comp
        } else {
            self.sum
        }
    }
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    let (q, r) = num.div_rem(den);
    if r.is_zero() {
        q.to_f64().unwrap_or(f64::INFINITY)
    } else {
        num.to_f64().unwrap_or(f64::INFINITY) / den.to_f64().unwrap_or(f64::INFINITY)
    }
}

/// `|G·β̂|·|γ| / |G·α̂|`
fn coefficient_weight(cert: &ReducedCertificate, block: &CertBlock, class: &CertClass) -> f64 {
    let outer = &cert.outer[block.outer_index].orbit_size;
    let inner = &cert.inner[class.inner_index].orbit_size;
    ratio(&(outer * &class.size), inner)
}

/// Expand to one AGE signomial per element of `B`.
///
/// Slack in the coefficient inequalities is first pushed into the `c` values
/// of the first block (raising `c` keeps the entropy condition), so that the
/// summands add up exactly to the certified signomial.
pub fn expand_certificate(cert: &ReducedCertificate) -> Result<AgeDecomposition> {
    let g = cert.group()?;
    let mut blocks = cert.blocks.clone();
    let mut remainder = Vec::new();

    let mut used = vec![Neumaier::default(); cert.inner.len()];
    for b in &blocks {
        for cl in &b.classes {
            used[cl.inner_index].add(coefficient_weight(cert, b, cl) * cl.c);
        }
    }
    for (ai, entry) in cert.inner.iter().enumerate() {
        let slack = entry.coefficient - used[ai].value();
        if slack <= 0.0 {
            continue;
        }
        match blocks.first_mut() {
            Some(first) => {
                let outer_size = cert.outer[first.outer_index]
                    .orbit_size
                    .to_f64()
                    .unwrap_or(f64::INFINITY);
                for cl in first.classes.iter_mut().filter(|c| c.inner_index == ai) {
                    cl.c += slack / outer_size;
                }
            }
            None => {
                for e in g.orbit(&entry.exponent)?.elements.expect("materialized") {
                    remainder.push((e, entry.coefficient));
                }
            }
        }
    }

    let mut inner_orbits = Vec::with_capacity(cert.inner.len());
    for entry in &cert.inner {
        inner_orbits.push(g.orbit(&entry.exponent)?.elements.expect("materialized"));
    }

    let mut summands = Vec::new();
    for block in &blocks {
        let outer = &cert.outer[block.outer_index];
        let beta_hat = &outer.exponent;
        let stab = g.stabilizer(beta_hat)?;
        let lookup: HashMap<&Exponent, &CertClass> = block
            .classes
            .iter()
            .map(|c| (&c.representative, c))
            .collect();
        // h_β̂ on every α' ∈ A, in the frame of β̂
        let mut h = Vec::new();
        for (ai, orbit) in inner_orbits.iter().enumerate() {
            for a in orbit {
                let key = stab.canonical(a)?;
                let cl = lookup
                    .get(&key)
                    .filter(|c| c.inner_index == ai)
                    .ok_or_else(|| {
                        SageError::Malformed(format!("no class for {a} in the block of {beta_hat}"))
                    })?;
                h.push((a, cl.c, cl.nu));
            }
        }
        for beta in g.orbit(beta_hat)?.elements.expect("materialized") {
            let rho = g
                .transporter(beta_hat, &beta)?
                .expect("orbit element is reachable");
            let terms = h
                .iter()
                .map(|(a, c, nu)| (rho.act_unchecked(a), *c, *nu))
                .collect();
            summands.push(AgeSummand {
                beta,
                beta_coefficient: outer.coefficient,
                terms,
            });
        }
    }
    Ok(AgeDecomposition {
        summands,
        remainder,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_violation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The signomial whose membership the certificate claims: `f` with the
/// parameter applied (`f − λ`, or negative coefficients scaled by `δ`).
pub fn certified_target(f: &Signomial, cert: &ReducedCertificate) -> Result<Signomial> {
    let p = cert.parameter.unwrap_or(0.0);
    match cert.objective {
        Objective::Membership => Ok(f.clone()),
        Objective::Bound => f.add_term(Exponent::zeros(f.dim()), -p),
        Objective::MaximizeCoefficient => Signomial::from_terms(
            f.dim(),
            f.terms()
                .map(|(e, c)| (e.clone(), if c < 0.0 { c * p } else { c })),
        ),
    }
}

/// `ν ln(ν/(e·c))` with the closure conventions `0·ln 0 = 0` and
/// `ν ln(ν/0) = +∞` for `ν > 0`.
fn entropy_term(nu: f64, c: f64) -> f64 {
    if nu == 0.0 {
        0.0
    } else if c <= 0.0 {
        f64::INFINITY
    } else {
        nu * (nu / c).ln() - nu
    }
}

/// Relative amount by which `lhs` exceeds `rhs`; anything non-finite counts
/// as an unbounded violation, since `f64::max` would silently drop a NaN.
fn excess(lhs: f64, rhs: f64) -> f64 {
    if !lhs.is_finite() {
        return f64::INFINITY;
    }
    (lhs - rhs).max(0.0) / rhs.abs().max(1.0)
}

fn push(checks: &mut Vec<CheckResult>, name: &str, v: f64, tol: f64) {
    let v = if v.is_nan() { f64::INFINITY } else { v };
    checks.push(CheckResult {
        name: name.into(),
        max_violation: v,
        passed: v <= tol,
    });
}

/// Re-evaluate every condition of the certificate against `f`.
///
/// Checks: `structure` (classes partition each inner orbit, sizes are exact),
/// `nonnegativity`, `projected-equalities`, `entropy`, `coefficients`,
/// `reconstruction` (expansion sums to the target), and
/// `expanded-equalities` (per-summand balance in the full space).
pub fn verify_certificate(
    f: &Signomial,
    cert: &ReducedCertificate,
    tol: f64,
) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let g = cert.group()?;
    if f.dim() != cert.dimension || g.degree() != cert.dimension {
        return Err(SageError::DimensionMismatch {
            expected: cert.dimension,
            got: f.dim(),
        });
    }
    let target = certified_target(f, cert)?;
    let coef = |e: &Exponent| target.coefficient(e);

    // structure
    let mut structure = 0.0;
    for entry in cert.inner.iter().chain(&cert.outer) {
        if g.orbit_size(&entry.exponent)? != entry.orbit_size {
            structure = 1.0;
        }
    }
    for block in &cert.blocks {
        let beta_hat = &cert
            .outer
            .get(block.outer_index)
            .ok_or_else(|| SageError::Malformed("block refers to a missing outer orbit".into()))?
            .exponent;
        let stab = g.stabilizer(beta_hat)?;
        let mut covered = vec![BigUint::zero(); cert.inner.len()];
        let mut seen = std::collections::BTreeSet::new();
        for cl in &block.classes {
            let Some(entry) = cert.inner.get(cl.inner_index) else {
                structure = 1.0;
                continue;
            };
            let in_orbit = g.canonical(&cl.representative)? == g.canonical(&entry.exponent)?;
            let fresh = seen.insert(stab.canonical(&cl.representative)?);
            if !in_orbit || !fresh || stab.orbit_size(&cl.representative)? != cl.size {
                structure = 1.0;
            }
            covered[cl.inner_index] += &cl.size;
        }
        for (entry, got) in cert.inner.iter().zip(&covered) {
            if *got != entry.orbit_size {
                structure = 1.0;
            }
        }
    }
    push(&mut checks, "structure", structure, tol);
    if structure > 0.0 {
        let passed = false;
        return Ok(VerificationReport {
            tolerance: tol,
            checks,
            passed,
        });
    }

    // nonnegativity
    let mut neg: f64 = 0.0;
    for cl in cert.blocks.iter().flat_map(|b| &b.classes) {
        neg = neg.max(-cl.c).max(-cl.nu);
    }
    push(&mut checks, "nonnegativity", neg, tol);

    // projected equalities and entropy
    let mut eq_violation: f64 = 0.0;
    let mut entropy_violation: f64 = 0.0;
    for block in &cert.blocks {
        let beta_hat = &cert.outer[block.outer_index].exponent;
        let stab = g.stabilizer(beta_hat)?;
        let coords = stab.coordinate_orbits();
        let mut full = vec![0.0; cert.dimension];
        for orbit in &coords {
            let mut s = Neumaier::default();
            let mut scale = 1.0;
            for cl in &block.classes {
                let gap: f64 = orbit
                    .iter()
                    .map(|&i| {
                        (cl.representative.entries()[i] - beta_hat.entries()[i])
                            .to_f64()
                            .unwrap_or(f64::NAN)
                    })
                    .sum();
                let size = cl.size.to_f64().unwrap_or(f64::INFINITY);
                let term = cl.nu * size * gap;
                s.add(term);
                scale += term.abs();
            }
            let total = s.value();
            for &i in orbit {
                full[i] = total / orbit.len() as f64;
            }
            if !cert.support.is_box() {
                eq_violation = eq_violation.max(total.abs() / scale);
            }
        }
        let mut lhs = Neumaier::default();
        for cl in &block.classes {
            let size = cl.size.to_f64().unwrap_or(f64::INFINITY);
            lhs.add(size * entropy_term(cl.nu, cl.c));
        }
        if cert.support.is_box() {
            let v: Vec<f64> = full.iter().map(|x| -x).collect();
            lhs.add(cert.support.support_value(&v));
        }
        let rhs = coef(beta_hat);
        let lhs = lhs.value();
        let v = excess(lhs, rhs);
        entropy_violation = entropy_violation.max(v);
    }
    push(&mut checks, "projected-equalities", eq_violation, tol);
    push(&mut checks, "entropy", entropy_violation, tol);

    // coefficient inequalities
    let mut used = vec![Neumaier::default(); cert.inner.len()];
    for b in &cert.blocks {
        for cl in &b.classes {
            used[cl.inner_index].add(coefficient_weight(cert, b, cl) * cl.c);
        }
    }
    let mut coef_violation: f64 = 0.0;
    for (entry, u) in cert.inner.iter().zip(&used) {
        let rhs = coef(&entry.exponent);
        coef_violation = coef_violation.max(excess(u.value(), rhs));
    }
    push(&mut checks, "coefficients", coef_violation, tol);

    // reconstruction and unprojected equalities on the expansion
    let expansion = expand_certificate(cert)?;
    let total = expansion.total();
    let mut recon: f64 = 0.0;
    for (e, v) in &total {
        recon = recon.max((v - coef(e)).abs());
    }
    for (e, c) in target.terms() {
        if !total.contains_key(e) {
            recon = recon.max(c.abs());
        }
    }
    push(&mut checks, "reconstruction", recon, tol);

    let mut expanded: f64 = 0.0;
    if !cert.support.is_box() {
        for s in &expansion.summands {
            let beta = s.beta.to_f64();
            let mut acc = vec![Neumaier::default(); cert.dimension];
            let mut scale = vec![1.0; cert.dimension];
            for (a, _, nu) in &s.terms {
                for (i, ai) in a.entries().iter().enumerate() {
                    let d = nu * (rational_to_f64(ai) - beta[i]);
                    acc[i].add(d);
                    scale[i] += d.abs();
                }
            }
            for (a, s) in acc.iter().zip(&scale) {
                expanded = expanded.max(a.value().abs() / s);
            }
        }
    }
    push(&mut checks, "expanded-equalities", expanded, tol);

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        tolerance: tol,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[i64]) -> Exponent {
        Exponent::from_ints(v.iter().copied())
    }

    /// The tight one-dimensional AM/GM witness: ½e^{2x} + ½e^{−2x} − 1.
    fn amgm() -> (Signomial, ReducedCertificate) {
        let f =
            Signomial::from_terms(1, [(e(&[2]), 0.5), (e(&[-2]), 0.5), (e(&[0]), -1.0)]).unwrap();
        let one = BigUint::from(1u32);
        let cert = ReducedCertificate {
            version: CERTIFICATE_VERSION,
            mode: Mode::Standard,
            objective: Objective::Membership,
            parameter: None,
            group: PermutationGroup::trivial(1).to_doc(),
            dimension: 1,
            support: SupportOracle::Free,
            inner: vec![
                RepEntry {
                    exponent: e(&[-2]),
                    orbit_size: one.clone(),
                    coefficient: 0.5,
                },
                RepEntry {
                    exponent: e(&[2]),
                    orbit_size: one.clone(),
                    coefficient: 0.5,
                },
            ],
            outer: vec![RepEntry {
                exponent: e(&[0]),
                orbit_size: one.clone(),
                coefficient: -1.0,
            }],
            blocks: vec![CertBlock {
                outer_index: 0,
                classes: vec![
                    CertClass {
                        representative: e(&[-2]),
                        size: one.clone(),
                        inner_index: 0,
                        c: 0.5,
                        nu: 0.5,
                    },
                    CertClass {
                        representative: e(&[2]),
                        size: one,
                        inner_index: 1,
                        c: 0.5,
                        nu: 0.5,
                    },
                ],
            }],
        };
        (f, cert)
    }

    #[test]
    fn analytic_amgm_certificate_passes() {
        let (f, cert) = amgm();
        let r = verify_certificate(&f, &cert, 1e-12).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_c_with_positive_nu_is_infinite_entropy() {
        let (f, mut cert) = amgm();
        cert.blocks[0].classes[0].c = 0.0;
        let r = verify_certificate(&f, &cert, 1e-6).unwrap();
        assert!(!r.passed);
        assert_eq!(r.check("entropy").unwrap().max_violation, f64::INFINITY);
    }

    #[test]
    fn unbalanced_nu_fails_equalities() {
        let (f, mut cert) = amgm();
        cert.blocks[0].classes[1].nu = 0.6;
        let r = verify_certificate(&f, &cert, 1e-6).unwrap();
        assert!(!r.check("projected-equalities").unwrap().passed);
        assert!(!r.check("expanded-equalities").unwrap().passed);
    }

    #[test]
    fn wrong_class_size_is_a_structure_failure() {
        let (f, mut cert) = amgm();
        cert.blocks[0].classes[0].size = BigUint::from(2u32);
        let r = verify_certificate(&f, &cert, 1e-6).unwrap();
        assert!(!r.check("structure").unwrap().passed);
    }

    #[test]
    fn json_round_trip() {
        let (_, cert) = amgm();
        assert_eq!(
            ReducedCertificate::from_json(&cert.to_json()).unwrap(),
            cert
        );
    }

    #[test]
    fn clipping() {
        assert_eq!(clip(-5e-13), 0.0);
        assert_eq!(clip(-1e-9), -1e-9);
        assert_eq!(clip(0.25), 0.25);
    }

    #[test]
    fn remainder_when_nothing_is_negative() {
        let cert = ReducedCertificate {
            version: CERTIFICATE_VERSION,
            mode: Mode::Reduced,
            objective: Objective::Membership,
            parameter: None,
            group: PermutationGroup::symmetric(2).to_doc(),
            dimension: 2,
            support: SupportOracle::Free,
            inner: vec![RepEntry {
                exponent: e(&[1, 0]),
                orbit_size: BigUint::from(2u32),
                coefficient: 3.0,
            }],
            outer: vec![],
            blocks: vec![],
        };
        let d = expand_certificate(&cert).unwrap();
        assert!(d.summands.is_empty());
        assert_eq!(d.remainder.len(), 2);
        let f = Signomial::from_terms(2, [(e(&[1, 0]), 3.0), (e(&[0, 1]), 3.0)]).unwrap();
        assert!(verify_certificate(&f, &cert, 1e-9).unwrap().passed);
    }
}
