//! Relative entropy programs for SAGE membership and lower bounds, in the
//! standard form (one AGE block per negative exponent) and in the
//! symmetry-reduced form (one block per orbit of negative exponents, with
//! variables indexed by stabilizer suborbits).

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{predict_sizes, Mode, SizePrediction};
use crate::error::{Result, SageError};
use crate::group::{count_to_f64, GroupDoc, OrbitClass, PermutationGroup};
use crate::signomial::{
    check_invariance, rational_to_f64, Exponent, Signomial, DEFAULT_INVARIANCE_TOL,
};

/// The set `K` over which nonnegativity is certified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SupportOracle {
    #[default]
    Free,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl SupportOracle {
    pub fn cube(n: usize, lower: f64, upper: f64) -> Self {
        SupportOracle::Box {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, SupportOracle::Box { .. })
    }

    /// `sup_{x ∈ K} ⟨v, x⟩`.
    pub fn support_value(&self, v: &[f64]) -> f64 {
        match self {
            SupportOracle::Free => {
                if v.iter().all(|&x| x == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            SupportOracle::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&vi, (&l, &u))| if vi > 0.0 { vi * u } else { vi * l })
                .sum(),
        }
    }

    /// Checks shape and, for boxes, that bounds are finite, ordered and
    /// constant on the coordinate orbits of `group`.
    pub fn validate(&self, group: &PermutationGroup) -> Result<()> {
        let SupportOracle::Box { lower, upper } = self else {
            return Ok(());
        };
        let n = group.degree();
        for v in [lower, upper] {
            if v.len() != n {
                return Err(SageError::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        for (l, u) in lower.iter().zip(upper) {
            if !l.is_finite() || !u.is_finite() {
                return Err(SageError::InvalidSupport(
                    "box bounds must be finite".into(),
                ));
            }
            if l > u {
                return Err(SageError::InvalidSupport(format!(
                    "lower bound {l} exceeds {u}"
                )));
            }
        }
        for orbit in group.coordinate_orbits() {
            let i = orbit[0];
            if orbit
                .iter()
                .any(|&j| lower[j] != lower[i] || upper[j] != upper[i])
            {
                return Err(SageError::NotOrbitConstant(format!(
                    "box bounds on coordinates {:?}",
                    orbit.iter().map(|j| j + 1).collect::<Vec<_>>()
                )));
            }
        }
        Ok(())
    }

    fn bounds_of(&self, coords: &[usize]) -> (f64, f64) {
        match self {
            SupportOracle::Free => (0.0, 0.0),
            SupportOracle::Box { lower, upper } => (lower[coords[0]], upper[coords[0]]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Pure feasibility: is `f` in the SAGE cone?
    Membership,
    /// Maximize `λ` such that `f − λ` is SAGE.
    Bound,
    /// Scale every negative coefficient by `δ` and maximize `δ`.
    MaximizeCoefficient,
}

impl Objective {
    pub fn parameter_name(self) -> Option<&'static str> {
        match self {
            Objective::Membership => None,
            Objective::Bound => Some("lambda"),
            Objective::MaximizeCoefficient => Some("delta"),
        }
    }
}

/// Where the constant term `c₀ − λ` of a bound program goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OriginPlacement {
    /// Positive side unless `c₀ < 0` and other positive terms exist.
    #[default]
    Auto,
    Inner,
    Outer,
}

/// A coefficient affine in the program parameter: `base + slope · p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub base: f64,
    pub slope: f64,
}

impl Coefficient {
    pub fn constant(base: f64) -> Self {
        Coefficient { base, slope: 0.0 }
    }

    pub fn at(&self, p: f64) -> f64 {
        if self.slope == 0.0 {
            self.base
        } else {
            self.base + self.slope * p
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitTerm {
    pub class: OrbitClass,
    pub coefficient: Coefficient,
}

/// A G-invariant signomial given by orbit representatives, split by sign,
/// together with the question being asked about it.
#[derive(Clone, Debug)]
pub struct Instance {
    pub group: PermutationGroup,
    pub inner: Vec<OrbitTerm>,
    pub outer: Vec<OrbitTerm>,
    pub objective: Objective,
    pub support: SupportOracle,
}

impl Instance {
    /// Build from a materialized signomial. The signomial must be invariant
    /// under `group`.
    pub fn from_signomial(
        f: &Signomial,
        group: &PermutationGroup,
        objective: Objective,
        support: SupportOracle,
        placement: OriginPlacement,
    ) -> Result<Instance> {
        if f.dim() != group.degree() {
            return Err(SageError::DimensionMismatch {
                expected: group.degree(),
                got: f.dim(),
            });
        }
        if !check_invariance(f, group, DEFAULT_INVARIANCE_TOL)? {
            return Err(SageError::NotInvariant);
        }
        let exps: Vec<Exponent> = f.support().cloned().collect();
        let classes = group.orbit_representatives(&exps)?;
        let terms = classes
            .into_iter()
            .map(|c| {
                let coef = f.coefficient(&c.representative);
                (c, coef)
            })
            .collect();
        Instance::from_classes(group.clone(), terms, objective, support, placement)
    }

    /// Build from one representative per orbit and the common coefficient
    /// of that orbit. Orbits are never materialized.
    pub fn from_representatives(
        group: &PermutationGroup,
        terms: Vec<(Exponent, f64)>,
        objective: Objective,
        support: SupportOracle,
        placement: OriginPlacement,
    ) -> Result<Instance> {
        let mut merged: BTreeMap<Exponent, (OrbitClass, f64)> = BTreeMap::new();
        for (e, c) in terms {
            if !c.is_finite() {
                return Err(SageError::NonFinite(c));
            }
            let class = group.orbit_class(&e)?;
            merged
                .entry(class.representative.clone())
                .or_insert((class, 0.0))
                .1 += c;
        }
        let terms = merged.into_values().filter(|(_, c)| *c != 0.0).collect();
        Instance::from_classes(group.clone(), terms, objective, support, placement)
    }

    fn from_classes(
        group: PermutationGroup,
        terms: Vec<(OrbitClass, f64)>,
        objective: Objective,
        support: SupportOracle,
        placement: OriginPlacement,
    ) -> Result<Instance> {
        support.validate(&group)?;
        let n = group.degree();
        let origin = Exponent::zeros(n);
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        let mut c0 = 0.0;
        for (class, c) in terms {
            if objective == Objective::Bound && class.representative == origin {
                c0 = c;
                continue;
            }
            let coefficient = match objective {
                Objective::MaximizeCoefficient if c < 0.0 => Coefficient {
                    base: 0.0,
                    slope: c,
                },
                _ => Coefficient::constant(c),
            };
            let term = OrbitTerm { class, coefficient };
            if c > 0.0 {
                inner.push(term);
            } else {
                outer.push(term);
            }
        }
        if objective == Objective::Bound {
            let term = OrbitTerm {
                class: OrbitClass::singleton(origin),
                coefficient: Coefficient {
                    base: c0,
                    slope: -1.0,
                },
            };
            let to_outer = match placement {
                OriginPlacement::Auto => c0 < 0.0 && !inner.is_empty(),
                OriginPlacement::Inner => false,
                OriginPlacement::Outer => true,
            };
            if to_outer {
                outer.push(term);
            } else {
                inner.push(term);
            }
        }
        inner.sort_by(|a, b| a.class.representative.cmp(&b.class.representative));
        outer.sort_by(|a, b| a.class.representative.cmp(&b.class.representative));
        if inner.is_empty() && !outer.is_empty() {
            return Err(SageError::EmptyInner);
        }
        Ok(Instance {
            group,
            inner,
            outer,
            objective,
            support,
        })
    }

    pub fn dimension(&self) -> usize {
        self.group.degree()
    }

    pub fn predict_sizes(&self, mode: Mode) -> Result<SizePrediction> {
        let ahat: Vec<OrbitClass> = self.inner.iter().map(|t| t.class.clone()).collect();
        let bhat: Vec<OrbitClass> = self.outer.iter().map(|t| t.class.clone()).collect();
        let p = predict_sizes(
            &ahat,
            &bhat,
            &self.group,
            mode,
            self.objective != Objective::Membership,
        )?;
        Ok(if self.support.is_box() {
            p.with_box_auxiliaries()
        } else {
            p
        })
    }

    /// The underlying signomial at parameter value `p`, with every orbit
    /// materialized.
    pub fn to_signomial(&self, p: f64) -> Result<Signomial> {
        let mut terms = Vec::new();
        for t in self.inner.iter().chain(&self.outer) {
            let c = t.coefficient.at(p);
            for e in self
                .group
                .orbit(&t.class.representative)?
                .elements
                .expect("materialized")
            {
                terms.push((e, c));
            }
        }
        Signomial::from_terms(self.dimension(), terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    pub nonneg: bool,
}

/// `Σ coeffs · x (= or ≤) rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyTerm {
    pub nu: usize,
    pub c: usize,
    pub weight: f64,
}

/// `Σ w·ν ln(ν/(e·c)) + Σ linear ≤ rhs + Σ rhs_linear`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBlock {
    pub terms: Vec<EntropyTerm>,
    pub linear: Vec<(usize, f64)>,
    pub rhs: f64,
    pub rhs_linear: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepMeta {
    pub exponent: Exponent,
    pub orbit_size: BigUint,
    pub coefficient: Coefficient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMeta {
    pub representative: Exponent,
    pub size: BigUint,
    pub inner_index: usize,
    pub c_var: usize,
    pub nu_var: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockMeta {
    pub outer_index: usize,
    pub classes: Vec<ClassMeta>,
    pub coordinate_orbits: Vec<Vec<usize>>,
}

/// Links program variables back to orbit representatives and suborbit
/// classes. A standard program is described as a reduced one under the
/// trivial group.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramMeta {
    pub mode: Mode,
    pub objective: Objective,
    pub parameter: Option<usize>,
    pub group: GroupDoc,
    pub dimension: usize,
    pub support: SupportOracle,
    pub inner: Vec<RepMeta>,
    pub outer: Vec<RepMeta>,
    pub blocks: Vec<BlockMeta>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub variables: Vec<VariableInfo>,
    /// Maximized.
    pub objective: Vec<(usize, f64)>,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
    pub blocks: Vec<EntropyBlock>,
    pub meta: ProgramMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSize {
    pub variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
}

impl ProgramSize {
    pub fn constraints(&self) -> usize {
        self.equalities + self.inequalities
    }

    pub fn matches(&self, p: &SizePrediction) -> bool {
        BigUint::from(self.variables) == p.variables
            && self.equalities == p.equalities
            && self.inequalities == p.inequalities
    }
}

impl fmt::Display for ProgramSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V={} C={}", self.variables, self.constraints())
    }
}

/// Settings shared by both builders.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Accept multiplicities above 2^53, rounding them to the nearest double.
    pub allow_inexact_counts: bool,
}

struct Builder {
    variables: Vec<VariableInfo>,
}

impl Builder {
    fn var(&mut self, name: String, nonneg: bool) -> usize {
        self.variables.push(VariableInfo { name, nonneg });
        self.variables.len() - 1
    }
}

impl ConicProgram {
    pub fn size(&self) -> ProgramSize {
        ProgramSize {
            variables: self.variables.len(),
            equalities: self.equalities.len(),
            inequalities: self.inequalities.len() + self.blocks.len(),
        }
    }

    /// Entropy terms across all blocks, i.e. the number of cone triples.
    pub fn cone_count(&self) -> usize {
        self.blocks.iter().map(|b| b.terms.len()).sum()
    }

    pub fn build(instance: &Instance, mode: Mode, opts: BuildOptions) -> Result<ConicProgram> {
        match mode {
            Mode::Standard => build_standard(instance),
            Mode::Reduced => build_reduced(instance, opts),
        }
    }

    /// Exponential-cone form: each entropy term `w·(ν ln(ν/c) − ν)` gets an
    /// epigraph variable `t` with `(−t−ν, ν, c) ∈ K_exp`, and each block
    /// becomes one linear inequality in the `t`s.
    pub fn canonicalize(&self) -> CanonicalProgram {
        let mut variables = self.variables.clone();
        let n0 = variables.len();
        let mut objective = vec![0.0; n0];
        for &(j, a) in &self.objective {
            objective[j] += a;
        }
        let mut inequalities = self.inequalities.clone();
        let mut cones = Vec::new();
        for (k, block) in self.blocks.iter().enumerate() {
            let mut row = LinearRow {
                terms: block.linear.clone(),
                rhs: block.rhs,
            };
            for &(j, a) in &block.rhs_linear {
                row.terms.push((j, -a));
            }
            for (m, term) in block.terms.iter().enumerate() {
                let t = variables.len();
                variables.push(VariableInfo {
                    name: format!("t[{k}][{m}]"),
                    nonneg: false,
                });
                objective.push(0.0);
                row.terms.push((t, term.weight));
                cones.push(ExpTriple {
                    x: AffineExpr::new(vec![(t, -1.0), (term.nu, -1.0)]),
                    y: AffineExpr::new(vec![(term.nu, 1.0)]),
                    z: AffineExpr::new(vec![(term.c, 1.0)]),
                });
            }
            inequalities.push(row);
        }
        CanonicalProgram {
            variables,
            objective,
            equalities: self.equalities.clone(),
            inequalities,
            exp_cones: cones,
            original_variables: n0,
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonicalize()).expect("program serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    #[serde(default)]
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(terms: Vec<(usize, f64)>) -> Self {
        AffineExpr {
            terms,
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// `(x, y, z) ∈ cl{y·e^{x/y} ≤ z, y > 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTriple {
    pub x: AffineExpr,
    pub y: AffineExpr,
    pub z: AffineExpr,
}

/// Linear objective (maximized), linear equalities and `≤` rows, sign
/// constraints on flagged variables, and exponential-cone memberships. This
/// is the program-export JSON format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalProgram {
    pub variables: Vec<VariableInfo>,
    pub objective: Vec<f64>,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
    pub exp_cones: Vec<ExpTriple>,
    /// Variables before epigraph auxiliaries were appended.
    #[serde(default)]
    pub original_variables: usize,
}

impl CanonicalProgram {
    pub fn from_json(text: &str) -> Result<CanonicalProgram> {
        let p: CanonicalProgram =
            serde_json::from_str(text).map_err(|e| SageError::Malformed(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        if self.objective.len() != n {
            return Err(SageError::InvalidProgram(format!(
                "objective has {} entries for {n} variables",
                self.objective.len()
            )));
        }
        let bad = |terms: &[(usize, f64)]| terms.iter().any(|&(j, a)| j >= n || !a.is_finite());
        for row in self.equalities.iter().chain(&self.inequalities) {
            if bad(&row.terms) || !row.rhs.is_finite() {
                return Err(SageError::InvalidProgram("bad linear row".into()));
            }
        }
        for c in &self.exp_cones {
            for e in [&c.x, &c.y, &c.z] {
                if bad(&e.terms) || !e.constant.is_finite() {
                    return Err(SageError::InvalidProgram("bad cone expression".into()));
                }
            }
        }
        Ok(())
    }
}

fn weight_to_f64(count: &BigUint, opts: BuildOptions) -> Result<f64> {
    match count_to_f64(count) {
        Ok(v) => Ok(v),
        Err(e) if opts.allow_inexact_counts => {
            warn!("{e}; rounding");
            Ok(count.to_f64().unwrap_or(f64::INFINITY))
        }
        Err(e) => {
            warn!("{e}");
            Err(e)
        }
    }
}

fn rep_meta(terms: &[OrbitTerm]) -> Vec<RepMeta> {
    terms
        .iter()
        .map(|t| RepMeta {
            exponent: t.class.representative.clone(),
            orbit_size: t.class.size.clone(),
            coefficient: t.coefficient,
        })
        .collect()
}

fn parameter_var(b: &mut Builder, objective: Objective) -> Option<usize> {
    objective
        .parameter_name()
        .map(|name| b.var(name.to_string(), false))
}

/// `Σ_{i ∈ coords} (a_i − b_i)` as a double.
fn coordinate_gap(a: &Exponent, b: &Exponent, coords: &[usize]) -> f64 {
    let s: Rational64 = coords
        .iter()
        .map(|&i| a.entries()[i] - b.entries()[i])
        .fold(Rational64::zero(), |acc, x| acc + x);
    rational_to_f64(&s)
}

/// Adds the support-function term for a box: one equality row per coordinate
/// group `W⁺ − W⁻ + Σ ν·gap = 0` and `u·W⁺ − l·W⁻` on the block's left side.
/// For free space the row is the plain equality.
#[allow(clippy::too_many_arguments)]
fn support_rows(
    b: &mut Builder,
    support: &SupportOracle,
    label: &str,
    coords: &[usize],
    k: usize,
    gap_terms: Vec<(usize, f64)>,
    equalities: &mut Vec<LinearRow>,
    block_linear: &mut Vec<(usize, f64)>,
) {
    let mut terms = gap_terms;
    if support.is_box() {
        let (l, u) = support.bounds_of(coords);
        let wp = b.var(format!("w+[{label}][{k}]"), true);
        let wm = b.var(format!("w-[{label}][{k}]"), true);
        terms.push((wp, 1.0));
        terms.push((wm, -1.0));
        if u != 0.0 {
            block_linear.push((wp, u));
        }
        if l != 0.0 {
            block_linear.push((wm, -l));
        }
    }
    equalities.push(LinearRow { terms, rhs: 0.0 });
}

fn finish_objective(param: Option<usize>) -> Vec<(usize, f64)> {
    param.map(|p| vec![(p, 1.0)]).unwrap_or_default()
}

/// The standard program: every exponent of `B` gets its own AGE block with a
/// pair `(c, ν)` for every exponent of `A`, and `n` equality rows.
fn build_standard(inst: &Instance) -> Result<ConicProgram> {
    let n = inst.dimension();
    let mut a_list: Vec<(Exponent, Coefficient)> = Vec::new();
    for t in &inst.inner {
        for e in inst
            .group
            .orbit(&t.class.representative)?
            .elements
            .expect("materialized")
        {
            a_list.push((e, t.coefficient));
        }
    }
    let mut b_list: Vec<(Exponent, Coefficient)> = Vec::new();
    for t in &inst.outer {
        for e in inst
            .group
            .orbit(&t.class.representative)?
            .elements
            .expect("materialized")
        {
            b_list.push((e, t.coefficient));
        }
    }
    a_list.sort_by(|x, y| x.0.cmp(&y.0));
    b_list.sort_by(|x, y| x.0.cmp(&y.0));

    let mut b = Builder {
        variables: Vec::new(),
    };
    let param = parameter_var(&mut b, inst.objective);
    let mut equalities = Vec::new();
    let mut blocks = Vec::new();
    let mut block_meta = Vec::new();
    // c_α^{(β)} for the coefficient rows, by α
    let mut by_alpha: Vec<Vec<usize>> = vec![Vec::new(); a_list.len()];
    let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    for (bi, (beta, bcoef)) in b_list.iter().enumerate() {
        let label = beta.to_string();
        let mut terms = Vec::new();
        let mut classes = Vec::new();
        for (ai, (alpha, _)) in a_list.iter().enumerate() {
            let c = b.var(format!("c[{label}][{alpha}]"), true);
            let nu = b.var(format!("nu[{label}][{alpha}]"), true);
            terms.push(EntropyTerm { nu, c, weight: 1.0 });
            by_alpha[ai].push(c);
            classes.push(ClassMeta {
                representative: alpha.clone(),
                size: BigUint::from(1u32),
                inner_index: ai,
                c_var: c,
                nu_var: nu,
            });
        }
        let mut linear = Vec::new();
        for i in 0..n {
            let gap: Vec<(usize, f64)> = a_list
                .iter()
                .zip(&classes)
                .map(|((alpha, _), cm)| {
                    (
                        cm.nu_var,
                        rational_to_f64(&(alpha.entries()[i] - beta.entries()[i])),
                    )
                })
                .filter(|&(_, g)| g != 0.0)
                .collect();
            support_rows(
                &mut b,
                &inst.support,
                &label,
                &[i],
                i,
                gap,
                &mut equalities,
                &mut linear,
            );
        }
        blocks.push(EntropyBlock {
            terms,
            linear,
            rhs: bcoef.base,
            rhs_linear: param
                .filter(|_| bcoef.slope != 0.0)
                .map(|p| vec![(p, bcoef.slope)])
                .unwrap_or_default(),
        });
        block_meta.push(BlockMeta {
            outer_index: bi,
            classes,
            coordinate_orbits: singletons.clone(),
        });
    }

    let mut inequalities = Vec::new();
    for (ai, (_, coef)) in a_list.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = by_alpha[ai].iter().map(|&c| (c, 1.0)).collect();
        if let Some(p) = param.filter(|_| coef.slope != 0.0) {
            terms.push((p, -coef.slope));
        }
        inequalities.push(LinearRow {
            terms,
            rhs: coef.base,
        });
    }

    let single = |list: &[(Exponent, Coefficient)]| {
        list.iter()
            .map(|(e, c)| RepMeta {
                exponent: e.clone(),
                orbit_size: BigUint::from(1u32),
                coefficient: *c,
            })
            .collect()
    };
    Ok(ConicProgram {
        variables: b.variables,
        objective: finish_objective(param),
        equalities,
        inequalities,
        blocks,
        meta: ProgramMeta {
            mode: Mode::Standard,
            objective: inst.objective,
            parameter: param,
            group: PermutationGroup::trivial(n).to_doc(),
            dimension: n,
            support: inst.support.clone(),
            inner: single(&a_list),
            outer: single(&b_list),
            blocks: block_meta,
        },
    })
}

/// The reduced program. For each `β̂`, variables are indexed by the
/// `Stab(β̂)`-orbits on each `G·α̂`; the equality is projected onto the
/// coordinate orbits of `Stab(β̂)`; the coefficient row of `α̂` weighs the
/// class `γ ⊂ G·α̂` by `|G·β̂|·|γ| / |G·α̂|`.
fn build_reduced(inst: &Instance, opts: BuildOptions) -> Result<ConicProgram> {
    let n = inst.dimension();
    let g = &inst.group;
    let mut b = Builder {
        variables: Vec::new(),
    };
    let param = parameter_var(&mut b, inst.objective);
    let mut equalities = Vec::new();
    let mut blocks = Vec::new();
    let mut block_meta = Vec::new();
    let mut coef_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.inner.len()];

    for (bi, bt) in inst.outer.iter().enumerate() {
        let beta = &bt.class.representative;
        let label = beta.to_string();
        let stab = g.stabilizer(beta)?;
        let coords = stab.coordinate_orbits();
        let mut terms = Vec::new();
        let mut classes = Vec::new();
        for (ai, at) in inst.inner.iter().enumerate() {
            for sub in g.orbit_suborbits(&at.class.representative, &stab)? {
                let gamma = &sub.representative;
                let c = b.var(format!("c[{label}][{gamma}]"), true);
                let nu = b.var(format!("nu[{label}][{gamma}]"), true);
                terms.push(EntropyTerm {
                    nu,
                    c,
                    weight: weight_to_f64(&sub.size, opts)?,
                });
                let (w, rem) = (&bt.class.size * &sub.size).div_rem(&at.class.size);
                debug_assert!(rem.is_zero());
                coef_rows[ai].push((c, weight_to_f64(&w, opts)?));
                classes.push(ClassMeta {
                    representative: gamma.clone(),
                    size: sub.size,
                    inner_index: ai,
                    c_var: c,
                    nu_var: nu,
                });
            }
        }
        let mut linear = Vec::new();
        for (k, orbit) in coords.iter().enumerate() {
            let mut gap = Vec::new();
            for (cm, term) in classes.iter().zip(&terms) {
                let d = coordinate_gap(&cm.representative, beta, orbit);
                if d != 0.0 {
                    gap.push((cm.nu_var, term.weight * d));
                }
            }
            support_rows(
                &mut b,
                &inst.support,
                &label,
                orbit,
                k,
                gap,
                &mut equalities,
                &mut linear,
            );
        }
        blocks.push(EntropyBlock {
            terms,
            linear,
            rhs: bt.coefficient.base,
            rhs_linear: param
                .filter(|_| bt.coefficient.slope != 0.0)
                .map(|p| vec![(p, bt.coefficient.slope)])
                .unwrap_or_default(),
        });
        block_meta.push(BlockMeta {
            outer_index: bi,
            classes,
            coordinate_orbits: coords,
        });
    }

    let mut inequalities = Vec::new();
    for (ai, at) in inst.inner.iter().enumerate() {
        let mut terms = std::mem::take(&mut coef_rows[ai]);
        if let Some(p) = param.filter(|_| at.coefficient.slope != 0.0) {
            terms.push((p, -at.coefficient.slope));
        }
        inequalities.push(LinearRow {
            terms,
            rhs: at.coefficient.base,
        });
    }

    Ok(ConicProgram {
        variables: b.variables,
        objective: finish_objective(param),
        equalities,
        inequalities,
        blocks,
        meta: ProgramMeta {
            mode: Mode::Reduced,
            objective: inst.objective,
            parameter: param,
            group: g.to_doc(),
            dimension: n,
            support: inst.support.clone(),
            inner: rep_meta(&inst.inner),
            outer: rep_meta(&inst.outer),
            blocks: block_meta,
        },
    })
}
