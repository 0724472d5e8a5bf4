//! Finite permutation groups acting on exponent vectors by permuting
//! coordinates.
//!
//! Two representations are supported. Young subgroups `S_{b1} × … × S_{bk}`
//! (which include the full symmetric group and the trivial group) answer every
//! orbit, stabilizer and suborbit question by sorting within blocks and never
//! enumerate group elements. Groups given by arbitrary generators fall back to
//! breadth-first orbit computations and, where a group order is needed, an
//! explicit element enumeration capped at [`ENUMERATION_LIMIT`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{contingency_tables, factorial, multinomial};
use crate::error::{Result, SageError};
use crate::signomial::Exponent;

/// Hard cap on explicit group enumeration.
pub const ENUMERATION_LIMIT: usize = 1_000_000;
/// Largest orbit that will be materialized element by element.
pub const MATERIALIZE_LIMIT: usize = 2_000_000;

/// A permutation of `{0, …, n−1}` stored as its image table.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(SageError::InvalidPermutation(format!(
                    "{images:?} is not a bijection"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    /// From a 1-indexed image table, as used in the group JSON.
    pub fn from_one_indexed(images: &[usize]) -> Result<Self> {
        if images.iter().any(|&i| i == 0) {
            return Err(SageError::InvalidPermutation("images are 1-indexed".into()));
        }
        Permutation::new(images.iter().map(|i| i - 1).collect())
    }

    /// From 1-indexed cycles, e.g. `&[&[1, 2, 3]]` for `(1 2 3)`.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        for cycle in cycles {
            for (k, &from) in cycle.iter().enumerate() {
                let to = cycle[(k + 1) % cycle.len()];
                if from == 0 || to == 0 || from > n || to > n {
                    return Err(SageError::InvalidPermutation(format!(
                        "cycle {cycle:?} out of range"
                    )));
                }
                images[from - 1] = to - 1;
            }
        }
        Permutation::new(images)
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (0..n).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Permutation { images }
    }

    /// Coordinate action `σ(α)_{σ(i)} = α_i`.
    pub fn act(&self, alpha: &Exponent) -> Result<Exponent> {
        if alpha.dim() != self.degree() {
            return Err(SageError::DimensionMismatch {
                expected: self.degree(),
                got: alpha.dim(),
            });
        }
        Ok(self.act_unchecked(alpha))
    }

    pub(crate) fn act_unchecked(&self, alpha: &Exponent) -> Exponent {
        let src = alpha.entries();
        let mut out = src.to_vec();
        for (i, &j) in self.images.iter().enumerate() {
            out[j] = src[i];
        }
        Exponent::new(out)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // cycle notation, 1-indexed
        let mut seen = vec![false; self.images.len()];
        let mut wrote = false;
        for start in 0..self.images.len() {
            if seen[start] || self.images[start] == start {
                continue;
            }
            write!(f, "(")?;
            let mut i = start;
            let mut first = true;
            while !seen[i] {
                seen[i] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}", i + 1)?;
                first = false;
                i = self.images[i];
            }
            write!(f, ")")?;
            wrote = true;
        }
        if !wrote {
            write!(f, "id")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// Direct product of full symmetric groups on disjoint coordinate blocks.
    /// Blocks are sorted and partition `0..n`.
    Young(Vec<Vec<usize>>),
    Generated(Vec<Permutation>),
}

/// An orbit of exponent vectors: canonical representative (the
/// lexicographically greatest element), exact size, and optionally the
/// elements themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitClass {
    pub representative: Exponent,
    pub size: BigUint,
    pub elements: Option<Vec<Exponent>>,
}

impl OrbitClass {
    pub fn singleton(e: Exponent) -> Self {
        OrbitClass {
            representative: e.clone(),
            size: BigUint::one(),
            elements: Some(vec![e]),
        }
    }
}

pub struct PermutationGroup {
    degree: usize,
    kind: GroupKind,
    elements: Mutex<Option<Arc<Vec<Permutation>>>>,
}

impl Clone for PermutationGroup {
    fn clone(&self) -> Self {
        PermutationGroup {
            degree: self.degree,
            kind: self.kind.clone(),
            elements: Mutex::new(self.elements.lock().expect("cache lock").clone()),
        }
    }
}

impl fmt::Debug for PermutationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PermutationGroup")
            .field("degree", &self.degree)
            .field("kind", &self.kind)
            .finish()
    }
}

impl PartialEq for PermutationGroup {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.kind == other.kind
    }
}

impl PermutationGroup {
    fn with_kind(degree: usize, kind: GroupKind) -> Self {
        PermutationGroup {
            degree,
            kind,
            elements: Mutex::new(None),
        }
    }

    /// The full symmetric group `S_n`.
    pub fn symmetric(n: usize) -> Self {
        Self::with_kind(n, GroupKind::Young(vec![(0..n).collect()]))
    }

    pub fn trivial(n: usize) -> Self {
        Self::with_kind(n, GroupKind::Young((0..n).map(|i| vec![i]).collect()))
    }

    /// The Young subgroup permuting freely within each block (0-indexed).
    pub fn young(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut blocks: Vec<Vec<usize>> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
        for b in &mut blocks {
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n || seen[i] {
                    return Err(SageError::InvalidPermutation(format!(
                        "blocks do not partition 0..{n}"
                    )));
                }
                seen[i] = true;
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                blocks.push(vec![i]);
            }
        }
        blocks.sort();
        Ok(Self::with_kind(n, GroupKind::Young(blocks)))
    }

    pub fn generated(n: usize, generators: Vec<Permutation>) -> Result<Self> {
        for g in &generators {
            if g.degree() != n {
                return Err(SageError::DimensionMismatch {
                    expected: n,
                    got: g.degree(),
                });
            }
        }
        let generators = generators
            .into_iter()
            .filter(|g| !g.is_identity())
            .collect();
        Ok(Self::with_kind(n, GroupKind::Generated(generators)))
    }

    /// `S_n` presented by all transpositions, forcing the enumeration path.
    pub fn symmetric_by_transpositions(n: usize) -> Self {
        let mut gens = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut images: Vec<usize> = (0..n).collect();
                images.swap(i, j);
                gens.push(Permutation { images });
            }
        }
        Self::with_kind(n, GroupKind::Generated(gens))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn young_blocks(&self) -> Option<&[Vec<usize>]> {
        match &self.kind {
            GroupKind::Young(b) => Some(b),
            GroupKind::Generated(_) => None,
        }
    }

    pub fn is_full_symmetric(&self) -> bool {
        matches!(&self.kind, GroupKind::Young(b) if b.len() == 1 || self.degree == 0)
    }

    pub fn is_trivial(&self) -> bool {
        match &self.kind {
            GroupKind::Young(b) => b.iter().all(|b| b.len() == 1),
            GroupKind::Generated(g) => g.is_empty(),
        }
    }

    fn check_dim(&self, alpha: &Exponent) -> Result<()> {
        if alpha.dim() != self.degree {
            return Err(SageError::DimensionMismatch {
                expected: self.degree,
                got: alpha.dim(),
            });
        }
        Ok(())
    }

    /// A generating set. Young groups use a transposition and a full cycle per
    /// block.
    pub fn generators(&self) -> Vec<Permutation> {
        match &self.kind {
            GroupKind::Generated(g) => g.clone(),
            GroupKind::Young(blocks) => {
                let mut gens = Vec::new();
                for b in blocks.iter().filter(|b| b.len() >= 2) {
                    let mut t: Vec<usize> = (0..self.degree).collect();
                    t.swap(b[0], b[1]);
                    gens.push(Permutation { images: t });
                    if b.len() >= 3 {
                        let mut c: Vec<usize> = (0..self.degree).collect();
                        for k in 0..b.len() {
                            c[b[k]] = b[(k + 1) % b.len()];
                        }
                        gens.push(Permutation { images: c });
                    }
                }
                gens
            }
        }
    }

    pub fn order(&self) -> Result<BigUint> {
        match &self.kind {
            GroupKind::Young(blocks) => Ok(blocks.iter().map(|b| factorial(b.len())).product()),
            GroupKind::Generated(_) => Ok(BigUint::from(self.elements()?.len())),
        }
    }

    /// All group elements, enumerated once and cached.
    pub fn elements(&self) -> Result<Arc<Vec<Permutation>>> {
        let mut cache = self.elements.lock().expect("cache lock");
        if let Some(el) = cache.as_ref() {
            return Ok(el.clone());
        }
        if let GroupKind::Young(_) = &self.kind {
            let order = self.order()?;
            if order > BigUint::from(ENUMERATION_LIMIT) {
                return Err(SageError::GroupTooLarge {
                    limit: ENUMERATION_LIMIT,
                });
            }
        }
        let gens = self.generators();
        let id = Permutation::identity(self.degree);
        let mut seen: HashSet<Permutation> = HashSet::new();
        seen.insert(id.clone());
        let mut out = vec![id.clone()];
        let mut queue = VecDeque::from([id]);
        while let Some(p) = queue.pop_front() {
            for g in &gens {
                let q = g.compose(&p);
                if seen.insert(q.clone()) {
                    if out.len() >= ENUMERATION_LIMIT {
                        return Err(SageError::GroupTooLarge {
                            limit: ENUMERATION_LIMIT,
                        });
                    }
                    out.push(q.clone());
                    queue.push_back(q);
                }
            }
        }
        out.sort();
        let arc = Arc::new(out);
        *cache = Some(arc.clone());
        Ok(arc)
    }

    /// Lexicographically greatest element of the orbit of `alpha`.
    pub fn canonical(&self, alpha: &Exponent) -> Result<Exponent> {
        self.check_dim(alpha)?;
        match &self.kind {
            GroupKind::Young(blocks) => Ok(young_canonical(blocks, alpha)),
            GroupKind::Generated(_) => Ok(self
                .orbit_elements(alpha)?
                .into_iter()
                .max()
                .expect("orbit is nonempty")),
        }
    }

    fn orbit_elements(&self, alpha: &Exponent) -> Result<Vec<Exponent>> {
        match &self.kind {
            GroupKind::Young(blocks) => {
                let size = young_orbit_size(blocks, alpha);
                if size > BigUint::from(MATERIALIZE_LIMIT) {
                    return Err(SageError::OrbitTooLarge {
                        size: size.to_string(),
                        limit: MATERIALIZE_LIMIT,
                    });
                }
                Ok(young_orbit(blocks, alpha))
            }
            GroupKind::Generated(gens) => bfs_orbit(gens, alpha, MATERIALIZE_LIMIT),
        }
    }

    /// The orbit of `alpha` with all elements materialized (sorted).
    pub fn orbit(&self, alpha: &Exponent) -> Result<OrbitClass> {
        self.check_dim(alpha)?;
        let mut elements = self.orbit_elements(alpha)?;
        elements.sort();
        Ok(OrbitClass {
            representative: elements.last().expect("orbit is nonempty").clone(),
            size: BigUint::from(elements.len()),
            elements: Some(elements),
        })
    }

    /// Representative and exact size, without materializing the orbit on the
    /// Young path.
    pub fn orbit_class(&self, alpha: &Exponent) -> Result<OrbitClass> {
        self.check_dim(alpha)?;
        match &self.kind {
            GroupKind::Young(blocks) => Ok(OrbitClass {
                representative: young_canonical(blocks, alpha),
                size: young_orbit_size(blocks, alpha),
                elements: None,
            }),
            GroupKind::Generated(_) => {
                let mut c = self.orbit(alpha)?;
                c.elements = None;
                Ok(c)
            }
        }
    }

    pub fn orbit_size(&self, alpha: &Exponent) -> Result<BigUint> {
        Ok(self.orbit_class(alpha)?.size)
    }

    pub fn stabilizer_order(&self, alpha: &Exponent) -> Result<BigUint> {
        self.check_dim(alpha)?;
        match &self.kind {
            GroupKind::Young(blocks) => Ok(blocks
                .iter()
                .flat_map(|b| value_counts(b, alpha).into_values())
                .map(factorial)
                .product()),
            GroupKind::Generated(_) => Ok(self.order()? / self.orbit_size(alpha)?),
        }
    }

    /// Point stabilizer. For Young groups this is the Young subgroup on the
    /// blocks of equal entries; otherwise Schreier generators from an orbit
    /// transversal.
    pub fn stabilizer(&self, alpha: &Exponent) -> Result<PermutationGroup> {
        self.check_dim(alpha)?;
        match &self.kind {
            GroupKind::Young(blocks) => {
                let mut refined = Vec::new();
                for b in blocks {
                    let mut by_value: BTreeMap<&Rational64, Vec<usize>> = BTreeMap::new();
                    for &i in b {
                        by_value.entry(&alpha.entries()[i]).or_default().push(i);
                    }
                    refined.extend(by_value.into_values());
                }
                PermutationGroup::young(self.degree, refined)
            }
            GroupKind::Generated(gens) => {
                let (points, transversal) = bfs_transversal(gens, alpha, MATERIALIZE_LIMIT)?;
                let index: HashMap<&Exponent, usize> =
                    points.iter().enumerate().map(|(k, p)| (p, k)).collect();
                let mut schreier: BTreeSet<Permutation> = BTreeSet::new();
                for (k, p) in points.iter().enumerate() {
                    for s in gens {
                        let q = s.act_unchecked(p);
                        let uq = &transversal[index[&q]];
                        let h = uq.inverse().compose(&s.compose(&transversal[k]));
                        if !h.is_identity() {
                            schreier.insert(h);
                        }
                    }
                }
                PermutationGroup::generated(self.degree, schreier.into_iter().collect())
            }
        }
    }

    /// Some `ρ ∈ G` with `ρ(from) = to`, or `None` if they lie in different
    /// orbits.
    pub fn transporter(&self, from: &Exponent, to: &Exponent) -> Result<Option<Permutation>> {
        self.check_dim(from)?;
        self.check_dim(to)?;
        match &self.kind {
            GroupKind::Young(blocks) => {
                let mut images: Vec<usize> = (0..self.degree).collect();
                for b in blocks {
                    let mut src: BTreeMap<&Rational64, Vec<usize>> = BTreeMap::new();
                    let mut dst: BTreeMap<&Rational64, Vec<usize>> = BTreeMap::new();
                    for &i in b {
                        src.entry(&from.entries()[i]).or_default().push(i);
                        dst.entry(&to.entries()[i]).or_default().push(i);
                    }
                    for (v, sp) in &src {
                        match dst.get(v) {
                            Some(dp) if dp.len() == sp.len() => {
                                for (a, b) in sp.iter().zip(dp) {
                                    images[*a] = *b;
                                }
                            }
                            _ => return Ok(None),
                        }
                    }
                }
                Ok(Some(Permutation { images }))
            }
            GroupKind::Generated(gens) => {
                let (points, transversal) = bfs_transversal(gens, from, MATERIALIZE_LIMIT)?;
                Ok(points
                    .iter()
                    .position(|p| p == to)
                    .map(|k| transversal[k].clone()))
            }
        }
    }

    /// Orbits of the group on coordinate indices. Their count is the dimension
    /// of the fixed subspace of `ℝⁿ`.
    pub fn coordinate_orbits(&self) -> Vec<Vec<usize>> {
        match &self.kind {
            GroupKind::Young(blocks) => blocks.clone(),
            GroupKind::Generated(gens) => {
                let mut parent: Vec<usize> = (0..self.degree).collect();
                fn find(p: &mut [usize], i: usize) -> usize {
                    let mut r = i;
                    while p[r] != r {
                        r = p[r];
                    }
                    let mut i = i;
                    while p[i] != r {
                        let next = p[i];
                        p[i] = r;
                        i = next;
                    }
                    r
                }
                for g in gens {
                    for i in 0..self.degree {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, g.apply(i)));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for i in 0..self.degree {
                    let r = find(&mut parent, i);
                    groups.entry(r).or_default().push(i);
                }
                groups.into_values().collect()
            }
        }
    }

    /// Partition `set` into orbits. Errors if `set` is not closed under the
    /// group. Classes are sorted by representative.
    fn partition(&self, set: &[Exponent], keep_elements: bool) -> Result<Vec<OrbitClass>> {
        for e in set {
            self.check_dim(e)?;
        }
        let members: BTreeSet<&Exponent> = set.iter().collect();
        let mut classes = Vec::new();
        match &self.kind {
            GroupKind::Young(blocks) => {
                let mut groups: BTreeMap<Exponent, Vec<Exponent>> = BTreeMap::new();
                for e in members {
                    groups
                        .entry(young_canonical(blocks, e))
                        .or_default()
                        .push(e.clone());
                }
                for (rep, elements) in groups {
                    let size = young_orbit_size(blocks, &rep);
                    if size != BigUint::from(elements.len()) {
                        return Err(SageError::NotClosed(format!(
                            "orbit of {rep} has {size} elements, {} present",
                            elements.len()
                        )));
                    }
                    classes.push(OrbitClass {
                        representative: rep,
                        size,
                        elements: keep_elements.then_some(elements),
                    });
                }
            }
            GroupKind::Generated(gens) => {
                let mut done: HashSet<&Exponent> = HashSet::new();
                for &e in &members {
                    if done.contains(e) {
                        continue;
                    }
                    let mut orbit = bfs_orbit(gens, e, MATERIALIZE_LIMIT)?;
                    for o in &orbit {
                        match members.get(o) {
                            Some(m) => {
                                done.insert(m);
                            }
                            None => {
                                return Err(SageError::NotClosed(format!(
                                    "{o} is the image of {e} but not in the set"
                                )))
                            }
                        }
                    }
                    orbit.sort();
                    classes.push(OrbitClass {
                        representative: orbit.last().expect("nonempty").clone(),
                        size: BigUint::from(orbit.len()),
                        elements: keep_elements.then_some(orbit),
                    });
                }
                classes.sort_by(|a, b| a.representative.cmp(&b.representative));
            }
        }
        Ok(classes)
    }

    /// One class per orbit in `set`, representatives are canonical.
    pub fn orbit_representatives(&self, set: &[Exponent]) -> Result<Vec<OrbitClass>> {
        self.partition(set, false)
    }

    /// Orbits of this group on `set`, with elements.
    pub fn suborbits(&self, set: &[Exponent]) -> Result<Vec<OrbitClass>> {
        self.partition(set, true)
    }

    /// Orbits of `sub` (a subgroup of `self`) on the orbit `self · alpha`.
    ///
    /// When both groups are Young and `sub` refines `self`, the classes are
    /// enumerated as contingency tables per block of `self`, without ever
    /// listing the orbit.
    pub fn orbit_suborbits(
        &self,
        alpha: &Exponent,
        sub: &PermutationGroup,
    ) -> Result<Vec<OrbitClass>> {
        self.check_dim(alpha)?;
        if let (Some(outer), Some(inner)) = (self.young_blocks(), sub.young_blocks()) {
            if let Some(layout) = refinement(outer, inner) {
                return Ok(young_suborbits(outer, inner, &layout, alpha));
            }
        }
        let orbit = self.orbit_elements(alpha)?;
        let mut classes = sub.suborbits(&orbit)?;
        for c in &mut classes {
            c.elements = None;
        }
        Ok(classes)
    }

    pub fn to_doc(&self) -> GroupDoc {
        let one = |b: &[usize]| b.iter().map(|i| i + 1).collect::<Vec<_>>();
        match &self.kind {
            _ if self.is_full_symmetric() => GroupDoc {
                degree: self.degree,
                kind: "symmetric".into(),
                generators: None,
                blocks: None,
            },
            _ if self.is_trivial() => GroupDoc {
                degree: self.degree,
                kind: "trivial".into(),
                generators: None,
                blocks: None,
            },
            GroupKind::Young(blocks) => GroupDoc {
                degree: self.degree,
                kind: "young".into(),
                generators: None,
                blocks: Some(blocks.iter().map(|b| one(b)).collect()),
            },
            GroupKind::Generated(gens) => GroupDoc {
                degree: self.degree,
                kind: "generated".into(),
                generators: Some(gens.iter().map(|g| one(&g.images)).collect()),
                blocks: None,
            },
        }
    }

    pub fn from_doc(doc: &GroupDoc) -> Result<Self> {
        let n = doc.degree;
        match doc.kind.as_str() {
            "symmetric" => Ok(PermutationGroup::symmetric(n)),
            "trivial" => Ok(PermutationGroup::trivial(n)),
            "young" => {
                let blocks = doc
                    .blocks
                    .as_ref()
                    .ok_or_else(|| SageError::Malformed("young group needs blocks".into()))?;
                let blocks = blocks
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|&i| {
                                i.checked_sub(1).ok_or_else(|| {
                                    SageError::Malformed("blocks are 1-indexed".into())
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                PermutationGroup::young(n, blocks)
            }
            "generated" => {
                let gens = doc.generators.as_ref().ok_or_else(|| {
                    SageError::Malformed("generated group needs generators".into())
                })?;
                let gens = gens
                    .iter()
                    .map(|g| {
                        if g.len() != n {
                            return Err(SageError::DimensionMismatch {
                                expected: n,
                                got: g.len(),
                            });
                        }
                        Permutation::from_one_indexed(g)
                    })
                    .collect::<Result<Vec<_>>>()?;
                PermutationGroup::generated(n, gens)
            }
            other => Err(SageError::Malformed(format!(
                "unknown group kind {other:?}"
            ))),
        }
    }

    pub fn describe(&self) -> String {
        if self.is_full_symmetric() {
            format!("S_{}", self.degree)
        } else if self.is_trivial() {
            format!("trivial({})", self.degree)
        } else {
            match &self.kind {
                GroupKind::Young(b) => format!("Young{:?}", b),
                GroupKind::Generated(g) => format!("<{} generators on {}>", g.len(), self.degree),
            }
        }
    }
}

/// Group JSON: `{"degree": n, "kind": "symmetric"}` or
/// `{"degree": n, "kind": "generated", "generators": [[…], …]}` (1-indexed).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroupDoc {
    pub degree: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<usize>>>,
}

pub fn parse_group(text: &str) -> Result<PermutationGroup> {
    let doc: GroupDoc =
        serde_json::from_str(text).map_err(|e| SageError::Malformed(e.to_string()))?;
    PermutationGroup::from_doc(&doc)
}

fn value_counts<'a>(block: &[usize], alpha: &'a Exponent) -> BTreeMap<&'a Rational64, usize> {
    let mut counts = BTreeMap::new();
    for &i in block {
        *counts.entry(&alpha.entries()[i]).or_insert(0) += 1;
    }
    counts
}

fn young_canonical(blocks: &[Vec<usize>], alpha: &Exponent) -> Exponent {
    let mut out = alpha.entries().to_vec();
    for b in blocks {
        let mut vals: Vec<Rational64> = b.iter().map(|&i| alpha.entries()[i]).collect();
        vals.sort_unstable_by(|a, b| b.cmp(a));
        for (&i, v) in b.iter().zip(vals) {
            out[i] = v;
        }
    }
    Exponent::new(out)
}

fn young_orbit_size(blocks: &[Vec<usize>], alpha: &Exponent) -> BigUint {
    blocks
        .iter()
        .map(|b| {
            let counts: Vec<usize> = value_counts(b, alpha).into_values().collect();
            multinomial(&counts)
        })
        .product()
}

/// Distinct arrangements of a multiset, in lexicographic order.
fn multiset_permutations(mut vals: Vec<Rational64>) -> Vec<Vec<Rational64>> {
    vals.sort_unstable();
    let mut out = vec![vals.clone()];
    loop {
        let n = vals.len();
        if n < 2 {
            break;
        }
        let mut i = n - 1;
        while i > 0 && vals[i - 1] >= vals[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while vals[j] <= vals[i - 1] {
            j -= 1;
        }
        vals.swap(i - 1, j);
        vals[i..].reverse();
        out.push(vals.clone());
    }
    out
}

fn young_orbit(blocks: &[Vec<usize>], alpha: &Exponent) -> Vec<Exponent> {
    let mut current = vec![alpha.entries().to_vec()];
    for b in blocks.iter().filter(|b| b.len() > 1) {
        let arrangements = multiset_permutations(b.iter().map(|&i| alpha.entries()[i]).collect());
        let mut next = Vec::with_capacity(current.len() * arrangements.len());
        for base in &current {
            for arr in &arrangements {
                let mut v = base.clone();
                for (&i, x) in b.iter().zip(arr) {
                    v[i] = *x;
                }
                next.push(v);
            }
        }
        current = next;
    }
    current.into_iter().map(Exponent::new).collect()
}

fn bfs_orbit(gens: &[Permutation], alpha: &Exponent, limit: usize) -> Result<Vec<Exponent>> {
    let mut seen: HashSet<Exponent> = HashSet::new();
    seen.insert(alpha.clone());
    let mut out = vec![alpha.clone()];
    let mut k = 0;
    while k < out.len() {
        for g in gens {
            let image = g.act_unchecked(&out[k]);
            if seen.insert(image.clone()) {
                if out.len() >= limit {
                    return Err(SageError::OrbitTooLarge {
                        size: format!(">{limit}"),
                        limit,
                    });
                }
                out.push(image);
            }
        }
        k += 1;
    }
    Ok(out)
}

/// Orbit points together with a transversal element `u_p` satisfying
/// `u_p(alpha) = p`.
fn bfs_transversal(
    gens: &[Permutation],
    alpha: &Exponent,
    limit: usize,
) -> Result<(Vec<Exponent>, Vec<Permutation>)> {
    let n = alpha.dim();
    let mut index: HashMap<Exponent, usize> = HashMap::new();
    index.insert(alpha.clone(), 0);
    let mut points = vec![alpha.clone()];
    let mut transversal = vec![Permutation::identity(n)];
    let mut k = 0;
    while k < points.len() {
        for g in gens {
            let image = g.act_unchecked(&points[k]);
            if !index.contains_key(&image) {
                if points.len() >= limit {
                    return Err(SageError::OrbitTooLarge {
                        size: format!(">{limit}"),
                        limit,
                    });
                }
                index.insert(image.clone(), points.len());
                transversal.push(g.compose(&transversal[k]));
                points.push(image);
            }
        }
        k += 1;
    }
    Ok((points, transversal))
}

/// For each outer block, the indices of the inner blocks it contains. `None`
/// if the inner partition does not refine the outer one.
fn refinement(outer: &[Vec<usize>], inner: &[Vec<usize>]) -> Option<Vec<Vec<usize>>> {
    let mut owner = vec![usize::MAX; outer.iter().map(|b| b.len()).sum()];
    for (k, b) in outer.iter().enumerate() {
        for &i in b {
            owner[i] = k;
        }
    }
    let mut layout = vec![Vec::new(); outer.len()];
    for (h, b) in inner.iter().enumerate() {
        let k = owner[b[0]];
        if b.iter().any(|&i| owner[i] != k) {
            return None;
        }
        layout[k].push(h);
    }
    Some(layout)
}

fn young_suborbits(
    outer: &[Vec<usize>],
    inner: &[Vec<usize>],
    layout: &[Vec<usize>],
    alpha: &Exponent,
) -> Vec<OrbitClass> {
    // Per outer block: every way of distributing the block's value multiset
    // over the inner blocks it contains.
    struct Choice {
        // (inner block, values sorted descending)
        fills: Vec<(usize, Vec<Rational64>)>,
        size: BigUint,
    }
    let mut per_block: Vec<Vec<Choice>> = Vec::new();
    for (k, b) in outer.iter().enumerate() {
        let counts = value_counts(b, alpha);
        let values: Vec<Rational64> = counts.keys().map(|v| **v).collect();
        let rows: Vec<usize> = counts.values().copied().collect();
        let cols: Vec<usize> = layout[k].iter().map(|&h| inner[h].len()).collect();
        let mut choices = Vec::new();
        for table in contingency_tables(&rows, &cols) {
            let mut fills = Vec::with_capacity(cols.len());
            let mut size = BigUint::one();
            for (j, &h) in layout[k].iter().enumerate() {
                let mut vals = Vec::with_capacity(cols[j]);
                let mut col: Vec<usize> = Vec::with_capacity(rows.len());
                // descending value order
                for (r, v) in values.iter().enumerate().rev() {
                    vals.extend(std::iter::repeat(*v).take(table[r][j]));
                    col.push(table[r][j]);
                }
                size *= multinomial(&col);
                fills.push((h, vals));
            }
            choices.push(Choice { fills, size });
        }
        per_block.push(choices);
    }

    let mut classes = Vec::new();
    let mut idx = vec![0usize; per_block.len()];
    let template = alpha.entries().to_vec();
    'outer: loop {
        let mut v = template.clone();
        let mut size = BigUint::one();
        for (k, &c) in idx.iter().enumerate() {
            let choice = &per_block[k][c];
            for (h, vals) in &choice.fills {
                for (&i, x) in inner[*h].iter().zip(vals) {
                    v[i] = *x;
                }
            }
            size *= &choice.size;
        }
        classes.push(OrbitClass {
            representative: Exponent::new(v),
            size,
            elements: None,
        });
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < per_block[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    classes.sort_by(|a, b| a.representative.cmp(&b.representative));
    classes
}

/// Convert an exact count to `f64`, refusing anything above 2^53.
pub fn count_to_f64(count: &BigUint) -> Result<f64> {
    if count.bits() > 53 {
        return Err(SageError::CountOverflow(count.to_string()));
    }
    Ok(count.to_f64().expect("fits in 53 bits"))
}
