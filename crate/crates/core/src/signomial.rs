//! Exact-exponent signomials `Σ c_α exp(⟨α, x⟩)`.
//!
//! Exponents are rational vectors compared exactly, so they can be used as
//! keys for orbit and stabilizer computations. Coefficients are `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::group::PermutationGroup;

/// Default relative tolerance used by [`check_invariance`].
pub const DEFAULT_INVARIANCE_TOL: f64 = 1e-9;

/// A rational exponent vector. Ordering is lexicographic on the entries.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exponent(Vec<Rational64>);

impl Exponent {
    pub fn new(entries: Vec<Rational64>) -> Self {
        Exponent(entries)
    }

    pub fn from_ints<I: IntoIterator<Item = i64>>(entries: I) -> Self {
        Exponent(entries.into_iter().map(Rational64::from_integer).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Exponent(vec![Rational64::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[Rational64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|r| r.is_zero())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational_to_f64).collect()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(a, xi)| rational_to_f64(a) * xi)
            .sum()
    }

    /// Appends zeros up to dimension `n`.
    pub fn padded(&self, n: usize) -> Result<Exponent> {
        if n < self.dim() {
            return Err(SageError::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        let mut entries = self.0.clone();
        entries.resize(n, Rational64::zero());
        Ok(Exponent(entries))
    }
}

// Rationals are kept in lowest terms with a positive denominator, so hashing
// the raw parts agrees with equality and avoids `Ratio`'s slower hash.
impl std::hash::Hash for Exponent {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_usize(self.0.len());
        for r in &self.0 {
            state.write_i64(*r.numer());
            state.write_i64(*r.denom());
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn rational_to_f64(r: &Rational64) -> f64 {
    if *r.denom() == 1 {
        *r.numer() as f64
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

/// JSON form of a rational: a bare integer or a `"p/q"` string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalRepr {
    Int(i64),
    Text(String),
}

impl RationalRepr {
    pub fn parse(&self) -> Result<Rational64> {
        match self {
            RationalRepr::Int(v) => Ok(Rational64::from_integer(*v)),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }
}

impl From<&Rational64> for RationalRepr {
    fn from(r: &Rational64) -> Self {
        if *r.denom() == 1 {
            RationalRepr::Int(*r.numer())
        } else {
            RationalRepr::Text(format!("{}/{}", r.numer(), r.denom()))
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational64> {
    let bad = || SageError::Malformed(format!("invalid rational {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(p, q))
        }
        None => Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        exponent_to_repr(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = Vec::<RationalRepr>::deserialize(d)?;
        exponent_from_repr(&repr).map_err(serde::de::Error::custom)
    }
}

pub fn exponent_to_repr(e: &Exponent) -> Vec<RationalRepr> {
    e.entries().iter().map(RationalRepr::from).collect()
}

pub fn exponent_from_repr(r: &[RationalRepr]) -> Result<Exponent> {
    Ok(Exponent(
        r.iter().map(RationalRepr::parse).collect::<Result<_>>()?,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub exponent: Vec<RationalRepr>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignomialDoc {
    pub dimension: usize,
    pub terms: Vec<TermDoc>,
}

/// A finite sum of exponentials with exact exponents.
///
/// Terms are kept in lexicographic exponent order. Zero coefficients are never
/// stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Signomial {
    dim: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Signomial {
    pub fn zero(dim: usize) -> Self {
        Signomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// Builds a signomial, summing duplicate exponents and dropping exact zeros.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        let mut map: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (e, c) in terms {
            if e.dim() != dim {
                return Err(SageError::DimensionMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
            if !c.is_finite() {
                return Err(SageError::NonFinite(c));
            }
            *map.entry(e).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Signomial { dim, terms: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    /// Coefficient at `e`, zero when absent.
    pub fn coefficient(&self, e: &Exponent) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &Exponent> {
        self.terms.keys()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(SageError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.terms.iter().map(|(e, c)| c * e.dot(x).exp()).sum())
    }

    /// Returns `self + shift` at exponent `e`, used for `f − λ`.
    pub fn add_term(&self, e: Exponent, c: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .chain(std::iter::once((e, c)));
        Signomial::from_terms(self.dim, terms)
    }

    pub fn to_doc(&self) -> SignomialDoc {
        SignomialDoc {
            dimension: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermDoc {
                    exponent: exponent_to_repr(e),
                    coefficient: *c,
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &SignomialDoc) -> Result<Self> {
        if doc.dimension == 0 {
            return Err(SageError::Malformed("dimension must be positive".into()));
        }
        let terms = doc
            .terms
            .iter()
            .map(|t| Ok((exponent_from_repr(&t.exponent)?, t.coefficient)))
            .collect::<Result<Vec<_>>>()?;
        Signomial::from_terms(doc.dimension, terms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("signomial serializes")
    }
}

/// Parses the signomial JSON document.
pub fn parse_signomial(text: &str) -> Result<Signomial> {
    let doc: SignomialDoc =
        serde_json::from_str(text).map_err(|e| SageError::Malformed(e.to_string()))?;
    Signomial::from_doc(&doc)
}

/// Positive and negative parts of the support.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignSupport {
    pub positives: BTreeSet<Exponent>,
    pub negatives: BTreeSet<Exponent>,
}

pub fn sign_partition(f: &Signomial) -> SignSupport {
    let mut out = SignSupport::default();
    for (e, c) in f.terms() {
        if c > 0.0 {
            out.positives.insert(e.clone());
        } else {
            out.negatives.insert(e.clone());
        }
    }
    out
}

/// Reynolds average `(1/|G|) Σ_σ σf`, computed on exponents.
///
/// A term `c e^{⟨α,x⟩}` spreads as `c / |G·α|` over every element of its orbit.
pub fn symmetrize(f: &Signomial, group: &PermutationGroup) -> Result<Signomial> {
    if group.degree() != f.dim() {
        return Err(SageError::DimensionMismatch {
            expected: f.dim(),
            got: group.degree(),
        });
    }
    let mut acc: BTreeMap<Exponent, f64> = BTreeMap::new();
    for (e, c) in f.terms() {
        let orbit = group.orbit(e)?;
        let elements = orbit.elements.as_ref().expect("materialized orbit");
        let share = c / elements.len() as f64;
        for el in elements {
            *acc.entry(el.clone()).or_insert(0.0) += share;
        }
    }
    Signomial::from_terms(f.dim(), acc)
}

/// True when every generator maps each term onto a term with the same
/// coefficient, up to `tol` relative to the coefficient magnitude.
pub fn check_invariance(f: &Signomial, group: &PermutationGroup, tol: f64) -> Result<bool> {
    if group.degree() != f.dim() {
        return Err(SageError::DimensionMismatch {
            expected: f.dim(),
            got: group.degree(),
        });
    }
    for sigma in group.generators() {
        for (e, c) in f.terms() {
            let image = sigma.act(e)?;
            let d = f.coefficient(&image);
            if (d - c).abs() > tol * c.abs().max(d.abs()).max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[i64]) -> Exponent {
        Exponent::from_ints(v.iter().copied())
    }

    #[test]
    fn parse_f1_two() {
        let doc = r#"{"dimension": 2, "terms": [
            {"exponent": [1, 2], "coefficient": 2.0},
            {"exponent": [2, 1], "coefficient": 2.0},
            {"exponent": [1, 1], "coefficient": -2.0}]}"#;
        let f = parse_signomial(doc).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.len(), 3);
        assert_eq!(f.coefficient(&e(&[1, 1])), -2.0);
    }

    #[test]
    fn parse_merges_duplicates() {
        let doc = r#"{"dimension": 2, "terms": [
            {"exponent": [0, 0], "coefficient": 2},
            {"exponent": ["0/3", 0], "coefficient": 3}]}"#;
        let f = parse_signomial(doc).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.coefficient(&e(&[0, 0])), 5.0);
    }

    #[test]
    fn parse_rejects_length_mismatch() {
        let doc = r#"{"dimension": 3, "terms": [
            {"exponent": [1, 2, 3], "coefficient": 1},
            {"exponent": [1, 2], "coefficient": 1}]}"#;
        assert!(matches!(
            parse_signomial(doc),
            Err(SageError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parse_rational_strings() {
        let doc = r#"{"dimension": 1, "terms": [{"exponent": ["-3/6"], "coefficient": 1}]}"#;
        let f = parse_signomial(doc).unwrap();
        let (ex, _) = f.terms().next().unwrap();
        assert_eq!(ex.entries()[0], Rational64::new(-1, 2));
        assert!(parse_signomial(
            r#"{"dimension": 1, "terms": [{"exponent": ["1/0"], "coefficient": 1}]}"#
        )
        .is_err());
    }

    #[test]
    fn cancelling_terms_are_dropped() {
        let f = Signomial::from_terms(1, vec![(e(&[1]), 2.0), (e(&[1]), -2.0), (e(&[0]), 1.0)])
            .unwrap();
        let part = sign_partition(&f);
        assert_eq!(part.positives.len(), 1);
        assert!(part.negatives.is_empty());
    }

    #[test]
    fn evaluate_example_three_one_at_origin() {
        let delta = (9.0f64 / 4.0).cbrt();
        let mut terms = vec![
            (e(&[6, 0, 0]), 1.0),
            (e(&[0, 6, 0]), 1.0),
            (e(&[0, 0, 6]), 1.0),
            (e(&[1, 1, 1]), 1.0),
        ];
        for b in [[1, 2, 2], [2, 1, 2], [2, 2, 1]] {
            terms.push((e(&b), -delta));
        }
        let f = Signomial::from_terms(3, terms).unwrap();
        // 4 - 3 * cbrt(9/4), evaluated independently at high precision.
        let expected = 0.068_887_908_686_655_09;
        assert!((f.evaluate(&[0.0; 3]).unwrap() - expected).abs() < 1e-12);
        assert!(f.evaluate(&[0.0; 2]).is_err());
    }

    #[test]
    fn zero_signomial_evaluates_to_zero() {
        assert_eq!(Signomial::zero(3).evaluate(&[1.0, -2.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn symmetrize_under_s2_and_s3() {
        let f = Signomial::from_terms(2, vec![(e(&[1, 0]), 1.0)]).unwrap();
        let s = symmetrize(&f, &PermutationGroup::symmetric(2)).unwrap();
        assert_eq!(s.coefficient(&e(&[1, 0])), 0.5);
        assert_eq!(s.coefficient(&e(&[0, 1])), 0.5);

        let f = Signomial::from_terms(3, vec![(e(&[1, 0, 0]), 1.0)]).unwrap();
        let s = symmetrize(&f, &PermutationGroup::symmetric(3)).unwrap();
        assert_eq!(s.len(), 3);
        for x in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert!((s.coefficient(&e(&x)) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(check_invariance(&s, &PermutationGroup::symmetric(3), 1e-12).unwrap());
        assert!(!check_invariance(&f, &PermutationGroup::symmetric(3), 1e-12).unwrap());
    }

    #[test]
    fn invariant_input_is_fixed_by_symmetrize() {
        let g = PermutationGroup::symmetric(3);
        let f = Signomial::from_terms(
            3,
            vec![
                (e(&[2, 0, 0]), 1.5),
                (e(&[0, 2, 0]), 1.5),
                (e(&[0, 0, 2]), 1.5),
                (e(&[1, 1, 1]), -1.0),
            ],
        )
        .unwrap();
        let s = symmetrize(&f, &g).unwrap();
        assert_eq!(s.len(), f.len());
        for (ex, c) in f.terms() {
            assert!((s.coefficient(ex) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let f = Signomial::from_terms(
            2,
            vec![
                (
                    Exponent::new(vec![Rational64::new(1, 3), Rational64::from_integer(2)]),
                    0.1,
                ),
                (e(&[0, 0]), -7.25),
            ],
        )
        .unwrap();
        let back = parse_signomial(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }
}
