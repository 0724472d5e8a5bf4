//! Orbit types, contingency-table counts and program-size prediction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SageError};
use crate::group::{OrbitClass, PermutationGroup};
use crate::signomial::Exponent;

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `(Σ kᵢ)! / Π kᵢ!`
pub fn multinomial(counts: &[usize]) -> BigUint {
    let mut total = 0;
    let mut acc = BigUint::one();
    for &k in counts {
        total += k;
        acc *= binomial(total, k);
    }
    acc
}

/// A weakly decreasing list of positive parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegerPartition {
    parts: Vec<usize>,
}

impl IntegerPartition {
    /// Sorts the parts and drops zeros.
    pub fn new(mut parts: Vec<usize>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        IntegerPartition { parts }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn sum(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// All partitions of `n`, in reverse lexicographic order.
    pub fn all(n: usize) -> Vec<IntegerPartition> {
        fn rec(n: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<IntegerPartition>) {
            if n == 0 {
                out.push(IntegerPartition {
                    parts: prefix.clone(),
                });
                return;
            }
            for p in (1..=n.min(max)).rev() {
                prefix.push(p);
                rec(n - p, p, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(n, n, &mut Vec::new(), &mut out);
        out
    }

    /// `(n−w, 1^w)`
    pub fn hook(n: usize, w: usize) -> IntegerPartition {
        let mut parts = vec![n - w];
        parts.extend(std::iter::repeat(1).take(w));
        IntegerPartition::new(parts)
    }
}

impl fmt::Display for IntegerPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitTypeInfo {
    pub full_type: IntegerPartition,
    pub reduced_type: IntegerPartition,
    pub weight: usize,
    pub length: usize,
}

pub fn orbit_type(alpha: &Exponent) -> OrbitTypeInfo {
    let mut counts: BTreeMap<&Rational64, usize> = BTreeMap::new();
    for v in alpha.entries() {
        *counts.entry(v).or_insert(0) += 1;
    }
    let full_type = IntegerPartition::new(counts.values().copied().collect());
    let reduced_type = IntegerPartition::new(
        counts
            .iter()
            .filter(|(v, _)| !v.is_zero())
            .map(|(_, &k)| k)
            .collect(),
    );
    OrbitTypeInfo {
        weight: reduced_type.sum(),
        length: full_type.len(),
        full_type,
        reduced_type,
    }
}

/// Number of nonnegative integer matrices with the given row and column
/// sums. Columns are processed one at a time; the state is the sorted vector
/// of residual row sums.
pub fn count_contingency(rows: &[usize], cols: &[usize]) -> BigUint {
    if rows.iter().sum::<usize>() != cols.iter().sum::<usize>() {
        return BigUint::zero();
    }
    let start = sorted_nonzero(rows.to_vec());
    let mut layer: HashMap<Vec<usize>, BigUint> = HashMap::from([(start, BigUint::one())]);
    for &c in cols.iter().filter(|&&c| c > 0) {
        let mut next: HashMap<Vec<usize>, BigUint> = HashMap::new();
        for (state, ways) in &layer {
            let mut residual = state.clone();
            distribute(state, 0, c, &mut residual, &mut |r| {
                *next
                    .entry(sorted_nonzero(r.to_vec()))
                    .or_insert_with(BigUint::zero) += ways;
            });
        }
        layer = next;
    }
    layer.remove(&Vec::new()).unwrap_or_default()
}

fn sorted_nonzero(mut v: Vec<usize>) -> Vec<usize> {
    v.retain(|&x| x > 0);
    v.sort_unstable();
    v
}

/// Calls `emit` with every residual obtained by removing `left` units from
/// `caps[i..]`, at most `caps[j]` from row `j`.
fn distribute(
    caps: &[usize],
    i: usize,
    left: usize,
    residual: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if i == caps.len() {
        if left == 0 {
            emit(residual);
        }
        return;
    }
    let room: usize = caps[i + 1..].iter().sum();
    let lo = left.saturating_sub(room);
    for take in lo..=left.min(caps[i]) {
        residual[i] = caps[i] - take;
        distribute(caps, i + 1, left - take, residual, emit);
    }
    residual[i] = caps[i];
}

/// Every table with the given margins, as `table[row][col]`.
pub fn contingency_tables(rows: &[usize], cols: &[usize]) -> Vec<Vec<Vec<usize>>> {
    fn fill(
        rows: &mut Vec<usize>,
        cols: &[usize],
        j: usize,
        table: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if j == cols.len() {
            if rows.iter().all(|&r| r == 0) {
                out.push(table.clone());
            }
            return;
        }
        let caps = rows.clone();
        let mut residual = caps.clone();
        let mut options = Vec::new();
        distribute(&caps, 0, cols[j], &mut residual, &mut |r| {
            options.push(r.to_vec())
        });
        for r in options {
            for i in 0..caps.len() {
                table[i][j] = caps[i] - r[i];
            }
            *rows = r;
            fill(rows, cols, j + 1, table, out);
        }
        *rows = caps;
        for row in table.iter_mut() {
            row[j] = 0;
        }
    }
    let mut out = Vec::new();
    if rows.iter().sum::<usize>() != cols.iter().sum::<usize>() {
        return out;
    }
    let mut table = vec![vec![0; cols.len()]; rows.len()];
    fill(&mut rows.to_vec(), cols, 0, &mut table, &mut out);
    out
}

/// `u(w) = Σ_{i=0}^{w} C(w,i)² i!`
pub fn u(w: usize) -> BigUint {
    (0..=w)
        .map(|i| {
            let b = binomial(w, i);
            &b * &b * factorial(i)
        })
        .sum()
}

/// `|Stab(α̂) \ G / Stab(β̂)|`.
///
/// Young groups multiply contingency counts over blocks. Other groups count
/// `Stab(α̂)`-orbits on `G·β̂` (which is `G / Stab(β̂)`) by Burnside's lemma.
pub fn double_coset_count(
    group: &PermutationGroup,
    alpha: &Exponent,
    beta: &Exponent,
) -> Result<BigUint> {
    if alpha.dim() != group.degree() || beta.dim() != group.degree() {
        return Err(SageError::DimensionMismatch {
            expected: group.degree(),
            got: if alpha.dim() != group.degree() {
                alpha.dim()
            } else {
                beta.dim()
            },
        });
    }
    if let Some(blocks) = group.young_blocks() {
        let mut total = BigUint::one();
        for b in blocks {
            let rows = block_type(b, alpha);
            let cols = block_type(b, beta);
            total *= count_contingency(&rows, &cols);
        }
        return Ok(total);
    }
    let stab = group.stabilizer(alpha)?;
    let elements = stab.elements()?;
    let orbit = group.orbit(beta)?.elements.expect("materialized");
    let mut fixed = BigUint::zero();
    for h in elements.iter() {
        let count = orbit.iter().filter(|p| &h.act_unchecked(p) == *p).count();
        fixed += BigUint::from(count);
    }
    Ok(fixed / BigUint::from(elements.len()))
}

fn block_type(block: &[usize], alpha: &Exponent) -> Vec<usize> {
    let mut counts: BTreeMap<&Rational64, usize> = BTreeMap::new();
    for &i in block {
        *counts.entry(&alpha.entries()[i]).or_insert(0) += 1;
    }
    counts.into_values().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Reduced,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Reduced => "reduced",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizePrediction {
    pub mode: Mode,
    #[serde(with = "crate::bigint_string")]
    pub variables: BigUint,
    pub equalities: usize,
    pub inequalities: usize,
    pub includes_bound_variable: bool,
}

impl SizePrediction {
    pub fn constraints(&self) -> usize {
        self.equalities + self.inequalities
    }

    /// Box supports add a nonnegative pair per equality row.
    pub fn with_box_auxiliaries(mut self) -> Self {
        self.variables += BigUint::from(2 * self.equalities);
        self
    }
}

/// Variable and constraint counts of the membership program (or the bound
/// program when `with_bound_variable`) for the given orbit classes.
pub fn predict_sizes(
    ahat: &[OrbitClass],
    bhat: &[OrbitClass],
    group: &PermutationGroup,
    mode: Mode,
    with_bound_variable: bool,
) -> Result<SizePrediction> {
    let n = group.degree();
    let extra = if with_bound_variable { 1u32 } else { 0 };
    match mode {
        Mode::Standard => {
            let a: BigUint = ahat.iter().map(|c| c.size.clone()).sum();
            let b: BigUint = bhat.iter().map(|c| c.size.clone()).sum();
            let as_usize = |x: &BigUint| {
                usize::try_from(x).map_err(|_| SageError::CountOverflow(x.to_string()))
            };
            let (a_n, b_n) = (as_usize(&a)?, as_usize(&b)?);
            Ok(SizePrediction {
                mode,
                variables: BigUint::from(2u32) * a * b + BigUint::from(extra),
                equalities: b_n * n,
                inequalities: b_n + a_n,
                includes_bound_variable: with_bound_variable,
            })
        }
        Mode::Reduced => {
            let mut v = BigUint::zero();
            let mut equalities = 0;
            for beta in bhat {
                for alpha in ahat {
                    v += double_coset_count(group, &alpha.representative, &beta.representative)?;
                }
                equalities += group
                    .stabilizer(&beta.representative)?
                    .coordinate_orbits()
                    .len();
            }
            Ok(SizePrediction {
                mode,
                variables: BigUint::from(2u32) * v + BigUint::from(extra),
                equalities,
                inequalities: ahat.len() + bhat.len(),
                includes_bound_variable: with_bound_variable,
            })
        }
    }
}

/// `2m` where `m` is the largest weight among the exponents.
pub fn stabilization_threshold<'a>(exponents: impl IntoIterator<Item = &'a Exponent>) -> usize {
    2 * exponents
        .into_iter()
        .map(|e| orbit_type(e).weight)
        .max()
        .unwrap_or(0)
}

/// Append zeros up to dimension `n`.
pub fn pad_exponent(alpha: &Exponent, n: usize) -> Result<Exponent> {
    alpha.padded(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Permutation;
    use std::collections::BTreeSet;

    fn e(v: &[i64]) -> Exponent {
        Exponent::from_ints(v.iter().copied())
    }

    fn brute_tables(rows: &[usize], cols: &[usize]) -> usize {
        // exhaustive over every cell value up to its row sum
        let cells = rows.len() * cols.len();
        let mut count = 0;
        let mut vals = vec![0usize; cells];
        loop {
            let ok_rows = (0..rows.len()).all(|i| {
                (0..cols.len())
                    .map(|j| vals[i * cols.len() + j])
                    .sum::<usize>()
                    == rows[i]
            });
            let ok_cols = (0..cols.len()).all(|j| {
                (0..rows.len())
                    .map(|i| vals[i * cols.len() + j])
                    .sum::<usize>()
                    == cols[j]
            });
            if ok_rows && ok_cols {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == cells {
                    return count;
                }
                vals[k] += 1;
                if vals[k] <= rows[k / cols.len()] {
                    break;
                }
                vals[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn orbit_type_examples() {
        let t = orbit_type(&e(&[1, 1, 2]));
        assert_eq!(t.full_type.parts(), &[2, 1]);
        assert_eq!(t.reduced_type.parts(), &[2, 1]);
        assert_eq!((t.weight, t.length), (3, 2));
        let t = orbit_type(&e(&[0, 0, 1]));
        assert_eq!(t.full_type.parts(), &[2, 1]);
        assert_eq!(t.reduced_type.parts(), &[1]);
        assert_eq!(t.weight, 1);
        let t = orbit_type(&e(&[3, 3, 3, 3]));
        assert_eq!(t.full_type.parts(), &[4]);
        assert_eq!(t.length, 1);
    }

    #[test]
    fn contingency_examples() {
        assert_eq!(count_contingency(&[2, 1], &[3]), BigUint::from(1u32));
        assert_eq!(count_contingency(&[2, 1], &[2, 1]), BigUint::from(2u32));
        let h = IntegerPartition::hook(6, 2);
        assert_eq!(count_contingency(h.parts(), h.parts()), BigUint::from(7u32));
        assert_eq!(count_contingency(&[2], &[1]), BigUint::zero());
        assert_eq!(brute_tables(&[2, 1], &[2, 1]), 2);
    }

    #[test]
    fn contingency_matches_brute_force_small() {
        for n in 1..=5 {
            let parts = IntegerPartition::all(n);
            for a in &parts {
                for b in &parts {
                    let expected = brute_tables(a.parts(), b.parts());
                    assert_eq!(
                        count_contingency(a.parts(), b.parts()),
                        BigUint::from(expected)
                    );
                    assert_eq!(contingency_tables(a.parts(), b.parts()).len(), expected);
                }
            }
        }
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (1..=8).map(|n| IntegerPartition::all(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 5, 7, 11, 15, 22]);
    }

    #[test]
    fn u_values() {
        assert_eq!(u(0), BigUint::from(1u32));
        assert_eq!(u(1), BigUint::from(2u32));
        assert_eq!(u(2), BigUint::from(7u32));
        assert_eq!(u(3), BigUint::from(34u32));
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[1, 1, 5]), BigUint::from(42u32));
        assert_eq!(factorial(5), BigUint::from(120u32));
        assert_eq!(binomial(6, 3), BigUint::from(20u32));
    }

    fn brute_double_cosets(g: &PermutationGroup, a: &Exponent, b: &Exponent) -> usize {
        let elements = g.elements().unwrap();
        let h1: Vec<Permutation> = elements
            .iter()
            .filter(|s| &s.act_unchecked(a) == a)
            .cloned()
            .collect();
        let h2: Vec<Permutation> = elements
            .iter()
            .filter(|s| &s.act_unchecked(b) == b)
            .cloned()
            .collect();
        let mut cosets: BTreeSet<BTreeSet<Permutation>> = BTreeSet::new();
        for s in elements.iter() {
            let set: BTreeSet<Permutation> = h1
                .iter()
                .flat_map(|x| h2.iter().map(move |y| x.compose(&s.compose(y))))
                .collect();
            cosets.insert(set);
        }
        cosets.len()
    }

    #[test]
    fn double_coset_examples() {
        let s3 = PermutationGroup::symmetric(3);
        assert_eq!(
            double_coset_count(&s3, &e(&[1, 1, 2]), &e(&[1, 1, 1])).unwrap(),
            BigUint::one()
        );
        assert_eq!(
            double_coset_count(&s3, &e(&[1, 1, 2]), &e(&[1, 1, 2])).unwrap(),
            BigUint::from(2u32)
        );
        let g = PermutationGroup::symmetric_by_transpositions(3);
        assert_eq!(
            double_coset_count(&g, &e(&[1, 1, 2]), &e(&[1, 1, 2])).unwrap(),
            BigUint::from(2u32)
        );
        assert_eq!(brute_double_cosets(&g, &e(&[1, 1, 2]), &e(&[1, 1, 2])), 2);
        let c = PermutationGroup::generated(
            4,
            vec![Permutation::from_cycles(4, &[&[1, 2, 3, 4]]).unwrap()],
        )
        .unwrap();
        for a in [e(&[1, 0, 0, 0]), e(&[1, 1, 0, 0]), e(&[1, 0, 1, 0])] {
            assert_eq!(
                double_coset_count(&c, &a, &e(&[2, 2, 2, 2])).unwrap(),
                BigUint::one()
            );
            let b = e(&[3, 1, 0, 0]);
            assert_eq!(
                double_coset_count(&c, &a, &b).unwrap(),
                BigUint::from(brute_double_cosets(&c, &a, &b))
            );
        }
    }

    #[test]
    fn sizes_of_example_four_three() {
        let s3 = PermutationGroup::symmetric(3);
        let a = vec![e(&[0, 0, 0]), e(&[7, 0, 0]), e(&[0, 7, 0]), e(&[0, 0, 7])];
        let b = vec![e(&[1, 1, 2]), e(&[1, 2, 1]), e(&[2, 1, 1]), e(&[2, 2, 2])];
        let ahat = s3.orbit_representatives(&a).unwrap();
        let bhat = s3.orbit_representatives(&b).unwrap();
        let r = predict_sizes(&ahat, &bhat, &s3, Mode::Reduced, false).unwrap();
        assert_eq!(
            (r.variables.clone(), r.constraints()),
            (BigUint::from(10u32), 7)
        );
        let s = predict_sizes(&ahat, &bhat, &s3, Mode::Standard, false).unwrap();
        assert_eq!(
            (s.variables.clone(), s.constraints()),
            (BigUint::from(32u32), 20)
        );
    }

    #[test]
    fn padding() {
        let p = pad_exponent(&e(&[1, 2]), 5).unwrap();
        assert_eq!(p, e(&[1, 2, 0, 0, 0]));
        assert_eq!(
            orbit_type(&p).reduced_type,
            orbit_type(&e(&[1, 2])).reduced_type
        );
        assert!(pad_exponent(&e(&[1, 2]), 1).is_err());
        assert_eq!(stabilization_threshold([&e(&[0, 0, 1]), &e(&[1, 1, 0])]), 4);
    }
}
