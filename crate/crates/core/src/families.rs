//! The benchmark families `f1`–`f4` and `g`, all invariant under `S_n`.

use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;

use crate::combinatorics::factorial;
use crate::error::{Result, SageError};
use crate::group::PermutationGroup;
use crate::program::{Instance, Objective, OriginPlacement, SupportOracle};
use crate::signomial::{Exponent, Signomial};

/// Largest `n` for which factorial-size orbits are materialized by default.
pub const DEFAULT_MATERIALIZE_CAP: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    F1,
    F2,
    F3,
    F4,
    G,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::F1, Family::F2, Family::F3, Family::F4, Family::G];

    pub fn name(self) -> &'static str {
        match self {
            Family::F1 => "f1",
            Family::F2 => "f2",
            Family::F3 => "f3",
            Family::F4 => "f4",
            Family::G => "g",
        }
    }

    /// Whether some orbit of the family has `n!` elements.
    pub fn has_factorial_orbit(self) -> bool {
        !matches!(self, Family::F4)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SageError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(Family::F1),
            "f2" => Ok(Family::F2),
            "f3" => Ok(Family::F3),
            "f4" => Ok(Family::F4),
            "g" => Ok(Family::G),
            other => Err(SageError::Malformed(format!("unknown family {other:?}"))),
        }
    }
}

fn ramp(n: usize, f: impl Fn(i64) -> i64) -> Exponent {
    Exponent::from_ints((1..=n as i64).map(f))
}

fn corner(n: usize, value: i64) -> Exponent {
    let mut v = vec![0; n];
    v[0] = value;
    Exponent::from_ints(v)
}

/// One representative per orbit with the coefficient shared by the orbit.
pub fn family_representatives(family: Family, n: usize) -> Result<Vec<(Exponent, f64)>> {
    if n < 2 {
        return Err(SageError::Malformed("families need n ≥ 2".into()));
    }
    let nn = (n * n) as i64;
    let fact = |k: usize| factorial(k).to_f64().expect("finite");
    let terms = match family {
        Family::F1 => vec![
            (ramp(n, |i| i), n as f64),
            (Exponent::from_ints(vec![1; n]), -(n as f64)),
        ],
        Family::F2 => vec![(corner(n, nn), 1.0), (ramp(n, |i| i), -1.0 / fact(n - 1))],
        Family::F3 => vec![
            (ramp(n, |i| 2 * i * i), 1.0 / fact(n)),
            (ramp(n, |i| i), -1.0 / fact(n)),
        ],
        Family::F4 => {
            let mut beta = vec![(n - 1) as i64; n];
            beta[0] = n as i64;
            vec![(corner(n, nn), 1.0), (Exponent::from_ints(beta), -1.0)]
        }
        Family::G => vec![
            (corner(n, nn), 1.0 / n as f64),
            (ramp(n, |i| i * i), 1.0 / fact(n)),
            (Exponent::from_ints(vec![1; n]), -1.0),
            (ramp(n, |i| i), -1.0 / fact(n)),
        ],
    };
    Ok(terms)
}

/// The family as an instance of the given objective, without materializing
/// any orbit.
pub fn family_instance(family: Family, n: usize, objective: Objective) -> Result<Instance> {
    Instance::from_representatives(
        &PermutationGroup::symmetric(n),
        family_representatives(family, n)?,
        objective,
        SupportOracle::Free,
        OriginPlacement::Auto,
    )
}

/// The family as an explicit signomial together with `S_n`. Families with
/// `n!`-element orbits are refused above `cap`.
pub fn generate_family(
    family: Family,
    n: usize,
    cap: usize,
) -> Result<(Signomial, PermutationGroup)> {
    if family.has_factorial_orbit() && n > cap {
        return Err(SageError::OrbitTooLarge {
            size: format!("{n}!"),
            limit: cap,
        });
    }
    let g = PermutationGroup::symmetric(n);
    let mut terms = Vec::new();
    for (rep, c) in family_representatives(family, n)? {
        for e in g.orbit(&rep)?.elements.expect("materialized") {
            terms.push((e, c));
        }
    }
    Ok((Signomial::from_terms(n, terms)?, g))
}
