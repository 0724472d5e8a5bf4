//! SAGE lower bounds and nonnegativity certificates for signomials, with
//! symmetry reduction under permutation groups.

pub mod bench;
pub mod certificate;
pub mod combinatorics;
pub mod error;
pub mod families;
pub mod group;
pub mod program;
pub mod signomial;
pub mod solver;

pub use bench::{run_benchmark, BenchConfig, BenchmarkRow, MethodResult};
pub use certificate::{
    expand_certificate, extract_certificate, verify_certificate, ReducedCertificate,
    VerificationReport,
};
pub use combinatorics::{
    count_contingency, double_coset_count, orbit_type, predict_sizes, IntegerPartition, Mode,
    OrbitTypeInfo, SizePrediction,
};
pub use error::{Result, SageError};
pub use families::{family_instance, generate_family, Family};
pub use group::{OrbitClass, Permutation, PermutationGroup};
pub use program::{
    BuildOptions, CanonicalProgram, Coefficient, ConicProgram, Instance, Objective,
    OriginPlacement, SupportOracle,
};
pub use signomial::{parse_signomial, Exponent, SignSupport, Signomial};
pub use solver::{solve, SolveResult, SolveStatus, SolverConfig};

/// Serialize big integers as decimal strings.
pub(crate) mod bigint_string {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}
