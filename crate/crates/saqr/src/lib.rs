//! Scalable approximate quantitative reasoning about quantum circuits.
//!
//! The library combines two layers of local reasoning about unitary circuits:
//!
//! * a qualitative layer of *projective predicates* — tuples of projectors,
//!   each acting on a small set of qubits — propagated through a circuit by a
//!   local abstract transformer ([`qai`]);
//! * a quantitative layer of *observable predicates* — tuples of local
//!   observables with `0 ≤ A ≤ I` — related across a circuit by Löwner
//!   inequalities ([`observables`], [`judge`]).
//!
//! All reasoning steps touch only small registers (the qubits of one gate plus
//! the qubits of the predicate entries it meets), so derivations scale to
//! registers far beyond what the dense simulator in [`oracle`] can represent.
//! The oracle is the ground truth at desk scale: every rule checker in
//! [`judge`] can be cross-checked against it, and the [`casestudies`] module
//! reproduces complete derivations for GHZ preparation, the quantum Fourier
//! transform, and quantum phase estimation.

pub mod casestudies;
pub mod circuit;
pub mod judge;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod qai;

pub use circuit::{Circuit, Gate, GateKind};
pub use linalg::{ComplexMatrix, QubitSet, Tolerance, C64};
pub use observables::ObservablePredicate;
pub use oracle::DensityMatrix;
pub use qai::ProjectivePredicate;

/// Default register-size cap for operations that materialize `2^n`-dimensional
/// matrices (the oracle and the exact rule checks).
pub const DEFAULT_CAP: usize = 12;

/// Default cap on the number of qubits in a single local-check register.
pub const DEFAULT_CAP_LOCAL: usize = 8;

/// Errors shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not a projector (residual {residual:.3e})")]
    NotProjector { residual: f64 },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("qubit index {index} out of range for register of {register} qubits")]
    IndexOutOfRange { index: usize, register: usize },
    #[error("invalid qubit set: {reason}")]
    InvalidQubitSet { reason: String },
    #[error("register of {qubits} qubits exceeds the size cap of {cap}")]
    CapExceeded { qubits: usize, cap: usize },
    #[error("local register of {qubits} qubits exceeds the per-check cap of {cap}")]
    LocalCapExceeded { qubits: usize, cap: usize },
    #[error("invalid gate: {reason}")]
    InvalidGate { reason: String },
    #[error("invalid predicate: {reason}")]
    InvalidPredicate { reason: String },
    #[error("predicate domains do not match: {context}")]
    DomainMismatch { context: String },
    #[error("empty concretization: the predicate admits no state")]
    EmptyConcretization,
    #[error("rule not applicable: {reason}")]
    RuleInapplicable { reason: String },
    #[error("invalid partition: {reason}")]
    InvalidPartition { reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
