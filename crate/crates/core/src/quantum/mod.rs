//! One- and two-qubit states: construction, measurement statistics, purity,
//! fidelity and physicality checks.

pub mod format;
mod pauli;
pub mod random;
mod state;

pub use pauli::{equatorial, equatorial_eigenstate, projector_of, PauliLabel, PHI_X, PHI_Y};
pub use state::{basis, bell_target_ket, check_physical, real_matrix, PhysicalityReport, TwoQubitState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantumError {
    #[error("matrix is not Hermitian (max |A - A†| = {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    TraceNotOne(f64),
    #[error("operator is not unitary (max |U†U - 1| = {0:e})")]
    NotUnitary(f64),
    #[error("state vector norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
