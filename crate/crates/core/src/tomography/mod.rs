//! Estimation on joint counts: Pauli expectations, linear inversion,
//! likelihood reconstruction, local-unitary alignment, fidelity bounds,
//! dark-count correction and the parity and Ramsey fits.

mod bounds;
mod counts;
mod fits;
mod overlap;
mod reconstruct;
mod report;

use thiserror::Error;

use crate::quantum::QuantumError;

pub use bounds::{
    dark_count_correct, dark_count_correct_cells, fidelity_lower_bound, fidelity_upper_bound, fidelity_upper_estimate,
    BasisProbabilities, ClampedCell, DarkCorrected, Estimate, RotatedSource,
};
pub use counts::{
    cells_from_joint, expectations_from_counts, multinomial, setting_probabilities, Cells, CountsTable, ExpectationSet,
};
pub use fits::{fit_sinusoid, parity_fit, ramsey_fit, ParityFit, RamseyFit, SinusoidFit};
pub use overlap::{optimize_local_overlap, su2_from_rotation, OverlapResult, OverlapSummary};
pub use reconstruct::{linear_inversion, log_likelihood, mle_reconstruct, project_physical, MleResult};
pub use report::{analyze, fit_scan, Analysis, AnalysisOptions, BasisContrast, DarkCounts, FidelityReport, RotatedChoice};

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("missing settings: {0:?}")]
    MissingSetting(Vec<String>),
    #[error("probability {0} outside [0, 1]")]
    NegativeProbability(f64),
    #[error("count {0} is negative or not finite")]
    NegativeCount(f64),
    #[error("no counts")]
    NoCounts,
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("{got} points given, at least {need} needed")]
    TooFewPoints { need: usize, got: usize },
    #[error("phase points span {0:.3} rad, less than a full period")]
    InsufficientSpan(f64),
    #[error("purity {0} outside the domain [0.5, 1] of the upper bound")]
    Domain(f64),
    #[error("state is not physical (min eigenvalue {0:e})")]
    Unphysical(f64),
    #[error("likelihood maximization did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<MleResult>),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}
