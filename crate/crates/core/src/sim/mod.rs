//! Monte Carlo model of the entanglement sequence: emission, photon
//! projection, atomic analysis pulses, fluorescence readout and dark counts.

mod config;
mod engine;
mod histogram;
mod output;
mod pulses;
mod ramsey;
mod readout;
mod state_model;

use thiserror::Error;

use crate::cavity::CavityError;
use crate::tomography::TomoError;

pub use config::{
    AcLine, DephasingModel, ExperimentConfig, ReadoutModel, StateModel, TimingModel, WavepacketModel, LARMOR_MHZ_PER_GAUSS,
    WAIT_WINDOW_NS,
};
pub use engine::{
    inject_dark_counts, run_sequence, GroundTruth, JointCounts, PhotonEvent, Port, RunOutput, RunSummary, SettingSummary,
    ShotOutcome,
};
pub use histogram::{arrival_time_histogram, Histogram};
pub use output::{config_hash, read_summary_csv, write_shot_log, write_summary_csv, RunMetadata, SummaryRow};
pub use pulses::{
    apply_atomic_pulses, atomic_unitary, correlation_probability, field_phase, joint_probabilities, line_phases, rabi_pulse,
    sample_dephasing_phase, sample_field_offset, scan_settings, tomography_settings, AtomAnalysis, Setting, ShotPhases,
    HYPERFINE_HZ_PER_MG, ZEEMAN_HZ_PER_MG,
};
pub use ramsey::{simulate_ramsey, MIN_SHOTS_PER_POINT, RamseyConfig, RamseyPoint, RamseyQubit, RamseyResult};
pub use readout::{fluorescence_readout, p_called_bright, poisson_below, readout_fidelity};
pub use state_model::{dephasing_factor, emitted_joint_state};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("no measurement settings given")]
    NoSettings,
    #[error("purity target {target} cannot be reached: {reason}")]
    InfeasiblePurity { target: f64, reason: String },
    #[error("{got} shots per phase point, at least {need} needed")]
    InsufficientShots { need: u64, got: u64 },
    #[error("arrival-time width undefined: {0}")]
    FwhmUndefined(&'static str),
    #[error("shot log was not retained")]
    NoLog,
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    Fit(#[from] TomoError),
    #[error("malformed summary: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
