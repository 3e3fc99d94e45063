use serde::{Deserialize, Serialize};

use super::SimError;

/// Larmor splitting of the Zeeman qubit per Gauss.
pub const LARMOR_MHZ_PER_GAUSS: f64 = 2.8;
/// Wait window after each excitation in which a click triggers readout.
pub const WAIT_WINDOW_NS: f64 = 1000.0;

/// Poisson model of the fluorescence photon counts in one readout window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutModel {
    pub lambda_bright: f64,
    pub lambda_dark: f64,
    /// Counts at or above the threshold are called bright.
    pub threshold: u32,
    /// Probability that a shot draws from the other state's distribution.
    pub contrast_penalty: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            lambda_bright: 12.0,
            lambda_dark: 0.401,
            threshold: 2,
            contrast_penalty: 0.0,
        }
    }
}

impl ReadoutModel {
    pub fn perfect() -> Self {
        Self {
            lambda_bright: 1e3,
            lambda_dark: 0.0,
            threshold: 1,
            contrast_penalty: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.lambda_dark >= 0.0 && self.lambda_bright > self.lambda_dark) {
            return Err(invalid("readout.lambda_bright", "must exceed lambda_dark >= 0"));
        }
        if self.threshold < 1 {
            return Err(invalid("readout.threshold", "must be at least 1"));
        }
        check_probability("readout.contrast_penalty", self.contrast_penalty)
    }
}

/// Sinusoidal field line, e.g. mains pickup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcLine {
    pub frequency_hz: f64,
    pub amplitude_mg: f64,
    /// Draw the line phase at random once per run; otherwise it is zero.
    #[serde(default = "yes")]
    pub random_phase: bool,
}

fn yes() -> bool {
    true
}

/// Magnetic field noise: a quasi-static Gaussian offset per shot plus
/// deterministic AC lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DephasingModel {
    pub b_noise_rms_mg: f64,
    pub ac_components: Vec<AcLine>,
    /// Time the atomic superposition is exposed during the entanglement
    /// sequence.
    pub pulse_sequence_duration_us: f64,
}

impl Default for DephasingModel {
    fn default() -> Self {
        Self {
            b_noise_rms_mg: 0.105,
            ac_components: vec![
                AcLine {
                    frequency_hz: 50.0,
                    amplitude_mg: 0.05,
                    random_phase: true,
                },
                AcLine {
                    frequency_hz: 150.0,
                    amplitude_mg: 0.025,
                    random_phase: true,
                },
            ],
            pulse_sequence_duration_us: 57.0,
        }
    }
}

impl DephasingModel {
    pub fn quiet() -> Self {
        Self {
            b_noise_rms_mg: 0.0,
            ac_components: Vec::new(),
            pulse_sequence_duration_us: 57.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.b_noise_rms_mg >= 0.0) {
            return Err(invalid("dephasing.b_noise_rms_mg", "must be >= 0"));
        }
        for line in &self.ac_components {
            if !(line.amplitude_mg >= 0.0) || !(line.frequency_hz >= 0.0) {
                return Err(invalid("dephasing.ac_components", "amplitudes and frequencies must be >= 0"));
            }
        }
        if !(self.pulse_sequence_duration_us >= 0.0) {
            return Err(invalid("dephasing.pulse_sequence_duration_us", "must be >= 0"));
        }
        Ok(())
    }
}

/// Microwave timing relative to the excitation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingModel {
    /// RMS jitter of the microwave start against the excitation pulse.
    pub sync_jitter_ps: f64,
    /// Largest residual equatorial phase error; drawn uniformly in
    /// `[−budget, budget]` per shot.
    pub phase_uncertainty_budget: f64,
    /// Fixed equatorial phase error of the microwave pulses.
    pub phase_offset: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            sync_jitter_ps: 100.0,
            phase_uncertainty_budget: 0.05 * std::f64::consts::PI,
            phase_offset: 0.0,
        }
    }
}

impl TimingModel {
    pub fn ideal() -> Self {
        Self {
            sync_jitter_ps: 0.0,
            phase_uncertainty_budget: 0.0,
            phase_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.phase_uncertainty_budget >= 0.0) {
            return Err(invalid("timing.phase_uncertainty_budget", "must be >= 0"));
        }
        if !(self.sync_jitter_ps >= 0.0) {
            return Err(invalid("timing.sync_jitter_ps", "must be >= 0"));
        }
        Ok(())
    }
}

/// Noise on the emitted atom-photon state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateModel {
    /// Weight of the maximally mixed component.
    pub white_noise: f64,
    /// Purity the z-dephasing strength is solved for.
    pub purity_target: f64,
}

impl Default for StateModel {
    fn default() -> Self {
        Self {
            white_noise: 0.0,
            purity_target: 0.840,
        }
    }
}

impl StateModel {
    pub fn pure() -> Self {
        Self {
            white_noise: 0.0,
            purity_target: 1.0,
        }
    }
}

/// Temporal profile of the emitted photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WavepacketModel {
    /// Purcell-enhanced decay rate Γ′/2π.
    pub gamma_purcell_mhz: f64,
    pub tau_cavity_ns: f64,
    /// Fixed delay between excitation and the detector clock origin.
    pub delay_ns: f64,
}

impl Default for WavepacketModel {
    fn default() -> Self {
        Self {
            gamma_purcell_mhz: 21.58,
            tau_cavity_ns: 1.3,
            delay_ns: 0.0,
        }
    }
}

impl WavepacketModel {
    /// Γ′ in 1/ns.
    pub fn decay_rate_per_ns(&self) -> f64 {
        std::f64::consts::TAU * self.gamma_purcell_mhz * 1e-3
    }
}

/// Everything the sequence simulator needs. `shots` counts attempts per
/// setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shots: u64,
    /// Fixed shard count; results depend on it but not on the thread count.
    pub shards: u32,
    pub b_field_gauss: f64,
    pub prep_fidelity: f64,
    pub excitation_fidelity: f64,
    pub p_cavity: f64,
    /// Extraction × mode match × path × detector.
    pub eta_chain: f64,
    pub dark_count_prob_h: f64,
    pub dark_count_prob_v: f64,
    pub acceptance_start_ns: f64,
    pub acceptance_window_ns: f64,
    pub wait_window_ns: f64,
    pub attempt_period_us: f64,
    pub randomize_carrier_phase: bool,
    pub state: StateModel,
    pub wavepacket: WavepacketModel,
    pub readout: ReadoutModel,
    pub dephasing: DephasingModel,
    pub timing: TimingModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            shots: 100_000,
            shards: 16,
            b_field_gauss: 0.6036,
            prep_fidelity: 0.99,
            excitation_fidelity: 0.97,
            p_cavity: 0.101,
            eta_chain: 0.0376,
            dark_count_prob_h: 1.70e-6,
            dark_count_prob_v: 6.64e-6,
            acceptance_start_ns: 0.6,
            acceptance_window_ns: 10.0,
            wait_window_ns: WAIT_WINDOW_NS,
            attempt_period_us: 40.0,
            randomize_carrier_phase: true,
            state: StateModel::default(),
            wavepacket: WavepacketModel::default(),
            readout: ReadoutModel::default(),
            dephasing: DephasingModel::default(),
            timing: TimingModel::default(),
        }
    }
}

impl ExperimentConfig {
    /// Every photon is emitted, collected and read out perfectly, with no
    /// noise of any kind.
    pub fn noiseless() -> Self {
        Self {
            b_field_gauss: 0.0,
            prep_fidelity: 1.0,
            excitation_fidelity: 1.0,
            p_cavity: 1.0,
            eta_chain: 1.0,
            dark_count_prob_h: 0.0,
            dark_count_prob_v: 0.0,
            acceptance_start_ns: 0.0,
            acceptance_window_ns: WAIT_WINDOW_NS,
            state: StateModel::pure(),
            readout: ReadoutModel::perfect(),
            dephasing: DephasingModel::quiet(),
            timing: TimingModel::ideal(),
            ..Self::default()
        }
    }

    pub fn larmor_frequency_mhz(&self) -> f64 {
        LARMOR_MHZ_PER_GAUSS * self.b_field_gauss
    }

    /// Probability that an attempt yields a real photon click anywhere.
    pub fn p_photon(&self) -> f64 {
        self.prep_fidelity * self.excitation_fidelity * self.p_cavity * self.eta_chain
    }

    pub fn acceptance_end_ns(&self) -> f64 {
        self.acceptance_start_ns + self.acceptance_window_ns
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("prep_fidelity", self.prep_fidelity),
            ("excitation_fidelity", self.excitation_fidelity),
            ("p_cavity", self.p_cavity),
            ("eta_chain", self.eta_chain),
            ("dark_count_prob_h", self.dark_count_prob_h),
            ("dark_count_prob_v", self.dark_count_prob_v),
            ("state.white_noise", self.state.white_noise),
        ] {
            check_probability(name, p)?;
        }
        if !(self.acceptance_window_ns > 0.0) {
            return Err(invalid("acceptance_window_ns", "must be > 0"));
        }
        if !(self.wait_window_ns > 0.0) {
            return Err(invalid("wait_window_ns", "must be > 0"));
        }
        if !(self.acceptance_start_ns >= 0.0) || self.acceptance_end_ns() > self.wait_window_ns + 1e-9 {
            return Err(invalid(
                "acceptance_window_ns",
                &format!(
                    "acceptance window [{}, {}] ns must lie inside the {} ns wait window",
                    self.acceptance_start_ns,
                    self.acceptance_end_ns(),
                    self.wait_window_ns
                ),
            ));
        }
        if !(self.attempt_period_us > 0.0) {
            return Err(invalid("attempt_period_us", "must be > 0"));
        }
        if self.shards == 0 {
            return Err(invalid("shards", "must be at least 1"));
        }
        if !(self.wavepacket.gamma_purcell_mhz > 0.0 && self.wavepacket.tau_cavity_ns > 0.0) {
            return Err(invalid("wavepacket", "rates must be > 0"));
        }
        if !(self.b_field_gauss >= 0.0) {
            return Err(invalid("b_field_gauss", "must be >= 0"));
        }
        self.readout.validate()?;
        self.dephasing.validate()?;
        self.timing.validate()
    }
}

pub(crate) fn invalid(field: &str, message: &str) -> SimError {
    SimError::InvalidConfig {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn check_probability(field: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, &format!("{p} is not a probability")))
    }
}
