use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, cis, kron, Mat2, Matrix};
use crate::quantum::{PauliLabel, TwoQubitState};

use super::config::{AcLine, DephasingModel, TimingModel};

/// Field sensitivity of the |g+⟩/|0⟩ hyperfine qubit in Hz per mG.
pub const HYPERFINE_HZ_PER_MG: f64 = 2.8e3;
/// Field sensitivity of the |g−⟩/|g+⟩ Zeeman qubit in Hz per mG.
pub const ZEEMAN_HZ_PER_MG: f64 = 2.0 * HYPERFINE_HZ_PER_MG;

/// How the atom is analysed: the π mapping pulse alone (σz) or followed by
/// a π/2 pulse with relative phase Δφ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomAnalysis {
    Z,
    Equatorial(f64),
}

impl AtomAnalysis {
    pub fn delta_phi(&self) -> Option<f64> {
        match self {
            AtomAnalysis::Z => None,
            AtomAnalysis::Equatorial(p) => Some(*p),
        }
    }

    /// Atomic Pauli basis this analysis corresponds to, if any.
    pub fn label(&self) -> Option<PauliLabel> {
        let near = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d) < 1e-9
        };
        match self {
            AtomAnalysis::Z => Some(PauliLabel::Z),
            AtomAnalysis::Equatorial(p) if near(*p, crate::quantum::PHI_X) => Some(PauliLabel::X),
            AtomAnalysis::Equatorial(p) if near(*p, crate::quantum::PHI_Y) => Some(PauliLabel::Y),
            AtomAnalysis::Equatorial(_) => None,
        }
    }

    pub fn from_label(label: PauliLabel) -> Option<Self> {
        match label {
            PauliLabel::Z => Some(AtomAnalysis::Z),
            PauliLabel::X | PauliLabel::Y => label.equatorial_phase().map(AtomAnalysis::Equatorial),
            PauliLabel::Identity => None,
        }
    }
}

/// One analysis setting: photon readout basis and atomic analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub photon: PauliLabel,
    pub atom: AtomAnalysis,
}

impl Setting {
    pub fn new(photon: PauliLabel, atom: AtomAnalysis) -> Self {
        Self { photon, atom }
    }

    pub fn paulis(atom: PauliLabel, photon: PauliLabel) -> Option<Self> {
        Some(Self {
            photon,
            atom: AtomAnalysis::from_label(atom)?,
        })
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.atom {
            AtomAnalysis::Z => write!(f, "photon {} / atom z", self.photon),
            AtomAnalysis::Equatorial(p) => write!(f, "photon {} / atom dphi={p:.4}", self.photon),
        }
    }
}

/// Parity scan: photon basis fixed, Δφ on an even grid over `[0, 2π)`.
pub fn scan_settings(photon: PauliLabel, points: usize) -> Vec<Setting> {
    (0..points)
        .map(|k| Setting::new(photon, AtomAnalysis::Equatorial(TAU * k as f64 / points as f64)))
        .collect()
}

/// Parity scans in photon σx and σy followed by the remaining Pauli
/// settings needed for full tomography. Settings already covered by a scan
/// point are not repeated.
pub fn tomography_settings(scan_points: usize) -> Vec<Setting> {
    let mut out = scan_settings(PauliLabel::X, scan_points);
    out.extend(scan_settings(PauliLabel::Y, scan_points));
    let paulis = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
    for atom in paulis {
        for photon in paulis {
            let have = out.iter().any(|s| s.photon == photon && s.atom.label() == Some(atom));
            if !have {
                out.extend(Setting::paulis(atom, photon));
            }
        }
    }
    out
}

/// Per-shot phases entering the atomic pulses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShotPhases {
    /// Absolute phase of the microwave carrier, common to both pulses.
    pub carrier: f64,
    /// Larmor phase from timing jitter plus the residual timing error.
    pub timing: f64,
    /// Phase from the magnetic field excursion during the sequence.
    pub dephasing: f64,
}

impl ShotPhases {
    /// Equatorial phase error seen by the atom.
    pub fn error(&self) -> f64 {
        self.timing + self.dephasing
    }
}

/// Resonant pulse of area `theta` about the equatorial axis at `phi`.
pub fn rabi_pulse(theta: f64, phi: f64) -> Mat2<f64> {
    let (s, co) = (theta / 2.0).sin_cos();
    let off = |p: f64| cis(p) * c(0.0, -s);
    Matrix::from_rows([[c(co, 0.0), off(-phi)], [off(phi), c(co, 0.0)]])
}

/// Atom unitary in the logical (↑, ↓) basis for one shot: phase error as a
/// z rotation, the π pulse mapping |g−⟩ → |0⟩ at the carrier phase and, for
/// equatorial analysis, the π/2 pulse at carrier + Δφ.
pub fn atomic_unitary(analysis: AtomAnalysis, phases: &ShotPhases) -> Mat2<f64> {
    let error = Matrix::from_rows([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), cis(phases.error())]]);
    // only |↓⟩ takes part in the mapping transition
    let mapping = Matrix::from_rows([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), cis(phases.carrier - FRAC_PI_2)]]);
    let base = mapping * error;
    match analysis {
        AtomAnalysis::Z => base,
        // the π offset makes Δφ = φ the analysis of (|↑⟩ ± e^{iφ}|↓⟩)/√2 with + bright
        AtomAnalysis::Equatorial(dphi) => rabi_pulse(FRAC_PI_2, phases.carrier + dphi + PI) * base,
    }
}

/// State after the atomic pulses; the atom is then read out in σz.
pub fn apply_atomic_pulses(state: &TwoQubitState<f64>, analysis: AtomAnalysis, phases: &ShotPhases) -> TwoQubitState<f64> {
    let u = kron(&atomic_unitary(analysis, phases), &Mat2::identity());
    state.conjugate_by(&u)
}

/// Joint outcome probabilities `[P(bright,H), P(bright,V), P(dark,H), P(dark,V)]`
/// after the pulses, with photon outcome +1 sent to H.
pub fn joint_probabilities(state: &TwoQubitState<f64>, setting: &Setting, phases: &ShotPhases) -> [f64; 4] {
    // rows ⟨+|, ⟨−| take the photon readout basis to H, V
    let plus = setting.photon.eigenstate::<f64>(true);
    let minus = setting.photon.eigenstate::<f64>(false);
    let to_ports = Matrix::from_rows([[plus.entry(0).conj(), plus.entry(1).conj()], [minus.entry(0).conj(), minus.entry(1).conj()]]);
    let u = kron(&atomic_unitary(setting.atom, phases), &to_ports);
    let rho = (u * *state.matrix() * u.adjoint()).hermitian_part();
    [0, 1, 2, 3].map(|k| rho[(k, k)].re.max(0.0))
}

/// Random phases of the AC lines for one run.
pub fn line_phases<R: Rng + ?Sized>(model: &DephasingModel, rng: &mut R) -> Vec<f64> {
    model
        .ac_components
        .iter()
        .map(|l| if l.random_phase { rng.random::<f64>() * TAU } else { 0.0 })
        .collect()
}

/// `∫ a·sin(2πf t + φ) dt` over `[t0, t0 + span]` in mG·s.
fn line_integral(line: &AcLine, phase: f64, t0: f64, span: f64) -> f64 {
    let w = TAU * line.frequency_hz;
    if w == 0.0 {
        return line.amplitude_mg * phase.sin() * span;
    }
    line.amplitude_mg / w * ((w * t0 + phase).cos() - (w * (t0 + span) + phase).cos())
}

/// Phase accumulated by a qubit with sensitivity `hz_per_mg` while exposed
/// for `span_s` starting at lab time `t0_s`, with a quasi-static offset
/// `offset_mg` for the shot.
pub fn field_phase(model: &DephasingModel, phases: &[f64], hz_per_mg: f64, offset_mg: f64, t0_s: f64, span_s: f64) -> f64 {
    let ac: f64 = model
        .ac_components
        .iter()
        .zip(phases)
        .map(|(l, &p)| line_integral(l, p, t0_s, span_s))
        .sum();
    TAU * hz_per_mg * (offset_mg * span_s + ac)
}

/// Samples the quasi-static field offset of one shot in mG.
pub fn sample_field_offset<R: Rng + ?Sized>(model: &DephasingModel, rng: &mut R) -> f64 {
    if model.b_noise_rms_mg == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    model.b_noise_rms_mg * z
}

/// Dephasing phase of the entanglement sequence for a shot at `t0_s`.
pub fn sample_dephasing_phase<R: Rng + ?Sized>(model: &DephasingModel, phases: &[f64], t0_s: f64, rng: &mut R) -> f64 {
    let offset = sample_field_offset(model, rng);
    field_phase(model, phases, HYPERFINE_HZ_PER_MG, offset, t0_s, model.pulse_sequence_duration_us * 1e-6)
}

impl TimingModel {
    /// Larmor phase of the emission time deviation plus jitter, the
    /// residual timing error and the fixed offset.
    pub fn sample_phase<R: Rng + ?Sized>(&self, rng: &mut R, larmor_mhz: f64, arrival_deviation_ns: f64) -> f64 {
        let jitter_ns = if self.sync_jitter_ps > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            z * self.sync_jitter_ps * 1e-3
        } else {
            0.0
        };
        let residual = if self.phase_uncertainty_budget > 0.0 {
            (rng.random::<f64>() * 2.0 - 1.0) * self.phase_uncertainty_budget
        } else {
            0.0
        };
        TAU * larmor_mhz * 1e-3 * (arrival_deviation_ns + jitter_ns) + residual + self.phase_offset
    }
}

/// Correlated-outcome probability `P(bright,V) + P(dark,H)` of a setting.
pub fn correlation_probability(p: &[f64; 4]) -> f64 {
    p[1] + p[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{equatorial, PHI_X, PHI_Y};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equatorial_analysis_measures_sigma_phi() {
        for dphi in [0.0, 0.3, PHI_X, PHI_Y, 2.0] {
            for carrier in [0.0, 1.1, 4.0] {
                let u = atomic_unitary(
                    AtomAnalysis::Equatorial(dphi),
                    &ShotPhases {
                        carrier,
                        ..Default::default()
                    },
                );
                let measured = u.adjoint() * PauliLabel::Z.matrix() * u;
                assert!(measured.approx_eq(&equatorial(dphi), 1e-14), "{dphi} {carrier}");
            }
        }
    }

    #[test]
    fn phase_error_shifts_analysis_angle() {
        let u = atomic_unitary(
            AtomAnalysis::Equatorial(0.5),
            &ShotPhases {
                carrier: 0.2,
                timing: 0.1,
                dephasing: 0.05,
            },
        );
        let measured = u.adjoint() * PauliLabel::Z.matrix() * u;
        assert!(measured.approx_eq(&equatorial(0.35), 1e-14));
    }

    #[test]
    fn ideal_bell_statistics() {
        let bell = TwoQubitState::bell_target();
        let z = joint_probabilities(&bell, &Setting::new(PauliLabel::Z, AtomAnalysis::Z), &ShotPhases::default());
        // bright with V, dark with H
        assert!((z[1] - 0.5).abs() < 1e-14 && (z[2] - 0.5).abs() < 1e-14);
        assert!(z[0].abs() < 1e-14 && z[3].abs() < 1e-14);
        for label in [PauliLabel::X, PauliLabel::Y] {
            let s = Setting::paulis(label, label).unwrap();
            let p = joint_probabilities(&bell, &s, &ShotPhases { carrier: 0.7, ..Default::default() });
            assert!((correlation_probability(&p) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn parity_is_sinusoidal_with_full_contrast() {
        let bell = TwoQubitState::bell_target();
        for k in 0..16 {
            let dphi = TAU * k as f64 / 16.0;
            let s = Setting::new(PauliLabel::X, AtomAnalysis::Equatorial(dphi));
            let p = correlation_probability(&joint_probabilities(&bell, &s, &ShotPhases::default()));
            let expect = 0.5 * (1.0 + (dphi - PHI_X).cos());
            assert!((p - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn labels_round_trip() {
        for l in PauliLabel::MEASURABLE {
            assert_eq!(AtomAnalysis::from_label(l).unwrap().label(), Some(l));
        }
        assert_eq!(AtomAnalysis::Equatorial(PHI_Y + TAU).label(), Some(PauliLabel::Y));
        assert_eq!(AtomAnalysis::Equatorial(1.0).label(), None);
    }

    #[test]
    fn line_integral_matches_quadrature() {
        let line = AcLine {
            frequency_hz: 150.0,
            amplitude_mg: 0.3,
            random_phase: true,
        };
        let (t0, span, ph) = (0.0123, 1.5e-3, 0.8);
        let n = 200_000;
        let dt = span / n as f64;
        let num: f64 = (0..n)
            .map(|k| {
                let t = t0 + (k as f64 + 0.5) * dt;
                0.3 * (TAU * 150.0 * t + ph).sin() * dt
            })
            .sum();
        assert!((line_integral(&line, ph, t0, span) - num).abs() < 1e-12);
    }

    #[test]
    fn timing_phase_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = TimingModel {
            sync_jitter_ps: 0.0,
            phase_uncertainty_budget: 0.2,
            phase_offset: 0.1,
        };
        let xs: Vec<f64> = (0..100_000).map(|_| t.sample_phase(&mut rng, 1.69, 0.0)).collect();
        assert!(xs.iter().all(|x| (x - 0.1).abs() <= 0.2));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.1).abs() < 3.0 * 0.2 / (3.0f64 * 1e5).sqrt());
        // 1 ns of emission delay at 1.69 MHz Larmor frequency
        let ideal = TimingModel::ideal();
        assert!((ideal.sample_phase(&mut rng, 1.69, 1.0) - TAU * 1.69e-3).abs() < 1e-15);
    }
}
