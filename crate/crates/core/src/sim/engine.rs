use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quantum::{PauliLabel, TwoQubitState};

use super::config::ExperimentConfig;
use super::pulses::{joint_probabilities, line_phases, sample_dephasing_phase, Setting, ShotPhases};
use super::readout::fluorescence_readout;
use super::state_model::emitted_joint_state;
use super::SimError;

/// Stream reserved for draws made once per run.
const RUN_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    H,
    V,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::H => "H",
            Port::V => "V",
        })
    }
}

/// First detector click of an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonEvent {
    pub port: Port,
    pub arrival_ns: f64,
    /// Simulator ground truth; analysis code never reads it.
    pub dark_count: bool,
}

/// One attempt with a click. Attempts without a click are not logged: they
/// carry neither a photon nor an atomic readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub attempt: u64,
    pub setting: usize,
    pub basis: PauliLabel,
    pub delta_phi: Option<f64>,
    pub photon: PhotonEvent,
    /// Fluorescence call; `true` is bright.
    pub bright: bool,
    /// Click inside the acceptance window.
    pub accepted: bool,
}

/// Post-selected joint counts of one setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JointCounts {
    pub h_bright: u64,
    pub h_dark: u64,
    pub v_bright: u64,
    pub v_dark: u64,
}

impl JointCounts {
    pub fn total(&self) -> u64 {
        self.h_bright + self.h_dark + self.v_bright + self.v_dark
    }

    pub fn add(&mut self, port: Port, bright: bool) {
        match (port, bright) {
            (Port::H, true) => self.h_bright += 1,
            (Port::H, false) => self.h_dark += 1,
            (Port::V, true) => self.v_bright += 1,
            (Port::V, false) => self.v_dark += 1,
        }
    }

    fn merge(&mut self, o: &Self) {
        self.h_bright += o.h_bright;
        self.h_dark += o.h_dark;
        self.v_bright += o.v_bright;
        self.v_dark += o.v_dark;
    }

    /// Fraction of (bright, V) and (dark, H) events.
    pub fn correlated_fraction(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.v_bright + self.h_dark) as f64 / n as f64)
    }

    /// `P(correlated) − P(anti-correlated)`.
    pub fn contrast(&self) -> Option<f64> {
        self.correlated_fraction().map(|p| 2.0 * p - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub counts: JointCounts,
    pub attempts: u64,
    /// Clicks anywhere in the wait window, before post-selection.
    pub recorded: u64,
    pub detected: u64,
}

/// Ground-truth tallies kept apart from the analysable counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub accepted_dark: u64,
    pub recorded_dark: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub settings: Vec<SettingSummary>,
    pub attempts: u64,
    pub detected: u64,
    /// Attempts times the attempt period.
    pub duration_s: f64,
    pub truth: GroundTruth,
}

impl RunSummary {
    pub fn detection_probability(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.detected as f64 / self.attempts as f64
        }
    }

    pub fn find(&self, setting: &Setting) -> Option<&SettingSummary> {
        self.settings.iter().find(|s| s.setting == *setting)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Present when requested; sorted by setting, then attempt.
    pub log: Option<Vec<ShotOutcome>>,
}

/// Adds dark clicks, each uniform in `[0, wait_ns]`, and returns the
/// earliest click of the attempt.
pub fn inject_dark_counts<R: Rng + ?Sized>(
    photon: Option<PhotonEvent>,
    p_h: f64,
    p_v: f64,
    wait_ns: f64,
    rng: &mut R,
) -> Option<PhotonEvent> {
    let mut first = photon;
    for (port, p) in [(Port::H, p_h), (Port::V, p_v)] {
        if p > 0.0 && rng.random::<f64>() < p {
            let t = rng.random::<f64>() * wait_ns;
            if first.is_none_or(|e| t < e.arrival_ns) {
                first = Some(PhotonEvent {
                    port,
                    arrival_ns: t,
                    dark_count: true,
                });
            }
        }
    }
    first
}

/// Arrival time of a real photon: fixed delay plus atomic and cavity decay.
struct ArrivalSampler {
    atom: Exp<f64>,
    cavity: Exp<f64>,
    delay: f64,
    mean: f64,
}

impl ArrivalSampler {
    fn new(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        let a = cfg.wavepacket.decay_rate_per_ns();
        let b = 1.0 / cfg.wavepacket.tau_cavity_ns;
        let bad = |_| super::config::invalid("wavepacket", "rates must be finite and > 0");
        Ok(Self {
            atom: Exp::new(a).map_err(bad)?,
            cavity: Exp::new(b).map_err(bad)?,
            delay: cfg.wavepacket.delay_ns,
            mean: cfg.wavepacket.delay_ns + 1.0 / a + 1.0 / b,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.delay + self.atom.sample(rng) + self.cavity.sample(rng)
    }
}

struct ShardResult {
    counts: JointCounts,
    recorded: u64,
    detected: u64,
    truth: GroundTruth,
    log: Vec<ShotOutcome>,
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    state: TwoQubitState<f64>,
    arrival: ArrivalSampler,
    line_phases: Vec<f64>,
    keep_log: bool,
}

fn run_shard(sh: &Shared<'_>, setting_index: usize, setting: &Setting, range: std::ops::Range<u64>, stream: u64) -> ShardResult {
    let cfg = sh.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let p_photon = cfg.p_photon();
    let larmor = cfg.larmor_frequency_mhz();
    let (start, end) = (cfg.acceptance_start_ns, cfg.acceptance_end_ns());
    let mut out = ShardResult {
        counts: JointCounts::default(),
        recorded: 0,
        detected: 0,
        truth: GroundTruth::default(),
        log: Vec::new(),
    };
    for i in range {
        let attempt = setting_index as u64 * cfg.shots + i;
        let mut real: Option<(PhotonEvent, bool)> = None;
        if rng.random::<f64>() < p_photon {
            let t = sh.arrival.sample(&mut rng);
            if t <= cfg.wait_window_ns {
                let t0_s = attempt as f64 * cfg.attempt_period_us * 1e-6;
                let phases = ShotPhases {
                    carrier: if cfg.randomize_carrier_phase {
                        rng.random::<f64>() * std::f64::consts::TAU
                    } else {
                        0.0
                    },
                    timing: cfg.timing.sample_phase(&mut rng, larmor, t - sh.arrival.mean),
                    dephasing: sample_dephasing_phase(&cfg.dephasing, &sh.line_phases, t0_s, &mut rng),
                };
                let p = joint_probabilities(&sh.state, setting, &phases);
                let k = pick(&p, rng.random::<f64>());
                let port = if k.is_multiple_of(2) { Port::H } else { Port::V };
                let event = PhotonEvent {
                    port,
                    arrival_ns: t,
                    dark_count: false,
                };
                real = Some((event, k < 2));
            }
        }
        let click = inject_dark_counts(
            real.map(|r| r.0),
            cfg.dark_count_prob_h,
            cfg.dark_count_prob_v,
            cfg.wait_window_ns,
            &mut rng,
        );
        let Some(event) = click else { continue };
        // without an emitted photon the atom is an even mixture
        let atom_bright = match real {
            Some((_, b)) => b,
            None => rng.random::<bool>(),
        };
        let bright = fluorescence_readout(atom_bright, &cfg.readout, &mut rng);
        let accepted = event.arrival_ns >= start && event.arrival_ns <= end;
        out.recorded += 1;
        if event.dark_count {
            out.truth.recorded_dark += 1;
        }
        if accepted {
            out.detected += 1;
            out.counts.add(event.port, bright);
            if event.dark_count {
                out.truth.accepted_dark += 1;
            }
        }
        if sh.keep_log {
            out.log.push(ShotOutcome {
                attempt,
                setting: setting_index,
                basis: setting.photon,
                delta_phi: setting.atom.delta_phi(),
                photon: event,
                bright,
                accepted,
            });
        }
    }
    out
}

fn pick(p: &[f64; 4], u: f64) -> usize {
    let total: f64 = p.iter().sum();
    let mut acc = 0.0;
    for (k, v) in p.iter().enumerate() {
        acc += v / total;
        if u < acc {
            return k;
        }
    }
    3
}

/// Monte Carlo of `cfg.shots` attempts for every setting. Attempts are
/// split into `cfg.shards` shards per setting, each with its own ChaCha8
/// stream, so the output depends on the seed and shard count only.
pub fn run_sequence(cfg: &ExperimentConfig, settings: &[Setting], keep_log: bool) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    if settings.is_empty() {
        return Err(SimError::NoSettings);
    }
    let mut run_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_rng.set_stream(RUN_STREAM);
    let shared = Shared {
        cfg,
        state: emitted_joint_state(&cfg.state)?,
        arrival: ArrivalSampler::new(cfg)?,
        line_phases: line_phases(&cfg.dephasing, &mut run_rng),
        keep_log,
    };
    let shards = cfg.shards as u64;
    let jobs: Vec<(usize, u64)> = (0..settings.len()).flat_map(|s| (0..shards).map(move |k| (s, k))).collect();
    let results: Vec<ShardResult> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let lo = cfg.shots * k / shards;
            let hi = cfg.shots * (k + 1) / shards;
            run_shard(&shared, s, &settings[s], lo..hi, 1 + s as u64 * shards + k)
        })
        .collect();

    let mut per_setting: Vec<SettingSummary> = settings
        .iter()
        .map(|s| SettingSummary {
            setting: *s,
            counts: JointCounts::default(),
            attempts: cfg.shots,
            recorded: 0,
            detected: 0,
        })
        .collect();
    let mut truth = GroundTruth::default();
    let mut log = keep_log.then(Vec::new);
    for (&(s, _), r) in jobs.iter().zip(results) {
        let target = &mut per_setting[s];
        target.counts.merge(&r.counts);
        target.recorded += r.recorded;
        target.detected += r.detected;
        truth.accepted_dark += r.truth.accepted_dark;
        truth.recorded_dark += r.truth.recorded_dark;
        if let Some(l) = log.as_mut() {
            l.extend(r.log);
        }
    }
    let attempts = cfg.shots * settings.len() as u64;
    let detected = per_setting.iter().map(|s| s.detected).sum();
    Ok(RunOutput {
        summary: RunSummary {
            settings: per_setting,
            attempts,
            detected,
            duration_s: attempts as f64 * cfg.attempt_period_us * 1e-6,
            truth,
        },
        log,
    })
}
