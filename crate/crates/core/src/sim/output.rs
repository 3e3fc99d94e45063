use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::engine::{JointCounts, RunSummary, ShotOutcome};
use super::SimError;
use crate::quantum::PauliLabel;

/// One line of the summary CSV. `hv` holds (H, bright) counts; an empty
/// `delta_phi_rad` marks σz analysis of the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub basis: PauliLabel,
    pub delta_phi_rad: Option<f64>,
    pub hv: u64,
    pub hd: u64,
    pub vb: u64,
    pub vd: u64,
}

impl SummaryRow {
    pub fn counts(&self) -> JointCounts {
        JointCounts {
            h_bright: self.hv,
            h_dark: self.hd,
            v_bright: self.vb,
            v_dark: self.vd,
        }
    }
}

/// Contents of the JSON file written next to a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub attempts: u64,
    pub attempts_per_setting: u64,
    pub detected: u64,
    pub shards: u32,
    pub duration_s: f64,
}

impl RunMetadata {
    pub fn new(cfg: &ExperimentConfig, summary: &RunSummary) -> Self {
        Self {
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            attempts: summary.attempts,
            attempts_per_setting: cfg.shots,
            detected: summary.detected,
            shards: cfg.shards,
            duration_s: summary.duration_s,
        }
    }
}

/// SHA-256 of the configuration serialized as JSON.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn write_summary_csv<W: Write>(summary: &RunSummary, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for s in &summary.settings {
        let c = s.counts;
        w.serialize(SummaryRow {
            basis: s.setting.photon,
            delta_phi_rad: s.setting.atom.delta_phi(),
            hv: c.h_bright,
            hd: c.h_dark,
            vb: c.v_bright,
            vd: c.v_dark,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>, SimError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != ["basis", "delta_phi_rad", "hv", "hd", "vb", "vd"] {
        return Err(SimError::Format(format!("unexpected header {}", header.join(","))));
    }
    let rows = r.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?;
    if let Some(bad) = rows.iter().find(|row| row.basis == PauliLabel::Identity) {
        return Err(SimError::Format(format!("row with identity photon basis: {bad:?}")));
    }
    Ok(rows)
}

/// Line-delimited JSON, one record per logged attempt.
pub fn write_shot_log<W: Write>(log: &[ShotOutcome], mut out: W) -> Result<(), SimError> {
    for shot in log {
        serde_json::to_writer(&mut out, shot)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_sequence, tomography_settings};

    #[test]
    fn summary_round_trip() {
        let cfg = ExperimentConfig {
            shots: 2000,
            ..ExperimentConfig::noiseless()
        };
        let run = run_sequence(&cfg, &tomography_settings(6), true).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&run.summary, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("basis,delta_phi_rad,hv,hd,vb,vd\n"));
        let rows = read_summary_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), run.summary.settings.len());
        for (row, s) in rows.iter().zip(&run.summary.settings) {
            assert_eq!(row.counts(), s.counts);
            assert_eq!(row.basis, s.setting.photon);
            assert_eq!(row.delta_phi_rad, s.setting.atom.delta_phi());
        }
        assert!(rows.iter().any(|r| r.delta_phi_rad.is_none()));
    }

    #[test]
    fn rejects_foreign_header() {
        let text = "basis,phi,a,b,c,d\nx,0,1,2,3,4\n";
        assert!(matches!(read_summary_csv(text.as_bytes()), Err(SimError::Format(_))));
    }

    #[test]
    fn shot_log_lines_parse() {
        let cfg = ExperimentConfig {
            shots: 500,
            ..ExperimentConfig::noiseless()
        };
        let run = run_sequence(&cfg, &tomography_settings(6)[..2], true).unwrap();
        let log = run.log.unwrap();
        let mut buf = Vec::new();
        write_shot_log(&log, &mut buf).unwrap();
        let back: Vec<ShotOutcome> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, log);
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..a.clone() };
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
