use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::bounds::{
    dark_count_correct, dark_count_correct_cells, fidelity_lower_bound, fidelity_upper_estimate, BasisProbabilities, ClampedCell,
    Estimate, RotatedSource,
};
use super::counts::{cells_from_joint, expectations_from_counts, Cells, CountsTable};
use super::fits::{parity_fit, ParityFit};
use super::overlap::{optimize_local_overlap, OverlapSummary};
use super::reconstruct::{linear_inversion, mle_reconstruct, MleResult};
use super::TomoError;
use crate::quantum::{PauliLabel, TwoQubitState};
use crate::sim::SummaryRow;

/// Dark-click rates entering the correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkCounts {
    /// Per-attempt probability of an accepted dark click on H.
    pub p_h: f64,
    pub p_v: f64,
    pub attempts_per_setting: f64,
}

/// Where the rotated-basis terms of the lower bound come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotatedChoice {
    /// Scan point nearest the fitted parity extremum, σx and σy averaged.
    #[default]
    ExtremumAverage,
    /// The exact Pauli settings, σx and σy averaged.
    PauliAverage,
    /// Only the σy scan extremum.
    ExtremumY,
    /// Only the σx scan extremum.
    ExtremumX,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub dark: Option<DarkCounts>,
    pub rotated: RotatedChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisContrast {
    pub basis: String,
    pub contrast: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub f_lower: Estimate,
    pub f_upper: Estimate,
    pub purity: Estimate,
    pub contrasts: Vec<BasisContrast>,
    pub dark_corrected: bool,
    pub rotated_source: String,
    pub mle_fidelity: f64,
    pub overlap: OverlapSummary,
    pub clamped: Vec<ClampedCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub report: FidelityReport,
    pub linear: TwoQubitState<f64>,
    pub mle: MleResult,
    pub parity: Vec<(PauliLabel, ParityFit)>,
}

fn correlated_fraction(c: &Cells) -> (f64, f64) {
    let n: f64 = c.iter().sum();
    ((c[1] + c[2]) / n, n)
}

fn scan_rows(rows: &[SummaryRow], photon: PauliLabel) -> Vec<&SummaryRow> {
    rows.iter().filter(|r| r.basis == photon && r.delta_phi_rad.is_some()).collect()
}

fn corrected_cells(row: &SummaryRow, dark: Option<&DarkCounts>) -> Cells {
    let c = cells_from_joint(&row.counts());
    match dark {
        Some(d) => dark_count_correct_cells(&c, d.p_h, d.p_v, d.attempts_per_setting),
        None => c,
    }
}

/// Parity fit of one photon-basis scan.
pub fn fit_scan(rows: &[SummaryRow], photon: PauliLabel, dark: Option<&DarkCounts>) -> Result<(ParityFit, Vec<(f64, Cells)>), TomoError> {
    let scan: Vec<(f64, Cells)> = scan_rows(rows, photon)
        .into_iter()
        .map(|r| (r.delta_phi_rad.unwrap_or(0.0), corrected_cells(r, dark)))
        .filter(|(_, c)| c.iter().sum::<f64>() > 0.0)
        .collect();
    let phi: Vec<f64> = scan.iter().map(|s| s.0).collect();
    let mut y = Vec::with_capacity(scan.len());
    let mut e = Vec::with_capacity(scan.len());
    for (_, c) in &scan {
        let (p, n) = correlated_fraction(c);
        y.push(p);
        e.push((p * (1.0 - p) / n).sqrt().max(0.5 / n));
    }
    Ok((parity_fit(&phi, &y, Some(&e))?, scan))
}

fn nearest_to(scan: &[(f64, Cells)], phase: f64) -> Option<&Cells> {
    let dist = |p: f64| {
        let d = (p - phase).rem_euclid(TAU);
        d.min(TAU - d)
    };
    scan.iter().min_by(|a, b| dist(a.0).total_cmp(&dist(b.0))).map(|s| &s.1)
}

/// Full analysis of a summary: contrasts, lower bound, reconstruction,
/// purity bound and local alignment.
pub fn analyze(rows: &[SummaryRow], opts: &AnalysisOptions) -> Result<Analysis, TomoError> {
    let dark = opts.dark.as_ref();
    let raw = CountsTable::from_rows(rows)?;
    let (counts, clamped) = match dark {
        Some(d) => {
            let out = dark_count_correct(&raw, d.p_h, d.p_v, d.attempts_per_setting);
            (out.counts, out.clamped)
        }
        None => (raw, Vec::new()),
    };

    let zz = counts
        .get(PauliLabel::Z, PauliLabel::Z)
        .ok_or_else(|| TomoError::MissingSetting(vec!["zz".into()]))?;
    let z_probs = BasisProbabilities::from_cells(zz)?;
    let (pz, nz) = correlated_fraction(zz);
    let mut contrasts = vec![BasisContrast {
        basis: "z".into(),
        contrast: Estimate::new(2.0 * pz - 1.0, 2.0 * (pz * (1.0 - pz) / nz).sqrt()),
    }];

    let mut parity = Vec::new();
    let mut extremum = Vec::new();
    for photon in [PauliLabel::X, PauliLabel::Y] {
        if scan_rows(rows, photon).is_empty() {
            continue;
        }
        let (fit, scan) = fit_scan(rows, photon, dark)?;
        contrasts.push(BasisContrast {
            basis: photon.letter().to_string(),
            contrast: Estimate::new(fit.contrast, fit.contrast_err),
        });
        let cells = nearest_to(&scan, fit.phase).copied();
        if let Some(c) = cells {
            extremum.push((photon, BasisProbabilities::from_cells(&c)?));
        }
        parity.push((photon, fit));
    }

    let find = |p: PauliLabel| extremum.iter().find(|e| e.0 == p).map(|e| e.1);
    let pauli = |p: PauliLabel| -> Result<BasisProbabilities, TomoError> {
        let c = counts.get(p, p).ok_or_else(|| TomoError::MissingSetting(vec![format!("{p}{p}")]))?;
        BasisProbabilities::from_cells(c)
    };
    let missing_scan = |p: PauliLabel| TomoError::MissingSetting(vec![format!("photon {p} scan")]);
    let rotated = match opts.rotated {
        RotatedChoice::ExtremumAverage => RotatedSource::AverageXY(
            find(PauliLabel::X).ok_or_else(|| missing_scan(PauliLabel::X))?,
            find(PauliLabel::Y).ok_or_else(|| missing_scan(PauliLabel::Y))?,
        ),
        RotatedChoice::PauliAverage => RotatedSource::AverageXY(pauli(PauliLabel::X)?, pauli(PauliLabel::Y)?),
        RotatedChoice::ExtremumX => RotatedSource::Single(find(PauliLabel::X).ok_or_else(|| missing_scan(PauliLabel::X))?),
        RotatedChoice::ExtremumY => RotatedSource::Single(find(PauliLabel::Y).ok_or_else(|| missing_scan(PauliLabel::Y))?),
    };
    let f_lower = fidelity_lower_bound(&z_probs, &rotated);

    let expectations = expectations_from_counts(&counts)?;
    let linear = linear_inversion(&expectations)?;
    let mle = mle_reconstruct(&counts, &linear)?;
    let purity_value = mle.state.purity();
    // first-order error of Tr ρ² from the expectation errors
    let purity_err = {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    acc += (0.5 * expectations.values[i][j] * expectations.errors[i][j]).powi(2);
                }
            }
        }
        acc.sqrt()
    };
    let purity = Estimate::new(purity_value, purity_err);
    let f_upper = fidelity_upper_estimate(purity).unwrap_or(Estimate::new(f64::NAN, f64::NAN));
    let overlap = optimize_local_overlap(&mle.state)?;

    Ok(Analysis {
        report: FidelityReport {
            f_lower,
            f_upper,
            purity,
            contrasts,
            dark_corrected: dark.is_some(),
            rotated_source: format!("{:?}/{}", opts.rotated, rotated.label()),
            mle_fidelity: mle.state.bell_fidelity(),
            overlap: (&overlap).into(),
            clamped,
        },
        linear,
        mle: mle.clone(),
        parity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_sequence, tomography_settings, ExperimentConfig, RunSummary};

    fn rows_of(summary: &RunSummary) -> Vec<SummaryRow> {
        summary
            .settings
            .iter()
            .map(|s| SummaryRow {
                basis: s.setting.photon,
                delta_phi_rad: s.setting.atom.delta_phi(),
                hv: s.counts.h_bright,
                hd: s.counts.h_dark,
                vb: s.counts.v_bright,
                vd: s.counts.v_dark,
            })
            .collect()
    }

    #[test]
    fn noiseless_run_is_ideal() {
        let cfg = ExperimentConfig {
            shots: 4000,
            ..ExperimentConfig::noiseless()
        };
        let run = run_sequence(&cfg, &tomography_settings(12), false).unwrap();
        let a = analyze(&rows_of(&run.summary), &AnalysisOptions::default()).unwrap();
        let r = &a.report;
        assert!((r.contrasts[0].contrast.value - 1.0).abs() < 1e-12);
        for c in &r.contrasts[1..] {
            assert!(c.contrast.value > 0.97, "{c:?}");
        }
        assert!(r.f_lower.value > 0.97);
        assert!(r.mle_fidelity > 0.98);
        assert!(r.f_lower.value <= r.f_upper.value + r.f_lower.error + r.f_upper.error);
    }

    #[test]
    fn missing_z_setting_is_an_error() {
        let rows: Vec<SummaryRow> = (0..12)
            .map(|k| SummaryRow {
                basis: PauliLabel::X,
                delta_phi_rad: Some(TAU * k as f64 / 12.0),
                hv: 10,
                hd: 20,
                vb: 30,
                vd: 40,
            })
            .collect();
        assert!(matches!(analyze(&rows, &AnalysisOptions::default()), Err(TomoError::MissingSetting(_))));
    }
}
