use serde::{Deserialize, Serialize};

use super::engine::ShotOutcome;
use super::SimError;
use crate::cavity::fwhm_linear;

/// Photon arrival times binned from the start of the wait window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_ns: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| (k as f64 + 0.5) * self.bin_ns).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Full width at half maximum of the binned profile.
    pub fn fwhm(&self) -> Result<f64, SimError> {
        let occupied = self.counts.iter().filter(|c| **c > 0).count();
        if self.total() < 2 || occupied < 2 {
            return Err(SimError::FwhmUndefined("fewer than two occupied bins"));
        }
        let y: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let (_, w) = fwhm_linear(&self.centers(), &y).map_err(|_| SimError::FwhmUndefined("profile has no half-maximum crossing"))?;
        Ok(w)
    }

    /// Pearson χ² against a flat histogram and its degrees of freedom.
    pub fn chi2_uniform(&self) -> (f64, usize) {
        let n = self.counts.len();
        let expect = self.total() as f64 / n as f64;
        let chi2 = self.counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        (chi2, n.saturating_sub(1))
    }
}

/// Histogram of every recorded click in `[0, span_ns)`.
pub fn arrival_time_histogram(log: &[ShotOutcome], bin_ns: f64, span_ns: f64) -> Result<Histogram, SimError> {
    if !(bin_ns > 0.0 && span_ns >= bin_ns) {
        return Err(super::config::invalid("bin_ns", "bin width must be > 0 and fit in the span"));
    }
    let bins = (span_ns / bin_ns).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for shot in log {
        let t = shot.photon.arrival_ns;
        if (0.0..span_ns).contains(&t) {
            counts[((t / bin_ns) as usize).min(bins - 1)] += 1;
        }
    }
    Ok(Histogram { bin_ns, counts })
}
