use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::TomoError;
use crate::optimize::{brent_minimize, invert};

/// `y = offset + a·cos φ + b·sin φ`, written as `offset + A·cos(φ − φ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub phase: f64,
    pub offset: f64,
    pub offset_err: f64,
    pub chi2: f64,
}

/// Weighted linear least squares; `errors` default to one.
pub fn fit_sinusoid(phi: &[f64], y: &[f64], errors: Option<&[f64]>) -> Result<SinusoidFit, TomoError> {
    if phi.len() != y.len() || errors.is_some_and(|e| e.len() != y.len()) {
        return Err(TomoError::Degenerate("inputs differ in length".into()));
    }
    if phi.len() < 3 {
        return Err(TomoError::TooFewPoints { need: 3, got: phi.len() });
    }
    let w: Vec<f64> = match errors {
        Some(e) => e.iter().map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 0.0 }).collect(),
        None => vec![1.0; y.len()],
    };
    let basis = |p: f64| [1.0, p.cos(), p.sin()];
    let mut ata = vec![vec![0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for ((&p, &v), &wk) in phi.iter().zip(y).zip(&w) {
        let f = basis(p);
        for i in 0..3 {
            atb[i] += wk * f[i] * v;
            for j in 0..3 {
                ata[i][j] += wk * f[i] * f[j];
            }
        }
    }
    let cov = invert(&ata).ok_or_else(|| TomoError::Degenerate("phases do not determine a sinusoid".into()))?;
    let x: Vec<f64> = (0..3).map(|i| (0..3).map(|j| cov[i][j] * atb[j]).sum()).collect();
    let (c, a, b) = (x[0], x[1], x[2]);
    let amp = a.hypot(b);
    let chi2: f64 = phi
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((&p, &v), &wk)| {
            let f = basis(p);
            wk * (v - c - a * f[1] - b * f[2]).powi(2)
        })
        .sum();
    // unit weights carry no scale, so use the residual variance
    let scale = if errors.is_none() {
        chi2 / (phi.len().saturating_sub(3).max(1)) as f64
    } else {
        1.0
    };
    let amp_var = if amp > 0.0 {
        (a * a * cov[1][1] + b * b * cov[2][2] + 2.0 * a * b * cov[1][2]) / (amp * amp)
    } else {
        0.5 * (cov[1][1] + cov[2][2])
    };
    Ok(SinusoidFit {
        amplitude: amp,
        amplitude_err: (amp_var * scale).max(0.0).sqrt(),
        phase: b.atan2(a).rem_euclid(TAU),
        offset: c,
        offset_err: (cov[0][0] * scale).max(0.0).sqrt(),
        chi2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    /// Peak-to-peak height of the fitted correlation probability.
    pub contrast: f64,
    pub contrast_err: f64,
    /// Δφ of the fitted maximum.
    pub phase: f64,
    pub offset: f64,
}

/// Fits `A·cos(Δφ − φ0) + c` to a correlation-probability scan; the
/// contrast is `2A`.
pub fn parity_fit(delta_phi: &[f64], correlation: &[f64], errors: Option<&[f64]>) -> Result<ParityFit, TomoError> {
    if delta_phi.len() < 6 {
        return Err(TomoError::TooFewPoints { need: 6, got: delta_phi.len() });
    }
    let mut sorted: Vec<f64> = delta_phi.iter().map(|p| p.rem_euclid(TAU)).collect();
    sorted.sort_by(f64::total_cmp);
    let largest_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(sorted[0] + TAU - sorted[sorted.len() - 1], f64::max);
    let raw_span = sorted[sorted.len() - 1] - sorted[0];
    let spacing = TAU / delta_phi.len() as f64;
    // a full period is covered when no gap exceeds twice the mean spacing
    if largest_gap > 2.0 * spacing + 1e-9 {
        return Err(TomoError::InsufficientSpan(raw_span));
    }
    let fit = fit_sinusoid(delta_phi, correlation, errors)?;
    let floor = 1e-9 * fit.offset.abs().max(1.0);
    if fit.amplitude <= floor {
        return Err(TomoError::Degenerate("flat correlation data".into()));
    }
    Ok(ParityFit {
        contrast: 2.0 * fit.amplitude,
        contrast_err: 2.0 * fit.amplitude_err,
        phase: fit.phase,
        offset: fit.offset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RamseyFit {
    Decaying { tau: f64, tau_err: f64, chi2: f64 },
    /// No significant decay; `tau_lower` is `1/(k + 2σ_k)`.
    Unbounded { tau_lower: f64 },
}

impl RamseyFit {
    pub fn tau(&self) -> Option<f64> {
        match self {
            RamseyFit::Decaying { tau, .. } => Some(*tau),
            RamseyFit::Unbounded { .. } => None,
        }
    }
}

/// Least-squares fit of `exp(−t/τ)` in the units of `hold_times`.
pub fn ramsey_fit(hold_times: &[f64], visibilities: &[f64], errors: Option<&[f64]>) -> Result<RamseyFit, TomoError> {
    if hold_times.len() < 3 {
        return Err(TomoError::TooFewPoints { need: 3, got: hold_times.len() });
    }
    if hold_times.len() != visibilities.len() || errors.is_some_and(|e| e.len() != hold_times.len()) {
        return Err(TomoError::Degenerate("inputs differ in length".into()));
    }
    if let Some(v) = visibilities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(TomoError::NegativeProbability(*v));
    }
    let w: Vec<f64> = match errors {
        Some(e) => e.iter().map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 0.0 }).collect(),
        None => vec![1.0; hold_times.len()],
    };
    let cost = |k: f64| -> f64 {
        hold_times
            .iter()
            .zip(visibilities)
            .zip(&w)
            .map(|((&t, &v), &wk)| wk * (v - (-k * t).exp()).powi(2))
            .sum()
    };
    let t_min = hold_times.iter().cloned().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    if !t_min.is_finite() {
        return Err(TomoError::Degenerate("hold times must be positive".into()));
    }
    let (mut k, _) = brent_minimize(cost, 0.0, 50.0 / t_min, 1e-12, 500);
    // Gauss-Newton polish
    for _ in 0..20 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((&t, &v), &wk) in hold_times.iter().zip(visibilities).zip(&w) {
            let m = (-k * t).exp();
            let j = -t * m;
            num += wk * j * (v - m);
            den += wk * j * j;
        }
        if den <= 0.0 {
            break;
        }
        let step = num / den;
        let next = (k + step).max(0.0);
        if (next - k).abs() <= 1e-15 * k.abs().max(1e-300) {
            k = next;
            break;
        }
        k = next;
    }
    let n = hold_times.len();
    let chi2 = cost(k);
    let info: f64 = hold_times
        .iter()
        .zip(&w)
        .map(|(&t, &wk)| wk * (t * (-k * t).exp()).powi(2))
        .sum();
    let scale = if errors.is_none() { chi2 / (n - 1) as f64 } else { 1.0 };
    let sigma_k = if info > 0.0 { (scale / info).sqrt() } else { f64::INFINITY };
    if k <= 1e-12 / t_min || k <= sigma_k {
        return Ok(RamseyFit::Unbounded {
            tau_lower: 1.0 / (k + 2.0 * sigma_k),
        });
    }
    let tau = 1.0 / k;
    Ok(RamseyFit::Decaying {
        tau,
        tau_err: sigma_k * tau * tau,
        chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| TAU * k as f64 / n as f64).collect()
    }

    #[test]
    fn ideal_parity_has_unit_contrast() {
        let p = grid(24);
        let y: Vec<f64> = p.iter().map(|x| 0.5 * (1.0 + (x - 0.785).cos())).collect();
        let f = parity_fit(&p, &y, None).unwrap();
        assert!((f.contrast - 1.0).abs() < 1e-12);
        assert!((f.phase - 0.785).abs() < 1e-12);
    }

    #[test]
    fn recovers_amplitude_within_analytic_error() {
        let p = grid(24);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let errs = vec![0.01; p.len()];
        // for an even grid the amplitude variance is 2σ²/N
        let sigma_a = (2.0 * 0.01f64.powi(2) / p.len() as f64).sqrt();
        let mut within = 0;
        for _ in 0..200 {
            let y: Vec<f64> = p.iter().map(|x| 0.5 + 0.4 * (x - 1.0).cos() + noise.sample(&mut rng)).collect();
            let f = fit_sinusoid(&p, &y, Some(&errs)).unwrap();
            assert!((f.amplitude_err - sigma_a).abs() < 1e-3 * sigma_a);
            if (f.amplitude - 0.4).abs() < 3.0 * sigma_a {
                within += 1;
            }
        }
        assert!(within >= 196, "{within}");
    }

    #[test]
    fn parity_preconditions() {
        let flat = vec![0.5; 12];
        assert!(matches!(parity_fit(&grid(12), &flat, None), Err(TomoError::Degenerate(_))));
        assert!(matches!(parity_fit(&grid(5), &[0.5; 5], None), Err(TomoError::TooFewPoints { .. })));
        let half: Vec<f64> = (0..8).map(|k| 0.4 * k as f64).collect();
        assert!(matches!(parity_fit(&half, &[0.5; 8], None), Err(TomoError::InsufficientSpan(_))));
    }

    #[test]
    fn ramsey_exact_decay() {
        let t = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1500.0];
        let v: Vec<f64> = t.iter().map(|x: &f64| (-x / 500.0).exp()).collect();
        let tau = ramsey_fit(&t, &v, None).unwrap().tau().unwrap();
        assert!((tau - 500.0).abs() < 1e-6, "{tau}");
    }

    #[test]
    fn ramsey_flat_is_unbounded() {
        let t = [25.0, 100.0, 400.0, 1000.0];
        assert!(matches!(ramsey_fit(&t, &[1.0; 4], None).unwrap(), RamseyFit::Unbounded { .. }));
        assert!(matches!(ramsey_fit(&t[..2], &[1.0; 2], None), Err(TomoError::TooFewPoints { .. })));
        assert!(ramsey_fit(&t, &[1.0, 0.9, 1.2, 0.5], None).is_err());
    }
}
