use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{invalid, DephasingModel};
use super::pulses::{field_phase, line_phases, sample_field_offset, HYPERFINE_HZ_PER_MG, ZEEMAN_HZ_PER_MG};
use super::SimError;
use crate::tomography::{fit_sinusoid, ramsey_fit, RamseyFit};

/// Fewest shots per phase point accepted for a visibility fit.
pub const MIN_SHOTS_PER_POINT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RamseyQubit {
    Zeeman,
    Hyperfine,
}

impl RamseyQubit {
    pub fn hz_per_mg(self) -> f64 {
        match self {
            RamseyQubit::Zeeman => ZEEMAN_HZ_PER_MG,
            RamseyQubit::Hyperfine => HYPERFINE_HZ_PER_MG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyConfig {
    pub qubit: RamseyQubit,
    pub hold_times_us: Vec<f64>,
    pub phase_points: usize,
    pub shots_per_point: u64,
    /// Spacing of consecutive shots in the lab, which sets how the AC lines
    /// are sampled.
    pub shot_period_us: f64,
    pub seed: u64,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            qubit: RamseyQubit::Zeeman,
            hold_times_us: vec![25.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0, 1000.0, 1200.0, 1500.0],
            phase_points: 12,
            shots_per_point: 200,
            shot_period_us: 1100.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyPoint {
    pub hold_us: f64,
    pub visibility: f64,
    pub visibility_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyResult {
    pub qubit: RamseyQubit,
    pub points: Vec<RamseyPoint>,
    pub fit: RamseyFit,
}

/// Ramsey sequence under magnetic noise: for every hold time the phase of
/// the second π/2 pulse is scanned and the fitted fringe height is the
/// visibility. Times are in µs.
pub fn simulate_ramsey(cfg: &RamseyConfig, dephasing: &DephasingModel) -> Result<RamseyResult, SimError> {
    dephasing.validate()?;
    if cfg.shots_per_point < MIN_SHOTS_PER_POINT {
        return Err(SimError::InsufficientShots {
            need: MIN_SHOTS_PER_POINT,
            got: cfg.shots_per_point,
        });
    }
    if cfg.hold_times_us.is_empty() || cfg.hold_times_us.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid("hold_times_us", "hold times must be finite and > 0"));
    }
    if cfg.phase_points < 3 {
        return Err(invalid("phase_points", "a fringe needs at least 3 phase points"));
    }
    if !(cfg.shot_period_us > 0.0) {
        return Err(invalid("shot_period_us", "must be > 0"));
    }

    let mut run_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lines = line_phases(dephasing, &mut run_rng);
    let sensitivity = cfg.qubit.hz_per_mg();
    let per_hold = cfg.phase_points as u64 * cfg.shots_per_point;
    let phis: Vec<f64> = (0..cfg.phase_points).map(|k| TAU * k as f64 / cfg.phase_points as f64).collect();

    let points = cfg
        .hold_times_us
        .par_iter()
        .enumerate()
        .map(|(h, &hold)| -> Result<RamseyPoint, SimError> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + h as u64);
            let n = cfg.shots_per_point as f64;
            let mut frac = Vec::with_capacity(phis.len());
            for (k, &phi) in phis.iter().enumerate() {
                let mut returned = 0u64;
                for i in 0..cfg.shots_per_point {
                    let index = h as u64 * per_hold + k as u64 * cfg.shots_per_point + i;
                    let t0 = index as f64 * cfg.shot_period_us * 1e-6;
                    let offset = sample_field_offset(dephasing, &mut rng);
                    let theta = field_phase(dephasing, &lines, sensitivity, offset, t0, hold * 1e-6);
                    if rng.random::<f64>() < 0.5 * (1.0 + (phi + theta).cos()) {
                        returned += 1;
                    }
                }
                frac.push(returned as f64 / n);
            }
            let errs: Vec<f64> = frac.iter().map(|p| (p * (1.0 - p) / n).sqrt().max(0.5 / n)).collect();
            let fit = fit_sinusoid(&phis, &frac, Some(&errs))?;
            Ok(RamseyPoint {
                hold_us: hold,
                visibility: (2.0 * fit.amplitude).min(1.0),
                visibility_err: 2.0 * fit.amplitude_err,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let t: Vec<f64> = points.iter().map(|p| p.hold_us).collect();
    let v: Vec<f64> = points.iter().map(|p| p.visibility).collect();
    let e: Vec<f64> = points.iter().map(|p| p.visibility_err.max(1e-3)).collect();
    let fit = ramsey_fit(&t, &v, Some(&e))?;
    Ok(RamseyResult {
        qubit: cfg.qubit,
        points,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quasi-static Gaussian field noise: V(t) = exp(−σ_φ²/2) with
    /// σ_φ = 2π·s·σ_B·t.
    fn gaussian_oracle(hz_per_mg: f64, sigma_mg: f64, t_us: f64) -> f64 {
        let s = TAU * hz_per_mg * sigma_mg * t_us * 1e-6;
        (-0.5 * s * s).exp()
    }

    fn static_noise(sigma: f64) -> DephasingModel {
        DephasingModel {
            b_noise_rms_mg: sigma,
            ac_components: vec![],
            ..DephasingModel::default()
        }
    }

    #[test]
    fn quiet_field_keeps_full_visibility() {
        let r = simulate_ramsey(&RamseyConfig::default(), &DephasingModel::quiet()).unwrap();
        for p in &r.points {
            assert!(p.visibility > 0.97, "{p:?}");
        }
        assert!(matches!(r.fit, RamseyFit::Unbounded { .. }));
    }

    #[test]
    fn static_noise_matches_gaussian_oracle() {
        let cfg = RamseyConfig {
            hold_times_us: vec![100.0, 300.0, 600.0],
            shots_per_point: 2000,
            ..RamseyConfig::default()
        };
        for qubit in [RamseyQubit::Zeeman, RamseyQubit::Hyperfine] {
            let r = simulate_ramsey(&RamseyConfig { qubit, ..cfg.clone() }, &static_noise(0.072)).unwrap();
            for p in &r.points {
                let want = gaussian_oracle(qubit.hz_per_mg(), 0.072, p.hold_us);
                assert!((p.visibility - want).abs() < 4.0 * p.visibility_err + 0.01, "{qubit:?} {p:?} {want}");
            }
        }
    }

    #[test]
    fn hyperfine_outlives_zeeman() {
        let noise = DephasingModel::default();
        let z = simulate_ramsey(&RamseyConfig::default(), &noise).unwrap();
        let h = simulate_ramsey(
            &RamseyConfig {
                qubit: RamseyQubit::Hyperfine,
                ..RamseyConfig::default()
            },
            &noise,
        )
        .unwrap();
        let tz = z.fit.tau().unwrap();
        let th = h.fit.tau().unwrap();
        assert!(th > tz, "{th} vs {tz}");
    }

    #[test]
    fn rejects_bad_input() {
        let few = RamseyConfig {
            shots_per_point: 99,
            ..RamseyConfig::default()
        };
        assert!(matches!(simulate_ramsey(&few, &DephasingModel::quiet()), Err(SimError::InsufficientShots { .. })));
        let neg = RamseyConfig {
            hold_times_us: vec![10.0, -1.0, 20.0],
            ..RamseyConfig::default()
        };
        assert!(matches!(simulate_ramsey(&neg, &DephasingModel::quiet()), Err(SimError::InvalidConfig { .. })));
    }

    #[test]
    fn deterministic() {
        let a = simulate_ramsey(&RamseyConfig::default(), &DephasingModel::default()).unwrap();
        let b = simulate_ramsey(&RamseyConfig::default(), &DephasingModel::default()).unwrap();
        assert_eq!(a, b);
    }
}
