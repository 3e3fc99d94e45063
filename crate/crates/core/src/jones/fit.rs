use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heatmap::{v_rate, HeatMap};
use super::{fiber_unitary, rotation, wrap, FiberModel, JonesError, Offsets};
use crate::linalg::Matrix;
use crate::optimize::{levenberg_marquardt, numeric_jacobian, LmOptions};

/// Transformations that leave every calibration rate unchanged.
pub const GAUGE_NOTES: [&str; 4] = [
    "rates depend on the fiber only through W = F^T F, a linear retarder; F and O*F give the same map for any real rotation O, which only moves the equatorial phase reference of the photon basis",
    "hwp offset + e is equivalent to qwp offset - 2e together with the W axis - 2e (hwp(t + e) = hwp(t) R(-2e) = R(2e) hwp(t)), so the hwp offset is absorbed and reported as zero",
    "qwp offset is defined modulo pi/2 when W is replaced by its complex conjugate (qwp(t + pi/2) = conj(qwp(t))), which swaps the sigma+ and sigma- labels",
    "canonical form: hwp offset 0, qwp offset in [0, pi/2), W = exp(i chi) retarder(axis, retardance) with retardance in [0, pi] and axis modulo pi; representative fiber = retarder(axis, retardance / 2)",
];

/// Gauge-fixed description of a calibration model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFiber {
    /// Fast axis of the round-trip retarder, in `[0, π)`.
    pub axis: f64,
    /// Round-trip retardance, in `[0, π]`.
    pub retardance: f64,
    pub qwp_offset: f64,
}

impl CanonicalFiber {
    /// Single-pass fiber whose round trip is the canonical retarder.
    pub fn fiber(&self) -> FiberModel<f64> {
        FiberModel::new(self.axis, 0.0, self.retardance / 2.0)
    }

    pub fn offsets(&self) -> Offsets {
        Offsets {
            hwp: 0.0,
            qwp: self.qwp_offset,
        }
    }

    /// Largest angular difference, each angle compared on its own circle.
    /// The axis is ignored when both retardances vanish.
    pub fn distance(&self, other: &Self) -> f64 {
        let circ = |a: f64, b: f64, p: f64| {
            let d = wrap(a - b, p);
            d.min(p - d)
        };
        let axis = if self.retardance.max(other.retardance) < 1e-9 {
            0.0
        } else {
            circ(self.axis, other.axis, PI)
        };
        axis.max((self.retardance - other.retardance).abs())
            .max(circ(self.qwp_offset, other.qwp_offset, FRAC_PI_2))
    }
}

pub fn canonical_form(fiber: &FiberModel<f64>, offsets: &Offsets) -> CanonicalFiber {
    let f = fiber_unitary(fiber).m;
    // move the hwp offset into the qwp offset and the W axis
    let shift = rotation(2.0 * offsets.hwp);
    let mut w = shift.transpose() * f.transpose() * f * shift;
    let qwp_offset = offsets.qwp - 2.0 * offsets.hwp;
    let turns = (qwp_offset / FRAC_PI_2).floor();
    if (turns as i64).rem_euclid(2) == 1 {
        w = w.conj();
    }
    let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
    let mut v = w.scale(Complex64::from_polar(1.0, -det.arg() / 2.0));
    if v.trace().re < 0.0 {
        v = -v;
    }
    let co = (v.trace().re / 2.0).clamp(-1.0, 1.0);
    let sc = -v[(0, 0)].im;
    let ss = -v[(0, 1)].im;
    let s = sc.hypot(ss);
    CanonicalFiber {
        axis: if s > 0.0 { wrap(ss.atan2(sc) / 2.0, PI) } else { 0.0 },
        retardance: 2.0 * s.atan2(co),
        qwp_offset: qwp_offset - turns * FRAC_PI_2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting `(α, β, δ)`; offsets start at zero and the scale at one.
    pub starts: Vec<[f64; 3]>,
    pub lm: LmOptions,
    /// Relative cost gap under which two local minima count as tied.
    pub tie_tolerance: f64,
    /// Minimal canonical distance for a tied minimum to count as distinct.
    pub distinct_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        let mut starts = Vec::with_capacity(16);
        for alpha in [0.3, 1.1] {
            for beta in [-0.3, 0.3] {
                for delta in [0.8, 2.4, 3.9, 5.5] {
                    starts.push([alpha, beta, delta]);
                }
            }
        }
        Self {
            starts,
            lm: LmOptions::default(),
            tie_tolerance: 1e-6,
            distinct_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fiber: FiberModel<f64>,
    pub offsets: Offsets,
    /// Amplitude factor between the model and the max-normalized map.
    pub scale: f64,
    /// Sum of squared rate residuals against the normalized map.
    pub residual: f64,
    pub rms: f64,
    pub points: usize,
    pub converged: bool,
    pub canonical: CanonicalFiber,
    /// Smallest over largest eigenvalue of `JᵀJ` in the canonical
    /// parameters (axis, retardance, qwp offset, scale).
    pub conditioning: f64,
    /// Set when tied minima differ beyond the gauge equivalences, or when
    /// the canonical parameters are not locally identifiable.
    pub degenerate: bool,
    pub alternatives: Vec<CanonicalFiber>,
    pub starts_converged: usize,
    pub gauge_notes: Vec<String>,
}

fn model_residuals(map: &HeatMap, fiber: &FiberModel<f64>, offsets: &Offsets, scale: f64) -> Vec<f64> {
    map.points()
        .map(|(h, q, r)| scale * v_rate(fiber, offsets, h, q) - r)
        .collect()
}

fn check_preconditions(map: &HeatMap) -> Result<(), JonesError> {
    if map.len() < 25 {
        return Err(JonesError::TooFewPoints(map.len()));
    }
    for (axis, angles) in [("hwp", &map.hwp), ("qwp", &map.qwp)] {
        let span = angles.last().copied().unwrap_or(0.0) - angles.first().copied().unwrap_or(0.0);
        if span < FRAC_PI_2 - 1e-9 {
            return Err(JonesError::InsufficientSpan {
                axis,
                span_deg: span.to_degrees(),
            });
        }
    }
    Ok(())
}

/// Least-squares estimate of the fiber and waveplate offsets from a
/// reflection map, normalized to unit maximum first. Each start runs
/// Levenberg–Marquardt over `(α, β, δ, hwp offset, qwp offset, scale)`.
pub fn fit_fiber(map: &HeatMap, opts: &FitOptions) -> Result<FitReport, JonesError> {
    check_preconditions(map)?;
    let data = map.normalized();
    let runs: Vec<_> = opts
        .starts
        .par_iter()
        .map(|s| {
            let x0 = [s[0], s[1], s[2], 0.0, 0.0, 1.0];
            let r = |p: &[f64]| {
                model_residuals(&data, &FiberModel::new(p[0], p[1], p[2]), &Offsets { hwp: p[3], qwp: p[4] }, p[5])
            };
            levenberg_marquardt(r, &x0, &opts.lm)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let b = &runs[best];
    let fiber = FiberModel::new(b.x[0], b.x[1], b.x[2]);
    let offsets = Offsets { hwp: b.x[3], qwp: b.x[4] };
    let canonical = canonical_form(&fiber, &offsets);

    let tie = |c: f64| c <= b.cost * (1.0 + opts.tie_tolerance) + 1e-12;
    let mut alternatives: Vec<CanonicalFiber> = Vec::new();
    for run in runs.iter().filter(|r| tie(r.cost)) {
        let alt = canonical_form(&FiberModel::new(run.x[0], run.x[1], run.x[2]), &Offsets { hwp: run.x[3], qwp: run.x[4] });
        if alt.distance(&canonical) > opts.distinct_tolerance
            && alternatives.iter().all(|a| a.distance(&alt) > opts.distinct_tolerance)
        {
            alternatives.push(alt);
        }
    }

    let conditioning = canonical_conditioning(&data, &canonical, b.x[5]);
    let n = data.len();
    Ok(FitReport {
        fiber,
        offsets,
        scale: b.x[5],
        residual: b.cost,
        rms: (b.cost / n as f64).sqrt(),
        points: n,
        converged: b.converged,
        canonical,
        conditioning,
        degenerate: !alternatives.is_empty() || conditioning < 1e-10,
        alternatives,
        starts_converged: runs.iter().filter(|r| r.converged).count(),
        gauge_notes: GAUGE_NOTES.iter().map(|s| s.to_string()).collect(),
    })
}

fn canonical_conditioning(data: &HeatMap, c: &CanonicalFiber, scale: f64) -> f64 {
    let r = |p: &[f64]| {
        let fiber = FiberModel::new(p[0], 0.0, p[1] / 2.0);
        model_residuals(data, &fiber, &Offsets { hwp: 0.0, qwp: p[2] }, p[3])
    };
    let x = [c.axis, c.retardance, c.qwp_offset, scale];
    let j = numeric_jacobian(&r, &x, 1e-6);
    let jtj: Matrix<f64, 4, 4> = Matrix::from_fn(|a, b| Complex64::new(j.iter().map(|row| row[a] * row[b]).sum(), 0.0));
    let ev = jtj.eigh().values;
    let max = ev[3].abs();
    if max > 0.0 {
        ev[0].max(0.0) / max
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::simulate_reflection_heatmap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn canonical_form_is_gauge_invariant() {
        let f = FiberModel::new(0.7, 0.25, 2.1);
        let off = Offsets { hwp: 0.05, qwp: -0.08 };
        let base = canonical_form(&f, &off);
        // map regenerated from the canonical representative is identical
        let (h, q) = HeatMap::grid(12, 12, PI);
        let m0 = simulate_reflection_heatmap(&f, &off, &h, &q);
        let m1 = simulate_reflection_heatmap(&base.fiber(), &base.offsets(), &h, &q);
        assert!(m0.rms_difference(&m1) < 1e-12);
        // real rotation on the cavity side
        let rot = crate::jones::rotation(0.4);
        let rotated = rot * fiber_unitary(&f).m;
        let w = rotated.transpose() * rotated;
        let w0 = fiber_unitary(&f).m.transpose() * fiber_unitary(&f).m;
        assert!(w.approx_eq(&w0, 1e-14));
        // quarter turn of the hwp, and the continuous hwp/qwp/axis trade
        let shifted = canonical_form(&f, &Offsets { hwp: off.hwp + FRAC_PI_2, qwp: off.qwp });
        assert!(shifted.distance(&base) < 1e-12);
        let eps = 0.13;
        let traded = Offsets { hwp: off.hwp + eps, qwp: off.qwp + 2.0 * eps };
        // F·R(−2e) turns the W axis by +2e
        let rotated_fiber = fiber_unitary(&f).m * rotation(-2.0 * eps);
        let m3: Vec<f64> = h
            .iter()
            .flat_map(|&th| q.iter().map(move |&tq| (th, tq)))
            .map(|(th, tq)| {
                let hh = crate::jones::hwp(th + traded.hwp).m;
                let qq = crate::jones::qwp(tq + traded.qwp).m;
                let fwd = rotated_fiber * qq * hh;
                (fwd.transpose() * fwd * crate::jones::horizontal())[(1, 0)].norm_sqr()
            })
            .collect();
        for ((_, _, r0), r3) in m0.points().zip(&m3) {
            assert!((r0 - r3).abs() < 1e-12);
        }
        let conj_model = Offsets { hwp: off.hwp, qwp: off.qwp + FRAC_PI_2 };
        // same map with the conjugated fiber
        let fc = FiberModel::new(0.7 + FRAC_PI_2, 0.25, 2.1);
        assert!(fiber_unitary(&fc).m.approx_eq(&fiber_unitary(&f).m.conj(), 1e-14));
        let m2 = simulate_reflection_heatmap(&fc, &conj_model, &h, &q);
        assert!(m0.rms_difference(&m2) < 1e-12);
        assert!(canonical_form(&fc, &conj_model).distance(&base) < 1e-12);
    }

    #[test]
    fn recovers_synthetic_fiber() {
        let f = FiberModel::new(0.7, 0.25, 2.1);
        let off = Offsets { hwp: 0.05, qwp: -0.08 };
        let (h, q) = HeatMap::grid(20, 20, PI);
        let map = simulate_reflection_heatmap(&f, &off, &h, &q);
        let rep = fit_fiber(&map, &FitOptions::default()).unwrap();
        let truth = canonical_form(&f, &off);
        assert!(rep.canonical.distance(&truth) < 1e-3, "{:?} vs {:?}", rep.canonical, truth);
        let regen = simulate_reflection_heatmap(&rep.fiber, &rep.offsets, &h, &q).normalized();
        assert!(regen.rms_difference(&map.normalized()) < 1e-6);
        assert!(!rep.degenerate, "{rep:?}");
    }

    #[test]
    fn identity_fiber_gives_zero_retardance() {
        let (h, q) = HeatMap::grid(10, 10, PI);
        let map = simulate_reflection_heatmap(&FiberModel::new(0.0, 0.0, 0.0), &Offsets::default(), &h, &q);
        let rep = fit_fiber(&map, &FitOptions::default()).unwrap();
        assert!(rep.canonical.retardance < 1e-4, "{:?}", rep.canonical);
        assert!(rep.degenerate);
    }

    #[test]
    fn noisy_residual_matches_noise_level() {
        let f = FiberModel::new(1.2, -0.15, 4.0);
        let (h, q) = HeatMap::grid(20, 20, PI);
        let mut map = simulate_reflection_heatmap(&f, &Offsets::default(), &h, &q).normalized();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.02).unwrap();
        for row in &mut map.rates {
            for v in row.iter_mut() {
                *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        let rep = fit_fiber(&map, &FitOptions::default()).unwrap();
        let expected = map.len() as f64 * 0.02f64.powi(2);
        assert!(rep.residual > expected / 2.0 && rep.residual < expected * 2.0, "{} vs {}", rep.residual, expected);
    }

    #[test]
    fn preconditions() {
        let (h, q) = HeatMap::grid(3, 1, PI);
        let map = simulate_reflection_heatmap(&FiberModel::new(0.0, 0.0, 0.0), &Offsets::default(), &h, &q);
        assert!(matches!(fit_fiber(&map, &FitOptions::default()), Err(JonesError::TooFewPoints(3))));
        let narrow: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let map = simulate_reflection_heatmap(&FiberModel::new(0.0, 0.0, 0.0), &Offsets::default(), &narrow, &narrow);
        assert!(matches!(fit_fiber(&map, &FitOptions::default()), Err(JonesError::InsufficientSpan { .. })));
    }
}
