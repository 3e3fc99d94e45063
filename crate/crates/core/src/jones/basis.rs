use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{fiber_unitary, hwp, qwp, wrap, FiberModel, JonesElement, JonesError, Offsets, WaveplateSetting};
use crate::linalg::{c, Matrix, Vec2};
use crate::optimize::brent_minimize;
use crate::quantum::PauliLabel;

const SCAN_POINTS: usize = 720;
const REQUIRED_EXTINCTION: f64 = 1e-3;

/// Field vector of a photon-qubit eigenstate at the fiber input. Logical
/// `|0⟩` is σ− = (H − iV)/√2 and logical `|1⟩` is σ+ = (H + iV)/√2.
pub fn photon_logical_state(basis: PauliLabel, positive: bool) -> Vec2<f64> {
    let e = basis.eigenstate::<f64>(positive);
    let s = FRAC_1_SQRT_2;
    let to_field = Matrix::from_rows([[c(s, 0.0), c(s, 0.0)], [c(0.0, -s), c(0.0, s)]]);
    to_field * e
}

/// Single pass fiber → QWP → HWP for a commanded setting.
pub fn photon_train(fiber: &FiberModel<f64>, setting: &WaveplateSetting) -> JonesElement<f64> {
    fiber_unitary(fiber)
        .reversed()
        .then(&qwp(setting.physical_qwp()))
        .then(&hwp(setting.physical_hwp()))
}

/// Worse of the two leakages: `+1` eigenstate into V and `−1` into H.
pub fn extinction(fiber: &FiberModel<f64>, setting: &WaveplateSetting, basis: PauliLabel) -> f64 {
    let m = photon_train(fiber, setting);
    let plus = m.apply(&photon_logical_state(basis, true));
    let minus = m.apply(&photon_logical_state(basis, false));
    plus.entry(1).norm_sqr().max(minus.entry(0).norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSolution {
    pub basis: PauliLabel,
    pub setting: WaveplateSetting,
    pub extinction: f64,
}

/// Leakage into V after the QWP at physical angle `tq` and the best HWP,
/// together with that HWP angle.
fn best_hwp(after_fiber: &Vec2<f64>, tq: f64) -> (f64, f64) {
    let v = qwp(tq).apply(after_fiber);
    let (v0, v1) = (v.entry(0), v.entry(1));
    let a00 = v0.norm_sqr();
    let a11 = v1.norm_sqr();
    let a01 = (v0 * v1.conj()).re;
    let lmax = 0.5 * (a00 + a11 + ((a00 - a11).powi(2) + 4.0 * a01 * a01).sqrt());
    let psi = 0.5 * (2.0 * a01).atan2(a00 - a11);
    ((1.0 - lmax).max(0.0), psi / 2.0)
}

/// Waveplate angles that send the `+1` eigenstate of `basis` to the H port
/// and the `−1` eigenstate to V. Among the solutions the one with the
/// commanded HWP angle closest to zero is returned, ties going to the
/// smaller QWP angle. The HWP angle is reported in `[0, π/2)` and the QWP
/// angle in `[0, π)`.
pub fn solve_basis_angles(fiber: &FiberModel<f64>, offsets: &Offsets, basis: PauliLabel) -> Result<BasisSolution, JonesError> {
    if basis == PauliLabel::Identity {
        return Err(JonesError::NotMeasurable(basis));
    }
    let after_fiber = fiber_unitary(fiber).reversed().apply(&photon_logical_state(basis, true));
    let step = PI / SCAN_POINTS as f64;
    let scan: Vec<f64> = (0..SCAN_POINTS).map(|k| best_hwp(&after_fiber, k as f64 * step).0).collect();
    let mut candidates = Vec::new();
    for k in 0..SCAN_POINTS {
        let prev = scan[(k + SCAN_POINTS - 1) % SCAN_POINTS];
        let next = scan[(k + 1) % SCAN_POINTS];
        if scan[k] <= prev && scan[k] <= next {
            let center = k as f64 * step;
            if scan[k] < 1e-24 {
                candidates.push((center, scan[k]));
                continue;
            }
            let (tq, ext) = brent_minimize(|t| best_hwp(&after_fiber, t).0, center - step, center + step, 1e-14, 200);
            candidates.push((tq, ext));
        }
    }
    let best_ext = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !(best_ext <= REQUIRED_EXTINCTION) {
        return Err(JonesError::NoSolution { extinction: best_ext });
    }
    let mut solutions: Vec<WaveplateSetting> = candidates
        .iter()
        .filter(|c| c.1 <= REQUIRED_EXTINCTION)
        .map(|&(tq, _)| {
            let (_, th) = best_hwp(&after_fiber, tq);
            WaveplateSetting {
                theta_hwp: wrap(th - offsets.hwp, FRAC_PI_2),
                theta_qwp: wrap(tq - offsets.qwp, PI),
                offsets: *offsets,
            }
        })
        .collect();
    let hwp_dist = |s: &WaveplateSetting| s.theta_hwp.min(FRAC_PI_2 - s.theta_hwp);
    solutions.sort_by(|a, b| {
        let (da, db) = (hwp_dist(a), hwp_dist(b));
        if (da - db).abs() > 1e-9 {
            da.total_cmp(&db)
        } else {
            a.theta_qwp.total_cmp(&b.theta_qwp)
        }
    });
    let setting = solutions[0];
    Ok(BasisSolution {
        basis,
        setting,
        extinction: extinction(fiber, &setting, basis),
    })
}
