use serde::{Deserialize, Serialize};

use super::TomoError;
use crate::linalg::{c, Mat2, Matrix};
use crate::optimize::{bfgs, numeric_gradient, BfgsOptions};
use crate::quantum::TwoQubitState;

/// `exp(−i v·σ/2)` with the standard Pauli matrices.
pub fn su2_from_rotation(v: [f64; 3]) -> Mat2<f64> {
    let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if angle < 1e-300 {
        return Mat2::identity();
    }
    let n = v.map(|x| x / angle);
    let (s, co) = (angle / 2.0).sin_cos();
    Matrix::from_rows([
        [c(co, -s * n[2]), c(-s * n[1], -s * n[0])],
        [c(s * n[1], -s * n[0]), c(co, s * n[2])],
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    pub u_atom: Mat2<f64>,
    pub u_photon: Mat2<f64>,
    pub aligned: TwoQubitState<f64>,
    /// Bell overlap of the aligned state.
    pub overlap: f64,
    /// Bell overlap before alignment.
    pub initial: f64,
    pub converged: bool,
}

impl OverlapResult {
    /// Overlap recovered by the local rotations.
    pub fn gain(&self) -> f64 {
        self.overlap - self.initial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub overlap: f64,
    pub initial: f64,
    pub gain: f64,
}

impl From<&OverlapResult> for OverlapSummary {
    fn from(r: &OverlapResult) -> Self {
        Self {
            overlap: r.overlap,
            initial: r.initial,
            gain: r.gain(),
        }
    }
}

fn overlap_at(rho: &TwoQubitState<f64>, x: &[f64]) -> (f64, Mat2<f64>, Mat2<f64>) {
    let ua = su2_from_rotation([x[0], x[1], x[2]]);
    let up = su2_from_rotation([x[3], x[4], x[5]]);
    let f = rho
        .apply_local_unitaries(&ua, &up)
        .map(|s| s.bell_fidelity())
        .unwrap_or(f64::NEG_INFINITY);
    (f, ua, up)
}

/// Local unitaries maximizing the Bell overlap of `(Ua ⊗ Up) ρ (Ua ⊗ Up)†`.
/// Several starts guard against stalling at a saddle.
pub fn optimize_local_overlap(rho: &TwoQubitState<f64>) -> Result<OverlapResult, TomoError> {
    let report = rho.is_physical(1e-9);
    if !report.physical {
        return Err(TomoError::Unphysical(report.min_eigenvalue));
    }
    let initial = rho.bell_fidelity();
    let pi = std::f64::consts::PI;
    let starts: [[f64; 6]; 4] = [
        [0.0; 6],
        [pi, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, pi, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, pi, 0.0, 0.0, 0.0],
    ];
    let f = |x: &[f64]| -overlap_at(rho, x).0;
    let g = |x: &[f64]| numeric_gradient(&f, x, 1e-7);
    let opts = BfgsOptions {
        max_iter: 500,
        grad_tol: 1e-9,
        step_tol: 1e-10,
        rel_value_tol: 1e-14,
    };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for s in starts {
        let m = bfgs(f, g, &s, &opts);
        if best.as_ref().is_none_or(|b| -m.value > b.0) {
            best = Some((-m.value, m.x, m.converged));
        }
    }
    let (_, x, converged) = best.expect("at least one start");
    let (overlap, ua, up) = overlap_at(rho, &x);
    // never report a loss against the identity
    let (overlap, ua, up) = if overlap < initial {
        (initial, Mat2::identity(), Mat2::identity())
    } else {
        (overlap, ua, up)
    };
    let aligned = rho.apply_local_unitaries(&ua, &up)?;
    Ok(OverlapResult {
        u_atom: ua,
        u_photon: up,
        aligned,
        overlap,
        initial,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use crate::quantum::random::{random_density, random_unitary2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn is_special_unitary(u: &Mat2<f64>) -> bool {
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        u.is_unitary(1e-12) && (det - Complex::new(1.0, 0.0)).norm() < 1e-12
    }

    /// Best Bell overlap over local unitaries, Kabsch style: local unitaries
    /// act on the 3×3 correlation block T as T → Oa·T·Opᵀ, and the target has
    /// block −1, so the maximum is ¼(1 + σ1 + σ2 ± σ3) with the singular
    /// values of T and the sign of det(−T).
    fn kabsch_oracle(rho: &TwoQubitState<f64>) -> f64 {
        let s = rho.correlation_table();
        let t: Vec<Vec<f64>> = (1..4).map(|i| (1..4).map(|j| s[i][j]).collect()).collect();
        let mut tt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                tt[i][j] = (0..3).map(|k| t[k][i] * t[k][j]).sum();
            }
        }
        let m = Matrix::<f64, 3, 3>::from_fn(|r, col| c(tt[r][col], 0.0));
        let mut sv: Vec<f64> = m.eigh().values.iter().map(|v| v.max(0.0).sqrt()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let det = t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
            + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0]);
        let sign = if -det >= 0.0 { 1.0 } else { -1.0 };
        0.25 * (1.0 + sv[0] + sv[1] + sign * sv[2])
    }

    #[test]
    fn generated_unitaries_are_special() {
        assert!(is_special_unitary(&su2_from_rotation([0.3, -1.2, 2.0])));
    }

    #[test]
    fn bell_target_needs_no_rotation() {
        let r = optimize_local_overlap(&TwoQubitState::bell_target()).unwrap();
        assert!(r.gain().abs() < 1e-8);
        assert!((r.overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn undoes_known_local_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let ua = random_unitary2(&mut rng);
            let up = random_unitary2(&mut rng);
            let rotated = TwoQubitState::bell_target().apply_local_unitaries(&ua, &up).unwrap();
            let r = optimize_local_overlap(&rotated).unwrap();
            assert!((r.overlap - 1.0).abs() < 1e-6, "{}", r.overlap);
            assert!((r.gain() - (1.0 - rotated.bell_fidelity())).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_singular_value_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for rank in [1, 2, 4] {
            let rho = random_density(&mut rng, rank);
            let r = optimize_local_overlap(&rho).unwrap();
            let want = kabsch_oracle(&rho);
            assert!((r.overlap - want).abs() < 1e-6, "{rank}: {} vs {want}", r.overlap);
        }
    }
}
