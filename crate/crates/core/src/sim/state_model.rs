use crate::linalg::{kron, Mat2};
use crate::quantum::{PauliLabel, TwoQubitState};

use super::config::StateModel;
use super::SimError;

/// Coherence factor `d ∈ [0, 1]` of the atomic z-dephasing channel that
/// brings the noisy state to the target purity.
///
/// With white-noise weight `w` the populations are `w/4` and
/// `(1 − w)/2 + w/4` and the single coherence is `(1 − w)·d/2`.
pub fn dephasing_factor(model: &StateModel) -> Result<f64, SimError> {
    let w = model.white_noise;
    let p = model.purity_target;
    if !(0.25..=1.0).contains(&p) {
        return Err(SimError::InfeasiblePurity {
            target: p,
            reason: "purity of a two-qubit state lies in [0.25, 1]".into(),
        });
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(SimError::InfeasiblePurity {
            target: p,
            reason: format!("white noise weight {w} is not a probability"),
        });
    }
    let low = w / 4.0;
    let high = (1.0 - w) / 2.0 + w / 4.0;
    let floor = 2.0 * low * low + 2.0 * high * high;
    let coherence = (1.0 - w) / 2.0;
    if coherence == 0.0 {
        return if (p - floor).abs() < 1e-12 {
            Ok(0.0)
        } else {
            Err(SimError::InfeasiblePurity {
                target: p,
                reason: "white noise alone fixes the purity at 0.25".into(),
            })
        };
    }
    let d2 = (p - floor) / (2.0 * coherence * coherence);
    if !(-1e-12..=1.0 + 1e-12).contains(&d2) {
        let top = floor + 2.0 * coherence * coherence;
        return Err(SimError::InfeasiblePurity {
            target: p,
            reason: format!("with white noise {w} the purity is confined to [{floor:.6}, {top:.6}]"),
        });
    }
    Ok(d2.clamp(0.0, 1.0).sqrt())
}

/// Target Bell state after atomic z-dephasing and white noise.
pub fn emitted_joint_state(model: &StateModel) -> Result<TwoQubitState<f64>, SimError> {
    let d = dephasing_factor(model)?;
    let bell = TwoQubitState::bell_target();
    let zi = kron(&PauliLabel::Z.matrix::<f64>(), &Mat2::identity());
    let flipped = bell.conjugate_by(&zi);
    let dephased = bell.mix(&flipped, (1.0 + d) / 2.0);
    Ok(TwoQubitState::maximally_mixed().mix(&dephased, model.white_noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_noise_is_bell_target() {
        let s = emitted_joint_state(&StateModel::pure()).unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-12);
        assert!(s.matrix().approx_eq(TwoQubitState::<f64>::bell_target().matrix(), 1e-14));
    }

    #[test]
    fn default_target_purity() {
        let s = emitted_joint_state(&StateModel::default()).unwrap();
        assert!((s.purity() - 0.840).abs() < 1e-3);
        assert!(s.is_physical(1e-12).physical);
    }

    #[test]
    fn full_white_noise_is_maximally_mixed() {
        let m = StateModel {
            white_noise: 1.0,
            purity_target: 0.25,
        };
        let s = emitted_joint_state(&m).unwrap();
        assert!((s.purity() - 0.25).abs() < 1e-12);
        assert!(s.matrix().approx_eq(TwoQubitState::<f64>::maximally_mixed().matrix(), 1e-14));
    }

    #[test]
    fn infeasible_targets() {
        for p in [1.2, 0.2] {
            let m = StateModel {
                white_noise: 0.0,
                purity_target: p,
            };
            assert!(matches!(emitted_joint_state(&m), Err(SimError::InfeasiblePurity { .. })));
        }
        // white noise alone already drops the purity below the target
        let m = StateModel {
            white_noise: 0.3,
            purity_target: 0.95,
        };
        assert!(matches!(emitted_joint_state(&m), Err(SimError::InfeasiblePurity { .. })));
    }

    #[test]
    fn dephasing_only_touches_equatorial_correlations() {
        let m = StateModel {
            white_noise: 0.05,
            purity_target: 0.85,
        };
        let s = emitted_joint_state(&m).unwrap();
        let t = s.correlation_table();
        assert!((t[3][3] + 0.95).abs() < 1e-12);
        let d = dephasing_factor(&m).unwrap();
        assert!((t[1][1] + 0.95 * d).abs() < 1e-12);
        assert!((t[2][2] + 0.95 * d).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hits_any_feasible_purity(w in 0.0f64..0.3, frac in 0.0f64..1.0) {
            let low = StateModel { white_noise: w, purity_target: 0.25 };
            let floor = {
                let a = w / 4.0;
                let b = (1.0 - w) / 2.0 + w / 4.0;
                2.0 * a * a + 2.0 * b * b
            };
            let top = floor + 2.0 * ((1.0 - w) / 2.0).powi(2);
            let m = StateModel { purity_target: floor + frac * (top - floor), ..low };
            let s = emitted_joint_state(&m).unwrap();
            prop_assert!((s.purity() - m.purity_target).abs() < 1e-10);
            prop_assert!(s.is_physical(1e-12).physical);
        }
    }
}
