//! Jones calculus for the photon detection path: waveplates, a lossless
//! fiber retarder, the reflected-light calibration map, fiber estimation
//! from that map and waveplate settings for each photon readout basis.
//!
//! Matrices act on field amplitudes in the (H, V) basis. The photon travels
//! fiber → QWP → HWP → PBS; the calibration laser travels the reverse way,
//! reflects at the fiber end and returns. The backward pass through any
//! element is its transpose in the linear basis.

mod basis;
mod fit;
mod heatmap;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, cis, Mat2, Matrix, Vec2};
use crate::scalar::Real;

pub use basis::{extinction, photon_logical_state, photon_train, solve_basis_angles, BasisSolution};
pub use fit::{canonical_form, fit_fiber, CanonicalFiber, FitOptions, FitReport, GAUGE_NOTES};
pub use heatmap::{read_heatmap_csv, simulate_reflection_heatmap, v_rate, write_heatmap_csv, HeatMap};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JonesError {
    #[error("heat map has {0} points, at least 25 are needed")]
    TooFewPoints(usize),
    #[error("{axis} angles span {span_deg:.2} deg, at least 90 deg are needed")]
    InsufficientSpan { axis: &'static str, span_deg: f64 },
    #[error("heat map grid is not rectangular: {0}")]
    NotRectangular(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no waveplate setting reaches the required extinction (best {extinction:e})")]
    NoSolution { extinction: f64 },
    #[error("basis {0} has no readout eigenstates")]
    NotMeasurable(crate::quantum::PauliLabel),
}

/// 2×2 field transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesElement<T> {
    pub m: Mat2<T>,
}

impl<T: Real> JonesElement<T> {
    pub fn new(m: Mat2<T>) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self { m: Mat2::identity() }
    }

    /// Element traversed after `self`.
    pub fn then(&self, next: &Self) -> Self {
        Self { m: next.m * self.m }
    }

    /// Same element traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    pub fn apply(&self, v: &Vec2<T>) -> Vec2<T> {
        self.m * *v
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.m.is_unitary(tol)
    }
}

/// Real rotation by `theta`.
pub fn rotation<T: Real>(theta: T) -> Mat2<T> {
    let (s, co) = theta.sin_cos();
    Matrix::from_rows([[c(co, T::zero()), c(-s, T::zero())], [c(s, T::zero()), c(co, T::zero())]])
}

/// Linear retarder with fast axis at `theta` and retardance `delta`.
pub fn retarder<T: Real>(theta: T, delta: T) -> JonesElement<T> {
    let half = delta * T::lit(0.5);
    let d = Matrix::from_rows([[cis(-half), Complex::zero()], [Complex::zero(), cis(half)]]);
    JonesElement::new(rotation(theta) * d * rotation(-theta))
}

pub fn hwp<T: Real>(theta: T) -> JonesElement<T> {
    retarder(theta, T::PI())
}

pub fn qwp<T: Real>(theta: T) -> JonesElement<T> {
    retarder(theta, T::FRAC_PI_2())
}

pub fn horizontal<T: Real>() -> Vec2<T> {
    Matrix::from_column([Complex::new(T::one(), T::zero()), Complex::zero()])
}

pub fn vertical<T: Real>() -> Vec2<T> {
    Matrix::from_column([Complex::zero(), Complex::new(T::one(), T::zero())])
}

/// Stokes vector `(S0, S1, S2, S3)` of a field.
pub fn stokes<T: Real>(v: &Vec2<T>) -> [T; 4] {
    let (h, w) = (v.entry(0), v.entry(1));
    let cross = h.conj() * w;
    let two = T::lit(2.0);
    [h.norm_sqr() + w.norm_sqr(), h.norm_sqr() - w.norm_sqr(), two * cross.re, two * cross.im]
}

/// General lossless retarder: axis orientation `alpha`, ellipticity `beta`
/// and retardance `delta` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberModel<T> {
    pub alpha: T,
    pub beta: T,
    pub delta: T,
}

impl<T: Real> FiberModel<T> {
    /// Wraps `delta` into `[0, 2π)`.
    pub fn new(alpha: T, beta: T, delta: T) -> Self {
        let tau = T::TAU();
        let mut d = delta % tau;
        if d < T::zero() {
            d = d + tau;
        }
        Self { alpha, beta, delta: d }
    }

    /// Unit retardation axis on the Poincaré sphere, components along
    /// (diag(1,−1), σx, σy) in the textbook convention.
    pub fn axis(&self) -> [T; 3] {
        let two = T::lit(2.0);
        let cb = (two * self.beta).cos();
        [cb * (two * self.alpha).cos(), cb * (two * self.alpha).sin(), (two * self.beta).sin()]
    }

    pub fn unitary(&self) -> JonesElement<T> {
        fiber_unitary(self)
    }
}

/// `cos(δ/2)·1 − i·sin(δ/2)·(n·σ)`
pub fn fiber_unitary<T: Real>(f: &FiberModel<T>) -> JonesElement<T> {
    let [n1, n2, n3] = f.axis();
    let half = f.delta * T::lit(0.5);
    let (s, co) = half.sin_cos();
    // −i·s·(n1 Z + n2 X + n3 Y)
    let m = Matrix::from_rows([
        [c(co, -s * n1), c(-s * n3, -s * n2)],
        [c(s * n3, -s * n2), c(co, s * n1)],
    ]);
    JonesElement::new(m)
}

/// Zero positions of the waveplate fast axes; the physical angle is the
/// commanded angle plus the offset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Offsets {
    pub hwp: f64,
    pub qwp: f64,
}

/// Commanded waveplate angles in radians, reported modulo π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub theta_hwp: f64,
    pub theta_qwp: f64,
    pub offsets: Offsets,
}

impl WaveplateSetting {
    pub fn physical_hwp(&self) -> f64 {
        self.theta_hwp + self.offsets.hwp
    }

    pub fn physical_qwp(&self) -> f64 {
        self.theta_qwp + self.offsets.qwp
    }
}

/// `x` reduced to `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::random::random_unitary2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn same_up_to_phase(a: &Vec2<f64>, b: &Vec2<f64>) -> bool {
        (a.dot(b).norm() - a.norm() * b.norm()).abs() < 1e-12
    }

    #[test]
    fn waveplate_examples() {
        let h = horizontal::<f64>();
        assert!(same_up_to_phase(&hwp(0.0).apply(&h), &h));
        assert!(same_up_to_phase(&hwp(FRAC_PI_4).apply(&h), &vertical()));
        let s = stokes(&qwp(FRAC_PI_4).apply(&h));
        assert!((s[0] - 1.0).abs() < 1e-15 && (s[3].abs() - 1.0).abs() < 1e-15);
        assert!(hwp(0.3).is_unitary(1e-14) && qwp(1.1).is_unitary(1e-14));
    }

    #[test]
    fn waveplates_are_symmetric() {
        for th in [0.0, 0.4, 1.3, 2.9] {
            for el in [hwp(th), qwp(th)] {
                assert!(el.m.approx_eq(&el.m.transpose(), 1e-15));
            }
        }
    }

    #[test]
    fn quarter_turn_gauges() {
        for th in [0.0, 0.2, 1.0] {
            let q = qwp(th).m;
            assert!(qwp(th + PI / 2.0).m.approx_eq(&q.conj(), 1e-15));
            assert!(hwp(th + PI / 2.0).m.approx_eq(&(-hwp(th).m), 1e-15));
        }
    }

    #[test]
    fn fiber_anchors() {
        assert!(fiber_unitary(&FiberModel::new(0.0, 0.0, 0.0)).m.approx_eq(&Mat2::identity(), 0.0));
        assert!(fiber_unitary(&FiberModel::new(0.0, 0.0, PI)).m.approx_eq(&hwp(0.0).m, 1e-15));
        // linear axes reproduce the waveplate family
        let f = FiberModel::new(0.3, 0.0, PI / 2.0);
        assert!(f.unitary().m.approx_eq(&qwp(0.3).m, 1e-15));
        assert_eq!(FiberModel::new(0.0, 0.0, -1.0).delta, 2.0 * PI - 1.0);
    }

    #[test]
    fn fiber_covers_su2() {
        // any SU(2) element is cos·1 − i·sin·(n·σ); read off (α, β, δ) and rebuild
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = random_unitary2(&mut rng);
            let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
            let su = u.scale(Complex::from_polar(1.0, -det.arg() / 2.0));
            let co = su.trace().re / 2.0;
            let n1s = -su[(0, 0)].im;
            let n2s = -(su[(0, 1)].im + su[(1, 0)].im) / 2.0;
            let n3s = (su[(1, 0)].re - su[(0, 1)].re) / 2.0;
            let s = (n1s * n1s + n2s * n2s + n3s * n3s).sqrt();
            let delta = 2.0 * s.atan2(co);
            let beta = 0.5 * (n3s / s).asin();
            let alpha = 0.5 * n2s.atan2(n1s);
            let f = FiberModel::new(alpha, beta, delta).unitary();
            assert!(f.m.approx_eq(&su, 1e-12) || f.m.approx_eq(&(-su), 1e-12));
        }
    }

    proptest! {
        #[test]
        fn fiber_is_unitary(a in -4.0f64..4.0, b in -4.0f64..4.0, d in -7.0f64..7.0) {
            prop_assert!(FiberModel::new(a, b, d).unitary().is_unitary(1e-12));
        }

        #[test]
        fn trains_conserve_power(a in -4.0f64..4.0, b in -4.0f64..4.0, d in 0.0f64..6.3, th in -4.0f64..4.0, tq in -4.0f64..4.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let train = FiberModel::new(a, b, d).unitary().reversed().then(&qwp(tq)).then(&hwp(th));
            prop_assert!(train.is_unitary(1e-10));
            let v = Matrix::from_column([c(1.0, 0.0), c(re, im)]).normalized();
            let out = train.apply(&v);
            let total = out.entry(0).norm_sqr() + out.entry(1).norm_sqr();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
