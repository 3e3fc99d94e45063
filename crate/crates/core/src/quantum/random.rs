//! Random states and unitaries for property tests and sampling studies.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Mat2, Mat4, Matrix};
use crate::quantum::TwoQubitState;

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Hilbert–Schmidt style random density matrix `G G† / Tr(G G†)` with a
/// 4×`rank` complex Ginibre matrix `G`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> TwoQubitState<f64> {
    let rank = rank.clamp(1, 4);
    let g = Mat4::<f64>::from_fn(|_, col| if col < rank { gaussian_complex(rng) } else { Complex::new(0.0, 0.0) });
    let a = g * g.adjoint();
    TwoQubitState::normalized_from(&a).expect("Ginibre product has positive trace")
}

/// Haar-random 2×2 unitary via QR of a Ginibre matrix.
pub fn random_unitary2<R: Rng + ?Sized>(rng: &mut R) -> Mat2<f64> {
    let a = gaussian_complex(rng);
    let b = gaussian_complex(rng);
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let phase = Complex::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    Matrix::from_rows([[a, -b.conj() * phase], [b, a.conj() * phase]])
}
