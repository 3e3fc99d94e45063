use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, cis, Mat2, Matrix, Vec2};
use crate::scalar::Real;

/// Superposition phase defining the σx readout basis, `(|0⟩ ± e^{iφ}|1⟩)/√2`.
pub const PHI_X: f64 = std::f64::consts::FRAC_PI_4;
/// Superposition phase defining the σy readout basis.
pub const PHI_Y: f64 = -std::f64::consts::FRAC_PI_4;

/// Index into the single-qubit operator basis {1, σx, σy, σz}.
///
/// σx and σy are the equatorial operators with eigenstates
/// `(|0⟩ ± e^{iφ}|1⟩)/√2` at φ = +π/4 and φ = −π/4 respectively, which is the
/// convention the waveplate settings and the atomic Δφ scan are expressed in.
/// They are traceless, Hermitian, unitary and anticommute, but the triple
/// (σx, σy, σz) is left handed: `σx·σy = −i·σz`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliLabel {
    #[serde(alias = "i", alias = "1")]
    Identity,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 4] = [PauliLabel::Identity, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
    pub const MEASURABLE: [PauliLabel; 3] = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];

    pub fn index(self) -> usize {
        match self {
            PauliLabel::Identity => 0,
            PauliLabel::X => 1,
            PauliLabel::Y => 2,
            PauliLabel::Z => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        match self {
            PauliLabel::Identity => 'i',
            PauliLabel::X => 'x',
            PauliLabel::Y => 'y',
            PauliLabel::Z => 'z',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        match ch.to_ascii_lowercase() {
            'i' | '1' => Some(PauliLabel::Identity),
            'x' => Some(PauliLabel::X),
            'y' => Some(PauliLabel::Y),
            'z' => Some(PauliLabel::Z),
            _ => None,
        }
    }

    /// Equatorial phase of the basis, `None` for σz and the identity.
    pub fn equatorial_phase(self) -> Option<f64> {
        match self {
            PauliLabel::X => Some(PHI_X),
            PauliLabel::Y => Some(PHI_Y),
            _ => None,
        }
    }

    pub fn matrix<T: Real>(self) -> Mat2<T> {
        match self {
            PauliLabel::Identity => Mat2::identity(),
            PauliLabel::X => equatorial(T::lit(PHI_X)),
            PauliLabel::Y => equatorial(T::lit(PHI_Y)),
            PauliLabel::Z => Mat2::from_diag([T::one(), -T::one()]),
        }
    }

    /// Eigenvector for outcome `+1` (`positive = true`) or `−1`.
    pub fn eigenstate<T: Real>(self, positive: bool) -> Vec2<T> {
        match self {
            PauliLabel::Identity | PauliLabel::Z => {
                if positive {
                    Matrix::from_column([Complex::one(), Complex::zero()])
                } else {
                    Matrix::from_column([Complex::zero(), Complex::one()])
                }
            }
            PauliLabel::X | PauliLabel::Y => {
                let phi = T::lit(self.equatorial_phase().unwrap_or(0.0));
                equatorial_eigenstate(phi, positive)
            }
        }
    }

    /// Projector `(1 ± σ)/2` onto the `±1` outcome.
    pub fn projector<T: Real>(self, positive: bool) -> Mat2<T> {
        projector_of(&self.matrix(), positive)
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// `cos φ·σx + sin φ·σy` in the textbook Pauli convention.
pub fn equatorial<T: Real>(phi: T) -> Mat2<T> {
    Matrix::from_rows([[Complex::zero(), cis(-phi)], [cis(phi), Complex::zero()]])
}

/// `(|0⟩ ± e^{iφ}|1⟩)/√2`
pub fn equatorial_eigenstate<T: Real>(phi: T, positive: bool) -> Vec2<T> {
    let s = T::FRAC_1_SQRT_2();
    let sign = if positive { s } else { -s };
    Matrix::from_column([c(s, T::zero()), cis(phi).scale(sign)])
}

pub fn projector_of<T: Real>(op: &Mat2<T>, positive: bool) -> Mat2<T> {
    let half = T::lit(0.5);
    let i = Mat2::identity();
    if positive {
        (i + *op).scale_re(half)
    } else {
        (i - *op).scale_re(half)
    }
}
