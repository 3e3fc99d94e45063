use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::linalg::{kron, Mat2, Mat4, Matrix, Vec4};
use crate::quantum::{PauliLabel, QuantumError};
use crate::scalar::Real;

/// Computational basis indices of the atom ⊗ photon register.
///
/// Atom: `↑ ≡ |g+⟩` (bright after the hyperfine mapping) is index 0,
/// `↓ ≡ |0⟩` (mapped from `|g−⟩`, dark) is index 1. Photon: `H` is index 0
/// (σz eigenvalue +1, the σ− mode before the waveplates), `V` is index 1
/// (σ+ mode). Register index = 2·atom + photon.
pub mod basis {
    pub const UP_H: usize = 0;
    pub const UP_V: usize = 1;
    pub const DOWN_H: usize = 2;
    pub const DOWN_V: usize = 3;
}

/// Density matrix of the atom ⊗ photon pair.
///
/// Hermiticity and unit trace are checked on construction; positivity is not,
/// since estimators can produce non-physical candidates. Use
/// [`TwoQubitState::is_physical`] to check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitState<T> {
    rho: Mat4<T>,
}

/// Result of a physicality check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityReport<T> {
    pub physical: bool,
    pub min_eigenvalue: T,
    pub trace_deviation: T,
    pub hermiticity_deviation: T,
}

/// `(|↑V⟩ − |↓H⟩)/√2`
pub fn bell_target_ket<T: Real>() -> Vec4<T> {
    let s = T::FRAC_1_SQRT_2();
    let mut v = Vec4::zeros();
    v[(basis::UP_V, 0)] = Complex::new(s, T::zero());
    v[(basis::DOWN_H, 0)] = Complex::new(-s, T::zero());
    v
}

impl<T: Real> TwoQubitState<T> {
    pub fn new(rho: Mat4<T>) -> Result<Self, QuantumError> {
        Self::with_tolerance(rho, T::construction_tol())
    }

    pub fn with_tolerance(rho: Mat4<T>, tol: T) -> Result<Self, QuantumError> {
        let herm = rho.hermiticity_deviation();
        if herm > tol {
            return Err(QuantumError::NotHermitian(to_f64(herm)));
        }
        let tr = rho.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(QuantumError::TraceNotOne(to_f64(tr.re)));
        }
        Ok(Self {
            rho: rho.hermitian_part(),
        })
    }

    /// Hermitian part of `m` scaled to unit trace.
    pub fn normalized_from(m: &Mat4<T>) -> Result<Self, QuantumError> {
        let h = m.hermitian_part();
        let tr = h.trace().re;
        if !(tr.abs() > T::epsilon()) {
            return Err(QuantumError::TraceNotOne(to_f64(tr)));
        }
        Self::new(h.scale_re(T::one() / tr))
    }

    pub fn from_pure(psi: &Vec4<T>) -> Result<Self, QuantumError> {
        let n = psi.norm();
        if (n - T::one()).abs() > T::algebraic_tol() {
            return Err(QuantumError::NotNormalized(to_f64(n)));
        }
        Self::new(psi.outer())
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Mat4::identity().scale_re(T::lit(0.25)),
        }
    }

    /// The ideal atom–photon Bell state after the π-pulse mapping and the
    /// waveplate rotation.
    pub fn bell_target() -> Self {
        Self {
            rho: bell_target_ket::<T>().outer(),
        }
    }

    /// `w·self + (1 − w)·other`
    pub fn mix(&self, other: &Self, w: T) -> Self {
        Self {
            rho: self.rho.scale_re(w) + other.rho.scale_re(T::one() - w),
        }
    }

    pub fn matrix(&self) -> &Mat4<T> {
        &self.rho
    }

    pub fn into_matrix(self) -> Mat4<T> {
        self.rho
    }

    /// `Tr(ρ · σi ⊗ σj)`
    pub fn pauli_expectation(&self, i: PauliLabel, j: PauliLabel) -> T {
        self.expectation(&kron(&i.matrix(), &j.matrix()))
    }

    /// `Re Tr(ρ·O)` for a Hermitian observable `O`.
    pub fn expectation(&self, op: &Mat4<T>) -> T {
        let mut acc = Complex::zero();
        for r in 0..4 {
            for k in 0..4 {
                acc = acc + self.rho[(r, k)] * op[(k, r)];
            }
        }
        acc.re
    }

    /// All 16 joint expectations `S[i][j]`.
    pub fn correlation_table(&self) -> [[T; 4]; 4] {
        let mut s = [[T::zero(); 4]; 4];
        for i in PauliLabel::ALL {
            for j in PauliLabel::ALL {
                s[i.index()][j.index()] = self.pauli_expectation(i, j);
            }
        }
        s
    }

    /// Diagonal of ρ, i.e. the probabilities of the four register states.
    pub fn populations(&self) -> [T; 4] {
        [self.rho[(0, 0)].re, self.rho[(1, 1)].re, self.rho[(2, 2)].re, self.rho[(3, 3)].re]
    }

    pub fn purity(&self) -> T {
        self.rho.inner(&self.rho).re
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized ket.
    pub fn fidelity_with_pure(&self, psi: &Vec4<T>) -> T {
        (psi.adjoint() * self.rho * *psi)[(0, 0)].re
    }

    pub fn bell_fidelity(&self) -> T {
        self.fidelity_with_pure(&bell_target_ket())
    }

    /// `(Ua ⊗ Up) ρ (Ua ⊗ Up)†`
    pub fn apply_local_unitaries(&self, u_atom: &Mat2<T>, u_photon: &Mat2<T>) -> Result<Self, QuantumError> {
        let tol = T::algebraic_tol();
        for u in [u_atom, u_photon] {
            let dev = u.unitarity_deviation();
            if dev > tol {
                return Err(QuantumError::NotUnitary(to_f64(dev)));
            }
        }
        let u = kron(u_atom, u_photon);
        Ok(Self {
            rho: (u * self.rho * u.adjoint()).hermitian_part(),
        })
    }

    /// `U ρ U†` for a two-qubit unitary that is trusted by the caller.
    pub fn conjugate_by(&self, u: &Mat4<T>) -> Self {
        Self {
            rho: (*u * self.rho * u.adjoint()).hermitian_part(),
        }
    }

    pub fn eigenvalues(&self) -> [T; 4] {
        self.rho.eigh().values
    }

    pub fn is_physical(&self, tol: T) -> PhysicalityReport<T> {
        check_physical(&self.rho, tol)
    }

    /// `½ Σ|λ(ρ − σ)|`
    pub fn trace_distance(&self, other: &Self) -> T {
        let d = self.rho - other.rho;
        d.eigh().values.iter().fold(T::zero(), |acc, v| acc + v.abs()) * T::lit(0.5)
    }

    pub fn cast<U: Real>(&self) -> TwoQubitState<U> {
        TwoQubitState { rho: self.rho.cast() }
    }
}

/// Physicality diagnostics for any 4×4 candidate, Hermitian or not.
pub fn check_physical<T: Real>(m: &Mat4<T>, tol: T) -> PhysicalityReport<T> {
    let herm = m.hermiticity_deviation();
    let tr = m.trace();
    let trace_dev = ((tr.re - T::one()).powi(2) + tr.im.powi(2)).sqrt();
    let min_ev = m.eigh().values[0];
    PhysicalityReport {
        physical: herm <= tol && trace_dev <= tol && min_ev >= -tol,
        min_eigenvalue: min_ev,
        trace_deviation: trace_dev,
        hermiticity_deviation: herm,
    }
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Builds a 4×4 matrix from real entries, handy for constructed examples.
pub fn real_matrix<T: Real>(rows: [[f64; 4]; 4]) -> Mat4<T> {
    Matrix::from_fn(|r, col| Complex::new(T::lit(rows[r][col]), T::zero()))
}
