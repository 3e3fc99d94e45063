//! Small dense complex matrices with compile-time dimensions.
//!
//! Only the shapes needed for one and two qubits (2×2, 4×4, 2×1, 4×1) are
//! used in practice, so storage is a plain nested array and every operation is
//! allocation free.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

/// Dense `R`×`C` complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<T, const R: usize, const C: usize> {
    data: [[Complex<T>; C]; R],
}

pub type Mat2<T> = Matrix<T, 2, 2>;
pub type Mat4<T> = Matrix<T, 4, 4>;
pub type Vec2<T> = Matrix<T, 2, 1>;
pub type Vec4<T> = Matrix<T, 4, 1>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// `exp(i·phi)`
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

impl<T: Real, const R: usize, const C: usize> Matrix<T, R, C> {
    pub fn zeros() -> Self {
        Self {
            data: [[Complex::zero(); C]; R],
        }
    }

    pub fn from_rows(data: [[Complex<T>; C]; R]) -> Self {
        Self { data }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros();
        for r in 0..R {
            for col in 0..C {
                m.data[r][col] = f(r, col);
            }
        }
        m
    }

    pub const fn rows(&self) -> usize {
        R
    }

    pub const fn cols(&self) -> usize {
        C
    }

    pub fn rows_ref(&self) -> &[[Complex<T>; C]; R] {
        &self.data
    }

    pub fn adjoint(&self) -> Matrix<T, C, R> {
        Matrix::from_fn(|r, col| self.data[col][r].conj())
    }

    pub fn transpose(&self) -> Matrix<T, C, R> {
        Matrix::from_fn(|r, col| self.data[col][r])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|r, col| self.data[r][col].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::from_fn(|r, col| self.data[r][col] * s)
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut m = T::zero();
        for r in 0..R {
            for col in 0..C {
                m = m.max((self.data[r][col] - other.data[r][col]).norm());
            }
        }
        m
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data
            .iter()
            .flatten()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// `Tr(A† B)`, the Hilbert–Schmidt inner product.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let mut acc = Complex::zero();
        for r in 0..R {
            for col in 0..C {
                acc = acc + self.data[r][col].conj() * other.data[r][col];
            }
        }
        acc
    }

    pub fn cast<U: Real>(&self) -> Matrix<U, R, C> {
        Matrix::from_fn(|r, col| {
            let z = self.data[r][col];
            Complex::new(
                U::from_f64(z.re.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()),
                U::from_f64(z.im.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()),
            )
        })
    }
}

impl<T: Real, const N: usize> Matrix<T, N, N> {
    pub fn identity() -> Self {
        Self::from_fn(|r, col| if r == col { Complex::one() } else { Complex::zero() })
    }

    pub fn from_diag(d: [T; N]) -> Self {
        Self::from_fn(|r, col| if r == col { Complex::new(d[r], T::zero()) } else { Complex::zero() })
    }

    pub fn trace(&self) -> Complex<T> {
        (0..N).fold(Complex::zero(), |acc, i| acc + self.data[i][i])
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|r, col| (self.data[r][col] + self.data[col][r].conj()).scale(half))
    }

    /// Largest entrywise modulus of `A - A†`.
    pub fn hermiticity_deviation(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    /// Largest entrywise modulus of `U†U - I`.
    pub fn unitarity_deviation(&self) -> T {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Eigen-decomposition of the Hermitian part of the matrix.
    pub fn eigh(&self) -> Eigh<T, N> {
        eigh(self)
    }
}

impl<T: Real, const N: usize> Matrix<T, N, 1> {
    pub fn from_column(v: [Complex<T>; N]) -> Self {
        Self::from_fn(|r, _| v[r])
    }

    /// `⟨self|other⟩`
    pub fn dot(&self, other: &Self) -> Complex<T> {
        (0..N).fold(Complex::zero(), |acc, i| acc + self.data[i][0].conj() * other.data[i][0])
    }

    /// `|self⟩⟨self|`
    pub fn outer(&self) -> Matrix<T, N, N> {
        Matrix::from_fn(|r, col| self.data[r][0] * self.data[col][0].conj())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scale_re(T::one() / n)
    }

    pub fn entry(&self, i: usize) -> Complex<T> {
        self.data[i][0]
    }
}

impl<T, const R: usize, const C: usize> Index<(usize, usize)> for Matrix<T, R, C> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[r][c]
    }
}

impl<T, const R: usize, const C: usize> IndexMut<(usize, usize)> for Matrix<T, R, C> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[r][c]
    }
}

impl<T: Real, const R: usize, const K: usize, const C: usize> Mul<Matrix<T, K, C>> for Matrix<T, R, K> {
    type Output = Matrix<T, R, C>;
    fn mul(self, rhs: Matrix<T, K, C>) -> Matrix<T, R, C> {
        let mut out = Matrix::<T, R, C>::zeros();
        for r in 0..R {
            for k in 0..K {
                let a = self.data[r][k];
                if a.is_zero() {
                    continue;
                }
                for col in 0..C {
                    out.data[r][col] = out.data[r][col] + a * rhs.data[k][col];
                }
            }
        }
        out
    }
}

impl<T: Real, const R: usize, const C: usize> Add for Matrix<T, R, C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|r, c| self.data[r][c] + rhs.data[r][c])
    }
}

impl<T: Real, const R: usize, const C: usize> Sub for Matrix<T, R, C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|r, c| self.data[r][c] - rhs.data[r][c])
    }
}

impl<T: Real, const R: usize, const C: usize> Neg for Matrix<T, R, C> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_fn(|r, c| -self.data[r][c])
    }
}

/// Tensor product of two single-qubit operators, left factor first
/// (atom ⊗ photon throughout this crate).
pub fn kron<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat4<T> {
    Matrix::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// Tensor product of two single-qubit kets.
pub fn kron_vec<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> Vec4<T> {
    Matrix::from_fn(|r, _| a[(r / 2, 0)] * b[(r % 2, 0)])
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are ascending and
/// `vectors` holds the matching eigenvectors as columns.
#[derive(Clone, Copy, Debug)]
pub struct Eigh<T, const N: usize> {
    pub values: [T; N],
    pub vectors: Matrix<T, N, N>,
}

impl<T: Real, const N: usize> Eigh<T, N> {
    pub fn vector(&self, k: usize) -> Matrix<T, N, 1> {
        Matrix::from_fn(|r, _| self.vectors[(r, k)])
    }

    /// Rebuilds `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> Matrix<T, N, N> {
        let mut d = [T::zero(); N];
        for (k, v) in self.values.iter().enumerate() {
            d[k] = f(*v);
        }
        self.vectors * Matrix::from_diag(d) * self.vectors.adjoint()
    }
}

/// Cyclic complex Jacobi diagonalisation of the Hermitian part of `a`.
pub fn eigh<T: Real, const N: usize>(a: &Matrix<T, N, N>) -> Eigh<T, N> {
    let mut a = a.hermitian_part();
    let mut v = Matrix::<T, N, N>::identity();
    let scale = a.norm().max(T::min_positive_value());
    let eps = T::epsilon();

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..N {
            for q in (p + 1)..N {
                off = off + a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= eps * eps.sqrt() * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= eps * eps * scale {
                    continue;
                }
                // D = diag(1, e^{-iφ}) makes the (p,q) block real, then a real
                // Jacobi rotation annihilates it.
                let phase = apq.unscale(mag);
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (T::lit(2.0) * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                let mut j = Matrix::<T, N, N>::identity();
                j[(p, p)] = Complex::new(cs, T::zero());
                j[(p, q)] = Complex::new(sn, T::zero());
                j[(q, p)] = phase.conj().scale(-sn);
                j[(q, q)] = phase.conj().scale(cs);
                a = j.adjoint() * a * j;
                // keep the pivot block exactly Hermitian
                a[(p, q)] = Complex::zero();
                a[(q, p)] = Complex::zero();
                v = v * j;
            }
        }
    }

    let mut order: [usize; N] = [0; N];
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = [T::zero(); N];
    let mut vectors = Matrix::<T, N, N>::zeros();
    for (k, &src) in order.iter().enumerate() {
        values[k] = a[(src, src)].re;
        for r in 0..N {
            vectors[(r, k)] = v[(r, src)];
        }
    }
    Eigh { values, vectors }
}
