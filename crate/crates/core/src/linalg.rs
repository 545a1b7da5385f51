//! Small dense complex linear algebra used by the channel and precoding code.
//!
//! Matrices are row-major. Only what the simulator needs is here: inner
//! products, a closed-form ULA array factor, and a Hermitian Cholesky solver
//! for the regularized Gram systems of RZF precoding.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type C<T> = Complex<T>;

/// Hermitian inner product `<a, b> = sum conj(a_k) b_k`.
#[inline]
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = C::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Bilinear product `sum a_k b_k` (row times column, no conjugation).
#[inline]
pub fn dotu<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = C::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm_sqr<T: Real>(a: &[C<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[C<T>]) -> T {
    norm_sqr(a).sqrt()
}

/// Normalized array factor `(1/n) sum_{k<n} exp(j k x)`.
///
/// Equals `a(phi)^* a(theta)` for half-wavelength ULA responses when
/// `x = pi (sin theta - sin phi)`. Evaluated in closed form.
#[inline]
pub fn array_factor<T: Real>(n: usize, x: T) -> C<T> {
    let two_pi = T::TAU();
    let half = T::lit(0.5);
    let nf = T::from_usize_lossy(n);
    // 2*pi periodic; reduce to [-pi, pi].
    let xr = x - two_pi * (x / two_pi).round();
    let s = (xr * half).sin();
    let phase = C::from_polar(T::one(), (nf - T::one()) * xr * half);
    if s == T::zero() {
        return phase;
    }
    let mag = (nf * xr * half).sin() / (nf * s);
    phase * mag
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::new(T::zero(), T::zero()); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut C<T> {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[C<T>]) -> Result<Vec<C<T>>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dotu(self.row(r), v)).collect())
    }

    /// `w^* self` as a row vector.
    pub fn left_mul_conj(&self, w: &[C<T>]) -> Result<Vec<C<T>>> {
        if w.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: w.len(),
            });
        }
        let mut out = vec![C::new(T::zero(), T::zero()); self.cols];
        for (r, wr) in w.iter().enumerate() {
            let wc = wr.conj();
            for (o, h) in out.iter_mut().zip(self.row(r)) {
                *o += wc * h;
            }
        }
        Ok(out)
    }

    pub fn frobenius_sqr(&self) -> T {
        norm_sqr(&self.data)
    }
}

/// Cholesky factor `A = L L^*` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<C<T>>,
}

impl<T: Real> Cholesky<T> {
    /// Factors the row-major `n x n` Hermitian matrix `a` (lower triangle is read).
    pub fn new(a: &[C<T>], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let mut l = vec![C::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            let mut d = a[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[j * n + j] = C::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C<T>]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // L y = b
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i].re;
        }
        // L^* x = y
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i].conj() * b[k];
            }
            b[i] = s / self.l[i * n + i].re;
        }
    }
}
