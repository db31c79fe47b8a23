//! Scalar abstraction shared by every numeric module.
//!
//! All math in this crate is written once over [`Real`], which is implemented
//! for `f32` and `f64`. Complex quantities use `num_complex::Complex<T>`, the
//! same type nalgebra uses for its complex `ComplexField` implementation.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable throughout the crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Cx<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `mag · e^{jθ}`.
#[inline]
pub(crate) fn polar<T: Real>(mag: T, theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(mag * c, mag * s)
}

#[inline]
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// `aᴴ b` over two equally long slices.
#[inline]
pub(crate) fn dotc<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
}

#[inline]
pub(crate) fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}

/// Replaces `m` by `(m + mᴴ) / 2`.
pub(crate) fn symmetrize<T: Real>(m: &mut CMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for c in 0..n {
        for r in c..n {
            let v = (m[(r, c)] + m[(c, r)].conj()).scale(half);
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
    }
}

/// Relative Frobenius distance `‖a - b‖_F / ‖b‖_F` (absolute when `b` is zero).
pub fn relative_frobenius<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > T::zero() {
        diff / base
    } else {
        diff
    }
}
