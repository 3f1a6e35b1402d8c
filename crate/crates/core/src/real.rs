//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! dual numbers.
//!
//! Every numeric kernel on the forward path (manifold maps, layers, the
//! link decoder) is written once against [`Real`]. Instantiating it with
//! [`Dual`] propagates `N` directional derivatives alongside the value,
//! which is how Jacobians and loss gradients are computed exactly.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Below this squared argument the `f(x)/x`-style helpers switch to a
/// Taylor polynomial in `x²`.
const SERIES_CUTOFF: f64 = 1e-3;

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn atanh(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    /// `max(x, 0)` with subgradient 0 at the kink.
    fn relu(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::zero()
        }
    }

    /// `ln(1 + e^x)` without overflow.
    fn softplus(self) -> Self {
        let pos = self.relu();
        pos + (-self.abs()).exp().ln_1p()
    }

    fn ln_1p(self) -> Self {
        (self + 1.0).ln()
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn atanh(self) -> Self {
        f64::atanh(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

/// Forward-mode dual number carrying `N` tangent directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub du: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(re: f64) -> Self {
        Self { re, du: [0.0; N] }
    }

    /// Value `re` seeded with a unit tangent in direction `k`.
    pub fn variable(re: f64, k: usize) -> Self {
        let mut du = [0.0; N];
        du[k] = 1.0;
        Self { re, du }
    }

    #[inline]
    fn chain(self, re: f64, slope: f64) -> Self {
        let mut du = self.du;
        for d in du.iter_mut() {
            *d *= slope;
        }
        Self { re, du }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = self.du[k] * rhs.re + self.re * rhs.du[k];
        }
        Self { re: self.re * rhs.re, du }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = (self.du[k] - re * rhs.du[k]) * inv;
        }
        Self { re, du }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.re, -1.0)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> MulAssign for Dual<N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.chain(self.re * rhs, rhs)
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.chain(self.re / rhs, 1.0 / rhs)
    }
}

impl<const N: usize> Real for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn sinh(self) -> Self {
        self.chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn atanh(self) -> Self {
        self.chain(self.re.atanh(), 1.0 / (1.0 - self.re * self.re))
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.re * self.re + x.re * x.re;
        let re = self.re.atan2(x.re);
        let mut du = [0.0; N];
        for k in 0..N {
            du[k] = (x.re * self.du[k] - self.re * x.du[k]) / r2;
        }
        Self { re, du }
    }
    fn ln_1p(self) -> Self {
        self.chain(self.re.ln_1p(), 1.0 / (1.0 + self.re))
    }
}

/// Horner evaluation of `Σ c_k t^k`.
fn poly<T: Real>(t: T, coeffs: &[f64]) -> T {
    let mut acc = T::cst(*coeffs.last().unwrap());
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc * t + c;
    }
    acc
}

/// `sin(x)/x` as a function of `x2 = x²`.
pub fn sinc_sq<T: Real>(x2: T) -> T {
    if x2.value().abs() < SERIES_CUTOFF {
        poly(x2, &[1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362_880.0])
    } else {
        let x = x2.sqrt();
        x.sin() / x
    }
}

/// `sinh(x)/x` as a function of `x2 = x²`.
pub fn sinhc_sq<T: Real>(x2: T) -> T {
    if x2.value().abs() < SERIES_CUTOFF {
        poly(x2, &[1.0, 1.0 / 6.0, 1.0 / 120.0, 1.0 / 5040.0, 1.0 / 362_880.0])
    } else {
        let x = x2.sqrt();
        x.sinh() / x
    }
}

/// `tanh(x)/x` as a function of `x2 = x²`.
pub fn tanhc_sq<T: Real>(x2: T) -> T {
    if x2.value().abs() < SERIES_CUTOFF {
        poly(
            x2,
            &[1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0],
        )
    } else {
        let x = x2.sqrt();
        x.tanh() / x
    }
}

/// `artanh(x)/x` as a function of `x2 = x²`, for `0 ≤ x < 1`.
pub fn artanhc_sq<T: Real>(x2: T) -> T {
    if x2.value().abs() < SERIES_CUTOFF {
        poly(x2, &[1.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0, 1.0 / 9.0])
    } else {
        let x = x2.sqrt();
        x.atanh() / x
    }
}

/// `cos(x)` as a function of `x2 = x²`.
pub fn cos_sq<T: Real>(x2: T) -> T {
    if x2.value().abs() < SERIES_CUTOFF {
        poly(
            x2,
            &[1.0, -0.5, 1.0 / 24.0, -1.0 / 720.0, 1.0 / 40_320.0, -1.0 / 3_628_800.0],
        )
    } else {
        x2.sqrt().cos()
    }
}

/// `atan2(s, c)/s` as a function of `s2 = s²` (the angle over its sine).
/// Used by the sphere logarithm, where `s = sin θ` and `c = cos θ`.
pub fn angle_over_sin_sq<T: Real>(s2: T, c: T) -> T {
    if s2.value().abs() < SERIES_CUTOFF && c.value() > 0.0 {
        // asin(s)/s, valid on the near hemisphere
        poly(
            s2,
            &[1.0, 1.0 / 6.0, 3.0 / 40.0, 5.0 / 112.0, 35.0 / 1152.0],
        )
    } else {
        let s = s2.sqrt();
        s.atan2(c) / s
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn dual_arithmetic_matches_hand_derivatives() {
        let x = Dual::<2>::variable(0.7, 0);
        let y = Dual::<2>::variable(-1.3, 1);
        let f = x * y / (x + 2.0) - y.sin();
        let dfdx = y.re * 2.0 / (x.re + 2.0).powi(2);
        let dfdy = x.re / (x.re + 2.0) - y.re.cos();
        assert!((f.du[0] - dfdx).abs() < 1e-14);
        assert!((f.du[1] - dfdy).abs() < 1e-14);
    }

    #[test]
    fn transcendental_rules_agree_with_finite_differences() {
        let fns: Vec<(fn(Dual<1>) -> Dual<1>, fn(f64) -> f64)> = vec![
            (|x| x.exp(), f64::exp),
            (|x| x.ln(), f64::ln),
            (|x| x.sinh(), f64::sinh),
            (|x| x.cosh(), f64::cosh),
            (|x| x.tanh(), f64::tanh),
            (|x| x.atanh(), f64::atanh),
            (|x| x.sqrt(), f64::sqrt),
            (|x| x.softplus(), |x| (1.0 + x.exp()).ln()),
        ];
        for (d, f) in fns {
            let x0 = 0.4;
            let got = d(Dual::variable(x0, 0)).du[0];
            assert!((got - fd(f, x0)).abs() < 1e-8, "{got}");
        }
    }

    #[test]
    fn atan2_derivative() {
        let y = Dual::<2>::variable(0.3, 0);
        let x = Dual::<2>::variable(-0.8, 1);
        let a = y.atan2(x);
        assert!((a.du[0] - fd(|t| t.atan2(-0.8), 0.3)).abs() < 1e-8);
        assert!((a.du[1] - fd(|t| 0.3f64.atan2(t), -0.8)).abs() < 1e-8);
    }

    #[test]
    fn series_helpers_are_continuous_across_the_cutoff() {
        for &x2 in &[SERIES_CUTOFF * 0.999_999, SERIES_CUTOFF * 1.000_001] {
            let x = f64::sqrt(x2);
            assert!((sinc_sq(x2) - x.sin() / x).abs() < 1e-15);
            assert!((sinhc_sq(x2) - x.sinh() / x).abs() < 1e-15);
            assert!((tanhc_sq(x2) - x.tanh() / x).abs() < 1e-15);
            assert!((artanhc_sq(x2) - x.atanh() / x).abs() < 1e-15);
            assert!((cos_sq(x2) - x.cos()).abs() < 1e-15);
            assert!((angle_over_sin_sq(x2, (1.0 - x2).sqrt()) - x.asin() / x).abs() < 1e-14);
        }
        assert_eq!(sinhc_sq(0.0), 1.0);
        assert_eq!(sinc_sq(0.0), 1.0);
    }

    #[test]
    fn series_helpers_carry_derivatives_through_zero() {
        // d/dx2 of sinh(x)/x at 0 is 1/6
        let d = sinhc_sq(Dual::<1>::variable(0.0, 0));
        assert!((d.du[0] - 1.0 / 6.0).abs() < 1e-15);
        let d = tanhc_sq(Dual::<1>::variable(0.0, 0));
        assert!((d.du[0] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let z = Dual::<1>::variable(0.0, 0).relu();
        assert_eq!(z.du[0], 0.0);
        let p = Dual::<1>::variable(1e-300, 0).relu();
        assert_eq!(p.du[0], 1.0);
    }
}
