//! Hyper-dual numbers `a + b·ε₁ + c·ε₂ + d·ε₁ε₂` with `ε₁² = ε₂² = 0`.
//!
//! Evaluating `f(x + ε₁·u + ε₂·v)` yields `f(x)`, `∇f·u`, `∇f·v` and `uᵀ∇²f·v`
//! without truncation error. Comparisons look at the real part only.

use std::cmp::Ordering;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_traits::{Float, Num, NumCast, One, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, Default)]
pub struct HyperDual<T> {
    pub re: T,
    pub e1: T,
    pub e2: T,
    pub e12: T,
}

impl<T: Float> HyperDual<T> {
    pub fn new(re: T, e1: T, e2: T, e12: T) -> Self {
        Self { re, e1, e2, e12 }
    }

    pub fn constant(re: T) -> Self {
        Self::new(re, T::zero(), T::zero(), T::zero())
    }

    /// Variable seeded along both infinitesimal directions: the `e12` part of
    /// `f(x)` is then the second derivative.
    pub fn variable(re: T) -> Self {
        Self::new(re, T::one(), T::one(), T::zero())
    }

    /// Applies a unary function given its value and first two derivatives.
    #[inline]
    fn chain(self, f0: T, f1: T, f2: T) -> Self {
        Self {
            re: f0,
            e1: f1 * self.e1,
            e2: f1 * self.e2,
            e12: f1 * self.e12 + f2 * self.e1 * self.e2,
        }
    }

    fn is_constant(&self) -> bool {
        self.e1.is_zero() && self.e2.is_zero() && self.e12.is_zero()
    }
}

impl<T: Float> PartialEq for HyperDual<T> {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re
    }
}

impl<T: Float> PartialOrd for HyperDual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Float> Add for HyperDual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl<T: Float> Sub for HyperDual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl<T: Float> Mul for HyperDual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.e1 * o.re + self.re * o.e1,
            e2: self.e2 * o.re + self.re * o.e2,
            e12: self.e12 * o.re + self.e1 * o.e2 + self.e2 * o.e1 + self.re * o.e12,
        }
    }
}

impl<T: Float> Div for HyperDual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Float> Rem for HyperDual<T> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        let q = (self.re / o.re).trunc();
        Self::new(
            self.re % o.re,
            self.e1 - q * o.e1,
            self.e2 - q * o.e2,
            self.e12 - q * o.e12,
        )
    }
}

impl<T: Float> Neg for HyperDual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Float> $tr for HyperDual<T> {
            #[inline]
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl<T: Float> Zero for HyperDual<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.is_constant()
    }
}

impl<T: Float> One for HyperDual<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Float> Num for HyperDual<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<T: Float> ToPrimitive for HyperDual<T> {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.re.to_f64()
    }
}

impl<T: Float> NumCast for HyperDual<T> {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        <T as NumCast>::from(n).map(Self::constant)
    }
}

impl<T: Float> Float for HyperDual<T> {
    fn nan() -> Self {
        Self::constant(T::nan())
    }
    fn infinity() -> Self {
        Self::constant(T::infinity())
    }
    fn neg_infinity() -> Self {
        Self::constant(T::neg_infinity())
    }
    fn neg_zero() -> Self {
        Self::constant(T::neg_zero())
    }
    fn min_value() -> Self {
        Self::constant(T::min_value())
    }
    fn min_positive_value() -> Self {
        Self::constant(T::min_positive_value())
    }
    fn max_value() -> Self {
        Self::constant(T::max_value())
    }
    fn is_nan(self) -> bool {
        self.re.is_nan() || self.e1.is_nan() || self.e2.is_nan() || self.e12.is_nan()
    }
    fn is_infinite(self) -> bool {
        !self.is_nan()
            && (self.re.is_infinite()
                || self.e1.is_infinite()
                || self.e2.is_infinite()
                || self.e12.is_infinite())
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.e1.is_finite() && self.e2.is_finite() && self.e12.is_finite()
    }
    fn is_normal(self) -> bool {
        self.re.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.re.classify()
    }
    fn floor(self) -> Self {
        Self::constant(self.re.floor())
    }
    fn ceil(self) -> Self {
        Self::constant(self.re.ceil())
    }
    fn round(self) -> Self {
        Self::constant(self.re.round())
    }
    fn trunc(self) -> Self {
        Self::constant(self.re.trunc())
    }
    fn fract(self) -> Self {
        Self::new(self.re.fract(), self.e1, self.e2, self.e12)
    }
    fn abs(self) -> Self {
        if self.re < T::zero() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::constant(self.re.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.re.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.re.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        let r = self.re.recip();
        self.chain(r, -r * r, (r + r) * r * r)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let nf = T::from(n).unwrap();
                let p2 = self.re.powi(n - 2);
                let p1 = p2 * self.re;
                self.chain(p1 * self.re, nf * p1, nf * (nf - T::one()) * p2)
            }
        }
    }
    fn powf(self, n: Self) -> Self {
        if n.is_constant() {
            let e = n.re;
            let p2 = self.re.powf(e - T::one() - T::one());
            let p1 = self.re.powf(e - T::one());
            self.chain(self.re.powf(e), e * p1, e * (e - T::one()) * p2)
        } else {
            (n * self.ln()).exp()
        }
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let half = T::from(0.5).unwrap();
        let d1 = half / s;
        self.chain(s, d1, -d1 * half / self.re)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        let l = T::from(std::f64::consts::LN_2).unwrap();
        self.chain(e, e * l, e * l * l)
    }
    fn ln(self) -> Self {
        let r = self.re.recip();
        self.chain(self.re.ln(), r, -r * r)
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.ln() / Self::constant(T::from(std::f64::consts::LN_2).unwrap())
    }
    fn log10(self) -> Self {
        self.ln() / Self::constant(T::from(std::f64::consts::LN_10).unwrap())
    }
    fn max(self, o: Self) -> Self {
        if o.re > self.re || self.re.is_nan() {
            o
        } else {
            self
        }
    }
    fn min(self, o: Self) -> Self {
        if o.re < self.re || self.re.is_nan() {
            o
        } else {
            self
        }
    }
    fn abs_sub(self, o: Self) -> Self {
        if self.re > o.re {
            self - o
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        let third = T::from(1.0 / 3.0).unwrap();
        let d1 = third * c / self.re;
        let d2 = -T::from(2.0 / 3.0).unwrap() * d1 / self.re;
        self.chain(c, d1, d2)
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt()
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        let d1 = T::one() + t * t;
        self.chain(t, d1, (t + t) * d1)
    }
    fn asin(self) -> Self {
        let q = T::one() - self.re * self.re;
        let d1 = q.sqrt().recip();
        self.chain(self.re.asin(), d1, self.re * d1 / q)
    }
    fn acos(self) -> Self {
        let q = T::one() - self.re * self.re;
        let d1 = q.sqrt().recip();
        self.chain(self.re.acos(), -d1, -self.re * d1 / q)
    }
    fn atan(self) -> Self {
        let q = (T::one() + self.re * self.re).recip();
        self.chain(self.re.atan(), q, -(self.re + self.re) * q * q)
    }
    fn atan2(self, o: Self) -> Self {
        // atan2 differs from atan(y/x) or -atan(x/y) by a piecewise constant
        let base = if o.re.abs() >= self.re.abs() {
            (self / o).atan()
        } else {
            -(o / self).atan()
        };
        Self::new(self.re.atan2(o.re), base.e1, base.e2, base.e12)
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        let e = self.re.exp();
        self.chain(self.re.exp_m1(), e, e)
    }
    fn ln_1p(self) -> Self {
        let r = (T::one() + self.re).recip();
        self.chain(self.re.ln_1p(), r, -r * r)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.re.sinh(), self.re.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.re.sinh(), self.re.cosh());
        self.chain(c, s, c)
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let d1 = T::one() - t * t;
        self.chain(t, d1, -(t + t) * d1)
    }
    fn asinh(self) -> Self {
        let q = T::one() + self.re * self.re;
        let d1 = q.sqrt().recip();
        self.chain(self.re.asinh(), d1, -self.re * d1 / q)
    }
    fn acosh(self) -> Self {
        let q = self.re * self.re - T::one();
        let d1 = q.sqrt().recip();
        self.chain(self.re.acosh(), d1, -self.re * d1 / q)
    }
    fn atanh(self) -> Self {
        let q = (T::one() - self.re * self.re).recip();
        self.chain(self.re.atanh(), q, (self.re + self.re) * q * q)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
}


/// Value, gradient and Hessian (row-major) of `f` at `x`, exact up to rounding.
pub fn gradient_and_hessian<T: Float>(
    f: impl Fn(&[HyperDual<T>]) -> HyperDual<T>,
    x: &[T],
) -> (T, Vec<T>, Vec<T>) {
    let n = x.len();
    let mut g = vec![T::zero(); n];
    let mut h = vec![T::zero(); n * n];
    let mut value = T::zero();
    let mut args: Vec<HyperDual<T>> = x.iter().map(|v| HyperDual::constant(*v)).collect();
    for i in 0..n {
        for j in i..n {
            args[i].e1 = T::one();
            args[j].e2 = T::one();
            let y = f(&args);
            args[i].e1 = T::zero();
            args[j].e2 = T::zero();
            value = y.re;
            if i == j {
                g[i] = y.e1;
            }
            h[i * n + j] = y.e12;
            h[j * n + i] = y.e12;
        }
    }
    if n == 0 {
        value = f(&args).re;
    }
    (value, g, h)
}

/// Value and gradient of `f` at `x` (one evaluation per coordinate).
pub fn gradient<T: Float>(f: impl Fn(&[HyperDual<T>]) -> HyperDual<T>, x: &[T]) -> (T, Vec<T>) {
    let mut args: Vec<HyperDual<T>> = x.iter().map(|v| HyperDual::constant(*v)).collect();
    let mut g = Vec::with_capacity(x.len());
    let mut value = T::zero();
    for i in 0..x.len() {
        args[i].e1 = T::one();
        let y = f(&args);
        args[i].e1 = T::zero();
        value = y.re;
        g.push(y.e1);
    }
    if x.is_empty() {
        value = f(&args).re;
    }
    (value, g)
}
