//! Real scalar abstraction shared by plain evaluation and the autodiff tape,
//! plus a minimal complex type built on top of it.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    /// Square root; the derivative at zero is taken as zero.
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// `max(0, x)`, subgradient zero at the kink.
    fn hinge(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn log2(self) -> Self {
        self.ln() * std::f64::consts::LOG2_E
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn hinge(self) -> Self {
        self.max(0.0)
    }
}

/// Sum of a slice of scalars; zero for an empty slice.
pub fn sum<S: Scalar>(xs: impl IntoIterator<Item = S>) -> S {
    xs.into_iter().fold(S::zero(), |a, b| a + b)
}

/// Index of the smallest value, first index on ties. `None` for empty input.
pub fn argmin<S: Scalar>(xs: &[S]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in xs.iter().enumerate() {
        let v = x.value();
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cx<S = f64> {
    pub re: S,
    pub im: S,
}

impl<S: Scalar> Cx<S> {
    pub fn new(re: S, im: S) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self { re: S::zero(), im: S::zero() }
    }

    pub fn from_real(re: S) -> Self {
        Self { re, im: S::zero() }
    }

    /// `e^{j phase}`.
    pub fn cis(phase: S) -> Self {
        Self { re: phase.cos(), im: phase.sin() }
    }

    pub fn constant(c: Cx<f64>) -> Self {
        Self { re: S::constant(c.re), im: S::constant(c.im) }
    }

    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> S {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, k: S) -> Self {
        Self { re: self.re * k, im: self.im * k }
    }

    pub fn scale_f(self, k: f64) -> Self {
        Self { re: self.re * k, im: self.im * k }
    }

    /// `conj(self) * rhs` without materialising the conjugate.
    pub fn conj_mul(self, rhs: Self) -> Self {
        Self { re: self.re * rhs.re + self.im * rhs.im, im: self.re * rhs.im - self.im * rhs.re }
    }

    /// Product with a constant complex number.
    pub fn mul_c(self, c: Cx<f64>) -> Self {
        if c.im == 0.0 {
            return self.scale_f(c.re);
        }
        Self { re: self.re * c.re - self.im * c.im, im: self.re * c.im + self.im * c.re }
    }

    pub fn value(self) -> Cx<f64> {
        Cx { re: self.re.value(), im: self.im.value() }
    }
}

impl Cx<f64> {
    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl<S: Scalar> Add for Cx<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl<S: Scalar> AddAssign for Cx<S> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar> Sub for Cx<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

impl<S: Scalar> Mul for Cx<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self { re: self.re * rhs.re - self.im * rhs.im, im: self.re * rhs.im + self.im * rhs.re }
    }
}

impl<S: Scalar> Neg for Cx<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, im: -self.im }
    }
}

/// `a^H b = sum_i conj(a_i) b_i`.
pub fn inner<S: Scalar>(a: &[Cx<S>], b: &[Cx<S>]) -> Cx<S> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Cx::zero(), |acc, (x, y)| acc + x.conj_mul(*y))
}

pub fn norm_sqr<S: Scalar>(a: &[Cx<S>]) -> S {
    sum(a.iter().map(|x| x.norm_sqr()))
}
