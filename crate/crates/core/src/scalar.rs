//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// Floating-point scalar used throughout the crate (`f32` or `f64`).
///
/// Sampling hooks live on the trait so that the Monte Carlo code can stay
/// generic without dragging distribution bounds through every signature.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widens to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// An absolute tolerance no tighter than the type can honour.
    fn tolerance(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(requested).max(floor)
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f64 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(Exp1)
    }
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(Exp1)
    }
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

/// Shorthand for [`Real::lit`].
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `n_points` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace<T: Real>(lo: T, hi: T, n_points: usize) -> Vec<T> {
    match n_points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let steps = T::from_count(n_points - 1);
            (0..n_points)
                .map(|i| {
                    if i + 1 == n_points {
                        hi
                    } else {
                        lo + (hi - lo) * T::from_count(i) / steps
                    }
                })
                .collect()
        }
    }
}

/// Composite Simpson rule on `[a, b]` with an even number of panels.
pub fn simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize) -> T {
    let n = if panels % 2 == 1 {
        panels + 1
    } else {
        panels.max(2)
    };
    let h = (b - a) / T::from_count(n);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + h * T::from_count(i);
        let w = if i % 2 == 1 {
            lit::<T>(4.0)
        } else {
            lit::<T>(2.0)
        };
        acc = acc + w * f(x);
    }
    acc * h / lit(3.0)
}
