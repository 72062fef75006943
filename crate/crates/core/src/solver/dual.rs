//! First-order dual numbers for forward-mode algorithmic differentiation.
//!
//! A [`Dual`] carries a value together with the derivative of that value
//! along a single seed direction. Running an evaluator once per input
//! coordinate with the corresponding seed set to one yields the exact
//! gradient of the composed elementary operations, with no truncation
//! error. This is the `Algorithmic` gradient mode; central differences
//! remain available as an independent oracle.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus directional derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    /// Primal value.
    pub re: f64,
    /// Derivative along the seeded direction.
    pub eps: f64,
}

impl Dual {
    pub const ZERO: Dual = Dual { re: 0.0, eps: 0.0 };

    /// A constant: derivative zero.
    #[inline]
    pub fn constant(v: f64) -> Dual {
        Dual { re: v, eps: 0.0 }
    }

    /// A seeded variable: derivative one.
    #[inline]
    pub fn variable(v: f64) -> Dual {
        Dual { re: v, eps: 1.0 }
    }
}

macro_rules! dual_binop {
    ($trait:ident, $fn:ident, $re:expr, $eps:expr) => {
        impl $trait<Dual> for Dual {
            type Output = Dual;
            #[inline]
            fn $fn(self, rhs: Dual) -> Dual {
                let (a, b) = (self, rhs);
                Dual {
                    re: $re(a, b),
                    eps: $eps(a, b),
                }
            }
        }
    };
}

dual_binop!(Add, add, |a: Dual, b: Dual| a.re + b.re, |a: Dual, b: Dual| a.eps + b.eps);
dual_binop!(Sub, sub, |a: Dual, b: Dual| a.re - b.re, |a: Dual, b: Dual| a.eps - b.eps);
dual_binop!(Mul, mul, |a: Dual, b: Dual| a.re * b.re, |a: Dual, b: Dual| {
    a.re * b.eps + a.eps * b.re
});
dual_binop!(Div, div, |a: Dual, b: Dual| a.re / b.re, |a: Dual, b: Dual| {
    (a.eps * b.re - a.re * b.eps) / (b.re * b.re)
});

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: f64) -> Dual {
        Dual { re: self.re + rhs, eps: self.eps }
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: f64) -> Dual {
        Dual { re: self.re - rhs, eps: self.eps }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: f64) -> Dual {
        Dual { re: self.re * rhs, eps: self.eps * rhs }
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: f64) -> Dual {
        Dual { re: self.re / rhs, eps: self.eps / rhs }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual { re: -self.re, eps: -self.eps }
    }
}

/// Scalar abstraction evaluators are written against, so the same formula
/// runs on plain `f64` and on [`Dual`] seeds.
pub trait Real:
    Copy
    + std::fmt::Debug
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
    const ZERO: Self;

    fn from_f64(v: f64) -> Self;

    /// Primal value.
    fn value(self) -> f64;

    fn powi(self, n: i32) -> Self;

    fn sqrt(self) -> Self;

    fn abs(self) -> Self;

    /// Value-ordering maximum; on a tie the left operand wins so the
    /// derivative choice is deterministic.
    fn max_val(self, other: Self) -> Self;
}

impl Real for f64 {
    const ZERO: f64 = 0.0;

    #[inline]
    fn from_f64(v: f64) -> f64 {
        v
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }

    #[inline]
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }

    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }

    #[inline]
    fn max_val(self, other: f64) -> f64 {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Real for Dual {
    const ZERO: Dual = Dual::ZERO;

    #[inline]
    fn from_f64(v: f64) -> Dual {
        Dual::constant(v)
    }

    #[inline]
    fn value(self) -> f64 {
        self.re
    }

    #[inline]
    fn powi(self, n: i32) -> Dual {
        Dual {
            re: self.re.powi(n),
            eps: f64::from(n) * self.re.powi(n - 1) * self.eps,
        }
    }

    #[inline]
    fn sqrt(self) -> Dual {
        let r = self.re.sqrt();
        Dual { re: r, eps: self.eps / (2.0 * r) }
    }

    #[inline]
    fn abs(self) -> Dual {
        if self.re >= 0.0 {
            self
        } else {
            -self
        }
    }

    #[inline]
    fn max_val(self, other: Dual) -> Dual {
        if self.re >= other.re {
            self
        } else {
            other
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_matches_f64() {
        let a = Dual::constant(3.0);
        let b = Dual::constant(2.0);
        assert_eq!((a + b).re, 5.0);
        assert_eq!((a - b).re, 1.0);
        assert_eq!((a * b).re, 6.0);
        assert_eq!((a / b).re, 1.5);
    }

    #[test]
    fn product_rule() {
        // d/dx (x * x) at x = 3 is 6
        let x = Dual::variable(3.0);
        let y = x * x;
        assert_relative_eq!(y.re, 9.0);
        assert_relative_eq!(y.eps, 6.0);
    }

    #[test]
    fn quotient_rule() {
        // d/dx (1 / x) at x = 2 is -1/4
        let x = Dual::variable(2.0);
        let y = Dual::constant(1.0) / x;
        assert_relative_eq!(y.eps, -0.25);
    }

    #[test]
    fn powi_derivative() {
        // d/dx x^3 at x = 2 is 12
        let x = Dual::variable(2.0);
        assert_relative_eq!(x.powi(3).eps, 12.0);
    }

    #[test]
    fn sqrt_derivative() {
        let x = Dual::variable(4.0);
        assert_relative_eq!(x.sqrt().re, 2.0);
        assert_relative_eq!(x.sqrt().eps, 0.25);
    }

    #[test]
    fn chain_through_polynomial() {
        // f(x) = (2x - 1)^2 + x, f'(x) = 4(2x - 1) + 1, at x = 1.5 -> 9
        let x = Dual::variable(1.5);
        let f = (x * 2.0 - 1.0).powi(2) + x;
        assert_relative_eq!(f.eps, 9.0);
    }
}
