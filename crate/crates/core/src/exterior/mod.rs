//! Graded exterior algebra over an orthonormal coframe.

mod blade;
mod form;

pub use blade::{Blade, MAX_DIM};
pub use form::{Form, Orientation};

use thiserror::Error;

use crate::expr::{Expr, ExprError, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("blade {blade} does not fit dimension {dim}")]
    IndexOutOfRange { blade: String, dim: usize },
    #[error("blade {0} has degree other than the form's")]
    MixedDegree(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Scalar ring for form coefficients.
pub trait Coefficient: Clone + std::fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn from_rational(r: Rational) -> Self;
    /// Exact zero test (structural for expressions).
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn sum(terms: Vec<Self>) -> Self;

    fn one() -> Self {
        Self::from_rational(Rational::from_integer(1))
    }

    fn from_int(i: i64) -> Self {
        Self::from_rational(Rational::from_integer(i))
    }

    fn signed(&self, s: i8) -> Self {
        if s < 0 {
            self.neg()
        } else {
            self.clone()
        }
    }
}

impl Coefficient for Expr {
    fn zero() -> Self {
        Expr::zero()
    }
    fn from_rational(r: Rational) -> Self {
        Expr::constant(r)
    }
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        Expr::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        Expr::mul(self, other)
    }
    fn neg(&self) -> Self {
        Expr::neg(self)
    }
    fn sum(terms: Vec<Self>) -> Self {
        Expr::sum(terms)
    }
}

impl Coefficient for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_rational(r: Rational) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sum(terms: Vec<Self>) -> Self {
        terms.into_iter().sum()
    }
}

impl Coefficient for Rational {
    fn zero() -> Self {
        <Rational as num_traits::Zero>::zero()
    }
    fn from_rational(r: Rational) -> Self {
        r
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sum(terms: Vec<Self>) -> Self {
        terms.into_iter().fold(<Rational as num_traits::Zero>::zero(), |a, b| a + b)
    }
}
