//! Symbolic-numeric exterior calculus for special-holonomy metric ansaetze.
//!
//! The crate is layered bottom-up:
//!
//! - [`expr`]: scalar expressions over base coordinates and unknown profile
//!   functions, with parsing, differentiation, evaluation and randomized
//!   identity testing.
//! - [`exterior`]: graded exterior algebra over an orthonormal coframe.
//! - [`frames`]: coframe systems with structure constants, warped-like
//!   ansatz frames, the exterior derivative and the induced metric.
//! - [`structures`]: the G2 three-form, the Spin(7) four-form, the hermitian
//!   forms of a six-dimensional fiber and the builtin ansaetze.
//! - [`torsion`]: torsion forms, the Spin(7) Lee form and class membership.
//! - [`flows`]: derivation and integration of first-order flow systems.
//! - [`cli`]: the ansatz document format, JSON reports and commands.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod expr;
pub mod exterior;
pub mod flows;
pub mod frames;
pub mod structures;
pub mod torsion;

pub use expr::{Expr, ExprError, Symbol, SymbolKind, Workspace};
pub use exterior::{Blade, Form};
