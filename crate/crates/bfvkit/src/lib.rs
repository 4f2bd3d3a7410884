//! Exact and numerical tooling for graded Poisson algebras, BFV charges and the
//! hypersurface deformation algebroid of canonical general relativity.
//!
//! The crate is `no_std` with `alloc`. Exact work (the [`graded`], [`bfv`],
//! [`toy`] and [`formal`] modules) uses big rationals; the [`lattice`] module
//! discretises the ADM phase space on a periodic torus and evaluates its
//! homological vector field over a small Grassmann algebra.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bfv;
pub mod formal;
pub mod graded;
pub mod lattice;
pub mod linalg;
pub mod selfcheck;
pub mod toy;

pub use graded::{Algebra, AlgebraError, Derivation, GradedPoly, Monomial, Rational};
