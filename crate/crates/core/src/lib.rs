//! Numerical toolkit for subequations and their viscosity solutions.
//!
//! The crate is organised around *fiber oracles*: classifiers of 2-jets
//! `(r, p, A)` against a closed subset of the jet space. On top of them sit
//! Dirichlet duality checks, Gårding hyperbolic polynomials, canonical
//! operators, boundary convexity tests and a monotone finite-difference
//! Dirichlet solver.

pub mod canonical;
pub mod catalog;
pub mod duality;
pub mod error;
pub mod expr;
pub mod garding;
pub mod geometry;
pub mod jets;
pub mod par;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use jets::{Jet2, SymMat};
