//! Simulation and optimization toolkit for RIS-assisted uplink ISAC with
//! user occultation.
//!
//! The pipeline: place users and synthesize channels ([`geometry`],
//! [`channel`], [`signal`]), score a RIS configuration ([`objective`]),
//! optimize it on the unit-modulus manifold ([`optimizer`]), and localize
//! the users with MUSIC as the base station or as a wiretapper who guesses
//! the configuration ([`sensing`]). Phase configuration strategies are
//! pluggable through [`designer`].

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod designer;
pub mod error;
pub mod geometry;
pub mod objective;
pub mod optimizer;
pub mod sensing;
pub mod signal;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
