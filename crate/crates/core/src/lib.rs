//! Numerical verification of the one-loop deformed c-map over complex
//! hyperbolic space.
//!
//! The crate is layered bottom-up: Taylor [`jet`]s provide exact local
//! derivatives, [`geometry`] turns chart-level tensor fields into curvature and
//! Lie-theoretic quantities, [`psk`] and [`vphs`] model the projective special
//! Kähler base and its variation of Hodge structure, [`twist`] implements the
//! Swann twist, and [`cmap`] assembles the quaternionic Kähler metrics.

#![allow(clippy::needless_range_loop)]

pub mod cmap;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod psk;
pub mod sampling;
pub mod twist;
pub mod vphs;

pub use error::{Error, Result};
