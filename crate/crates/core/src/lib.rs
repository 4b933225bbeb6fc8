//! Nonlinear Hodge equations on cubical lattices.

pub mod campanato;
pub mod cli;
pub mod cochain;
pub mod complex;
pub mod config;
pub mod density;
pub mod flow;
pub mod gauge;
pub mod io;
pub mod verify;
pub mod linalg;
pub mod ops;

pub use cochain::{CellField, Cochain, DecError, Layout};
pub use complex::{Complex, ComplexBuilder, ComplexError, MetricSpec};
