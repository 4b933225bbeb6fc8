//! Lattice gauge fields with structure group SU(2) or SO(3).

pub mod connection;
pub mod fixing;
pub mod group;

pub use connection::{
    apply_gauge, bianchi_residual, curvature, el_residual, energy_gradient, gauge_energy, gauge_q, minimize,
    weak_residual, BianchiReport, GaugeError, GaugeTransform, LatticeConnection, MinimizeOptions, MinimizeReport,
    MinimizeStatus,
};
pub use group::{Algebra, Group, GroupElement, GroupError};
pub use fixing::{coulomb_gauge_fix, exponential_gauge_fix, CoulombOptions, CoulombReport, ExponentialReport};
