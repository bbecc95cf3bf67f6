//! Simulation laboratory for the continuously observed quantum delta-kicked
//! rotor.
//!
//! The crate evolves single quantum trajectories of the rotor under
//! continuous position measurement ([`propagator`]), averages them into
//! ensembles ([`ensemble`]), and checks them against a master-equation
//! reference ([`master`]), the classical standard map ([`classical`]) and
//! closed-form diagnostics ([`analytics`]).

pub mod analytics;
pub mod classical;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod master;
pub mod noise;
pub mod output;
pub mod params;
pub mod propagator;
pub mod spectral;
pub mod wavefunction;

pub use error::{Result, RotorError};
pub use grid::{make_grid, Grid};
pub use params::{InitialPacket, SimParams};
pub use propagator::{Propagator, TrajectoryResult};
pub use wavefunction::{gaussian_packet, Moments, Wavefunction};
