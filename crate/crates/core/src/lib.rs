//! Simulation and analysis of planar swarms driven by attraction/repulsion
//! virtual forces toward triangular lattice formations.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: positions and swarm configurations
//! - [`graph`]: links, incidence/rigidity matrices, rank-based rigidity
//! - [`interaction`]: force profiles, potentials and their validation
//! - [`dynamics`]: control law and forward-Euler integration
//! - [`lattice`]: lattice generation, perturbation, triangularity
//! - [`diagnostics`]: Lyapunov function and dissipation checks
//! - [`linearization`]: closed-loop Jacobian and spectral classification
//! - [`experiments`]: seeded Monte-Carlo sweeps and convergence studies
//! - [`config`] and [`io`]: experiment configuration and file formats

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod graph;
pub mod interaction;
pub mod io;
pub mod lattice;
pub mod linearization;
pub mod seed;

pub use error::{Error, Result};
pub use geometry::{swarm_center, Point, SwarmConfig};
pub use interaction::InteractionFunction;
