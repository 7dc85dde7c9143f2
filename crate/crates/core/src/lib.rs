//! Infrastructure for neural network interatomic potentials: batched
//! periodic neighbor search, analytic physical priors, an invariant
//! message-passing potential with exact gradients, training and Langevin
//! molecular dynamics.

pub mod cutoff;
pub mod elements;
pub mod error;
pub mod geometry;
pub mod md;
pub mod graph;
pub mod neighbor;
pub mod potential;
pub mod priors;
pub mod system;
pub mod trainer;
pub mod units;

pub use error::{Error, Result};
pub use geometry::{minimum_image, BoxKind, SimBox, Vec3};
pub use neighbor::{
    build_neighbor_list, canonicalize, distance_pullback, distance_pullback_second, NeighborList,
    NeighborSpec, Strategy,
};
pub use system::{EnergyForces, System};
