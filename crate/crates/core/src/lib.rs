//! Nonlinear potential theory on weighted graphs.
//!
//! Graphs stand in for metric measure spaces. On them the crate solves
//! `p`-energy minimization and obstacle problems, computes Sobolev and
//! boundary-relative capacities, classifies exhaustions of unbounded domains as
//! `p`-parabolic or `p`-hyperbolic, and builds Perron solutions with a point at
//! infinity on the boundary.

pub mod error;
pub mod linalg;
pub mod program;
pub mod report;
pub mod energy_obstacle;
pub mod harmonic;
pub mod capacity;
pub mod parabolicity;
pub mod perron;
pub mod space_graph;

pub use error::{Error, Result};
pub use space_graph::{
    discrete_upper_gradient, p_energy, zero_extension, DomainFamily, EdgeField, Exponent,
    GraphSpace, ScalarField, Subdomain, VertexSet,
};
