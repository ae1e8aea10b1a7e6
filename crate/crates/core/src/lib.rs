//! Perfect controllability of leader-follower consensus networks.
//!
//! A network of single-integrator agents running the consensus protocol
//! `ẋ = −L x` is *perfectly controllable* when the follower subsystem
//! `ẋ_f = −L_f x_f − L_fl x_l` is controllable for every nonempty choice of
//! leader agents. This crate decides that property numerically
//! ([`spectral`]) and exactly ([`exact`]), checks individual leader sets
//! ([`leaders`]), encodes a pair-based graph construction procedure
//! ([`construct`]), runs small-graph censuses and spectrum-matching searches
//! ([`census`]), and steers followers with minimum-energy leader inputs
//! ([`steering`]).

pub mod census;
pub mod construct;
pub mod exact;
pub mod graph;
pub mod leaders;
pub mod matrix;
pub mod poly;
pub mod spectral;
pub mod steering;

pub use graph::{Edge, Graph, GraphError, Laplacian, Node};
pub use leaders::LeaderSet;
