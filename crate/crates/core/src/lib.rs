//! Probabilistic placement of service function chains on uncertain
//! Cloud-IoT infrastructures.

pub mod model;
pub mod parser;
pub mod policy;
pub mod probability;
pub mod search;
pub mod engine;
pub mod benchgen;

pub use model::{
    Answer, ChainSpec, Infrastructure, LinkProfile, NodeProfile, PlacementAssignment,
    PreAllocation, SecurityPolicy, ServiceFunction,
};
