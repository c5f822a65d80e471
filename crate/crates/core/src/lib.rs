//! Cascading-failure simulation for power grids under budget-constrained
//! hybrid attacks on nodes and links.
//!
//! The pipeline is: build a [`grid::Grid`] (usually via [`ingest`]), fix
//! capacities from the intact grid's loads ([`cascade::initial_capacities`]),
//! price every component ([`attack::CostTable`]), then choose an attack with
//! one of the greedy or swarm attackers and score it by the damage of the
//! cascade it triggers.

pub mod attack;
pub mod cascade;
pub mod experiment;
pub mod greedy;
pub mod grid;
pub mod ingest;
pub mod power_flow;
pub mod pso;
mod sparse;
pub mod synthetic;

pub use attack::{AttackProblem, AttackSolution, CentralityScope, CentralityTable, CostTable};
pub use cascade::{initial_capacities, simulate_cascade, CapacityTable, CascadeResult};
pub use grid::{ComponentId, Grid, LinkSpec, Node, NodeKind};
pub use power_flow::GenerationSpec;
