//! Budget-constrained social distancing planner.
//!
//! People and facilities form a bipartite graph weighted by the share of the
//! day each person spends in each facility. Closing a facility or isolating a
//! person costs money and removes the corresponding edges; the planner picks
//! closures and isolations within a budget so that the total risk of the
//! population drops as far as possible.
//!
//! * [`model`]: instances, solutions, validation and the JSON document format.
//! * [`risk`]: facility, person and total risk of a residual graph.
//! * [`heuristic`]: the efficiency-ordered greedy and its budget-split sweep.
//! * [`oracle`]: exhaustive ground truth for small instances.
//! * [`ilp_export`]: linear mixed-integer model and LP-file writer.
//! * [`datagen`]: reproducible synthetic instances.
//! * [`harness`]: parameter sweeps over generated instances.

pub mod datagen;
pub mod exec;
pub mod harness;
pub mod heuristic;
pub mod ilp_export;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod risk;

pub use exec::Execution;
pub use model::{Edge, FacilityId, Instance, InstanceData, PersonId, Solution};
pub use risk::RiskReport;
