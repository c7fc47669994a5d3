//! Anonymous multi-agent path finding as a sequence of coupled transport
//! problems.
//!
//! The library solves three related formulations on a shared data model:
//!
//! * an exact integral min-cost transport over a node-split time-expanded
//!   flow network ([`exact`]), including two minimum-makespan routes;
//! * an entropic relaxation solved by marginal/consistency sweeps over
//!   normalized Gibbs kernels ([`sinkhorn`]), producing a fractional
//!   "shadow" transport;
//! * a shadow-guided pruned re-solve that restores integrality on a reduced
//!   arc set ([`project`]).
//!
//! [`oracle`] holds brute-force ground truth for tiny instances, [`verify`]
//! audits any plan independently of the solver that produced it, and
//! [`bench`] drives the desk-scale experiment studies.

pub mod bench;
pub mod exact;
pub mod instance;
pub mod mcf;
pub mod oracle;
pub mod plan;
pub mod project;
pub mod sinkhorn;
pub mod timeexp;
pub mod verify;

pub use instance::{generate_grid, validate, validate_cost_conditions, CostModel, Instance};
pub use plan::{PlanCost, TransportPlan};
pub use verify::VerificationReport;
