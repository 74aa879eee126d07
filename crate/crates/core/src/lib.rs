//! Approximate capacity of Gaussian full-duplex 1-2-1 directional relay
//! networks via linear programming, two-relay placement analysis, and
//! numerical verifiers for the placement result.
//!
//! Nodes are indexed `0` (source), `1..=N` (relays), `N + 1` (destination).
//! Capacities are in bits per channel use; distances share one length unit.

pub mod analysis;
pub mod capacity;
pub mod error;
pub mod experiments;
pub mod lp;
pub mod model;
pub mod suites;

pub use capacity::{
    approx_capacity_cutset, approx_capacity_p1, capacity_p4, capacity_p6_paths, dual_d1,
    enumerate_cuts, verify_optimal_solution_properties, CapacityResult, CutSet, DualCertificate,
    FlowMatrix, Formulation, PathAllocation, PropertySet, Schedule,
};
pub use error::{Error, Result};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation, SolverOptions};
pub use model::{
    gain_matrix, link_capacity, make_line_topology, make_theorem_topology, project_topology,
    symmetrize, CapacityMode, LinkGainMatrix, MinDistance, Point, ProjectedPair,
    PropagationParams, SymmetricGeometry, Topology,
};
