//! Centralized and standalone least-squares solutions and the
//! decentralized gradient-tracking solver.

mod gt;
mod problem;

pub use gt::{
    avg_grad_norm, consensus, disagreement, gt_run, gt_solve, mean, metrics, msd, network_preconditioner,
    GtParams, IterationRecord, Preconditioner, SolverTrace,
};
pub use problem::{build_problems, centralized_wls, dense_wls, standalone_wls, CentralSolution, NodeProblem};
