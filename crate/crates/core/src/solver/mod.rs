//! Embedded deterministic solvers: bounded simplex, right-hand-side ray
//! tracing over the simplex, and a primal active-set method for convex QPs.

pub mod lp;
pub mod parametric;
pub mod qp;
mod simplex;

pub use lp::{
    certificate, certificate_stats, solve_lp, Certificate, CertificateStats, LinearProgram,
    LpSolution, LpStatus, RowKind,
};
pub use parametric::{parametric_rhs_ray, ParametricRay};
pub use qp::{solve_qp, solve_qp_warm, Hessian, QpSolution, QuadraticProgram, WarmStart};

use crate::error::Result;

/// Solver back end consumed by the user and aggregator stages.
pub trait ConvexSolver {
    fn solve_lp(&mut self, lp: &LinearProgram) -> Result<LpSolution>;
    fn solve_qp(&mut self, qp: &QuadraticProgram) -> Result<QpSolution>;
}

/// The built-in dense simplex and active-set solvers.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseSolver;

impl ConvexSolver for DenseSolver {
    fn solve_lp(&mut self, lp: &LinearProgram) -> Result<LpSolution> {
        solve_lp(lp)
    }

    fn solve_qp(&mut self, qp: &QuadraticProgram) -> Result<QpSolution> {
        solve_qp(qp)
    }
}
