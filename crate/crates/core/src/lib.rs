//! Exact-arithmetic solver for multilevel multiobjective linear programs.
//!
//! Single-objective LPs are solved with the adaptive (support) method, each
//! level's MOLP is reduced to a weighted LP through an auxiliary weight
//! problem, and the levels are chained by decision-maker bound slacks.
//!
//! All algorithms are generic over [`Scalar`], an exact ordered field; the
//! crate-root aliases fix it to arbitrary-precision rationals.

pub mod driver;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lp;
pub mod molp;
pub mod numeric;

pub use driver::{
    initial_bounds, run_batch, run_batch_with, start_session, BatchConfig, BatchRun, DmSlacks, FinalCompromise, Level, MlProblem,
    Phase, Session, SessionConfig, SortingChoice, SortingSelection, TraceEvent,
};
pub use error::{BoundSide, Error, NumericError, Result};
pub use geometry::{
    analyze, compromise_faces, efficiency_test, efficient_extreme_points, enumerate_vertices, CompromiseSet, EfficiencyOracle,
    EfficiencyVerdict, Face, Geometry, Polytope, Vertex,
};
pub use lp::{find_initial_feasible, solve_bounded_lp, suboptimality_estimate, BoundedLp, LpOutcome, LpStatus, SupportPlan};
pub use molp::{auxiliary_weights, solve_molp, solve_molp_on, slackify, LevelObjectives, MolpSolution, WeightVector};
pub use numeric::{parse_scalar, Matrix, Scalar, Vector};

/// Arbitrary-precision rational, the scalar used throughout the binaries.
pub type Rational = num_rational::BigRational;
pub type RVector = Vector<Rational>;
pub type RMatrix = Matrix<Rational>;
pub type RProblem = MlProblem<Rational>;
pub type RSession = Session<Rational>;
pub type RGeometry = Geometry<Rational>;
