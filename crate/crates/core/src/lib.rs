//! Locating the Steiner point of a finite anchor set: the global minimizer of
//! a sum of pairwise potentials `U(x) = sum_i dis(x - a_i)`.
//!
//! Rest points of `U` are found by tracing gradient-flow lines from many
//! testing points; the critical set they reach is deduplicated and the
//! lowest-valued element is the Steiner point. The [`oracles`] module holds
//! independent reference solvers for validation.

pub mod critical_set;
pub mod error;
pub mod flow;
pub mod fmt;
pub mod gradcheck;
pub mod instance;
pub mod objective;
pub mod oracles;
pub mod point;
pub mod potentials;

pub use critical_set::{
    enumerate_critical_points, enumerate_from_points, generate_testing_points, select_steiner, CriticalPoint,
    Diagnostics, SolveOptions, SteinerResult, Strategy, TestingPlan,
};
pub use error::{Result, SteinerError};
pub use flow::{
    graph_residual, sample_flow_line, tangency_residual, trace_flow, FlowConfig, FlowSample, FlowTrace, GraphResidual,
    TraceStatus,
};
pub use gradcheck::{gradient_check, gradient_check_with, GradcheckConfig, GradcheckReport};
pub use instance::InstanceFile;
pub use objective::{GradientEval, Objective};
pub use oracles::{centroid, grid_search, weiszfeld, OracleMethod, OracleReport};
pub use point::{AnchorSet, DomainBox, Point};
pub use potentials::{potential_gradient, potential_value, Potential, PotentialKind, PotentialSpec};
