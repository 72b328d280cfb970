//! Numerical laboratory for the fractional Laplacian with exterior data:
//! quadrature discretization on a truncated 1-D domain, Robin and Dirichlet
//! exterior optimal control (steady and finite horizon), and diagnostics for
//! the averaged and exponential turnpike properties.

pub mod control;
pub mod domain;
pub mod error;
pub mod evolution;
pub mod nonlocal;
pub mod oracle;
pub mod steady;
pub mod system;
pub mod turnpike;

pub use control::{
    evaluate_cost, optimality_residual, reduced_gradient, solve_optimal, ControlProblem,
    ControlSeries, OptimalSolution, SolverSettings,
};
pub use domain::{BetaField, DomainSpec, Grid1D, NodeKind, TailMode};
pub use error::{Error, Result};
pub use evolution::{
    admissibility_sums, control_operator_adjoint, solve_adjoint, solve_parabolic_dirichlet,
    solve_parabolic_robin, Stepper, TimeGrid, Trajectory,
};
pub use nonlocal::{
    apply_fractional_laplacian, assemble_form, assemble_form_serial, dual_norm, kernel_tail_rho,
    nonlocal_normal_derivative, normalization_constant, robin_extension, FormMatrices,
};
pub use oracle::{dense_kkt_solve, DenseKkt};
pub use steady::{
    dirichlet_map, dirichlet_map_norm, solve_robin_steady, solve_steady_optimality,
    solve_steady_system, steady_cost, steady_first_order_residual, steady_kkt_dense,
    steady_kkt_residual, transposition_residual, transposition_scale, SteadyTriple,
};
pub use system::{StateSystem, Variant};
pub use turnpike::{
    averaged_errors, control_envelope_constant, convolution_response, deviation_curve,
    endpoint_energy, envelope_dominates, fit_turnpike_rate, l2_in_time, loglog_slope, lp_norm,
    r2_at_rate, scaled_deviation_check, scaling_function, solution_map_probe, time_average,
    turnpike_report, DeviationCurve, DeviationNorm, ProbeResult, RateFit, TurnpikeReport,
    DEVIATION_FLOOR, ENVELOPE_SLACK,
};
