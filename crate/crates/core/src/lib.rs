//! Mild solutions of non-instantaneous impulsive ψ-Hilfer fractional
//! integrodifferential equations, computed by product integration and Picard
//! iteration, together with Ulam-Hyers-Rassias stability certificates.
//!
//! ```
//! use uhrfrac_core::{builtin_scenario, picard_solve, SolveOptions, StabilityCertificate};
//!
//! let s = builtin_scenario("example-integer").unwrap();
//! let cert = StabilityCertificate::new(&s.problem, &s.hypotheses).unwrap();
//! assert!(cert.contraction_ok);
//! let mesh = s.problem.mesh(16, 2.0).unwrap();
//! let r = picard_solve(&s.problem, mesh, &SolveOptions::default()).unwrap();
//! assert!(r.converged);
//! ```

pub mod expr;
pub mod problem;
pub mod psi;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod stability;

pub use expr::{evaluate, parse, EvalEnv, EvalError, Expr, ParseError, Var};
pub use problem::{
    builtin_scenario, load_problem, load_scenario, to_config_text, HypothesisData, ImpulsiveProblem,
    MemoryAnchor, ProblemError, ReferenceValues, Reported, Scenario, SCENARIO_NAMES,
};
pub use psi::{psi_kernel, singular_weight, FractionalOrder, PsiError, PsiFunction};
pub use quadrature::{
    build_mesh, frac_integral_at, precompute_weights, GridFunction, IntervalTag, KernelWeights, Mesh,
    QuadratureError,
};
pub use solver::{
    impulse_pointwise_solve, omega_apply, picard_solve, weighted_sup_distance, Discretization,
    SolveOptions, SolveResult, SolverError,
};
pub use special::{gamma, mittag_leffler, SpecialError};
pub use stability::{
    envelope_coeff, perturb, phi_constant, residual_check, verify_envelope, verify_h6, EnvelopeCheck,
    ResidualReport, StabilityCertificate, StabilityError,
};
