//! Numerical toolkit for minimum time functions of differential inclusions
//! `ẋ ∈ F(x)` with a closed target: exact convex velocity sets, a
//! semi-Lagrangian grid solver for the minimum time function, proximal
//! normal-cone and subdifferential estimators, Hamiltonian-system flows with
//! dual arcs, and a verification harness that checks the characterization,
//! correspondence, propagation and regularity claims on desk-scale scenarios.

pub mod convexset;
pub mod directions;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hamflow;
pub mod hjb;
pub mod nonsmooth;
pub mod scenario;
pub mod space;
pub mod theorems;

pub use convexset::{check_a_regular, hausdorff, support_deviation, ConvexBody, SupportEval};
pub use dynamics::{
    grad_x_hamiltonian, max_hamiltonian, min_hamiltonian, DeclaredConstants, DynamicsForm,
    HamiltonianEval, Multifunction,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use grid::{GridSpec, SublevelCloud, TargetSet, ValueField};
pub use hamflow::{
    check_dual_bounds, hamiltonian_constancy, integrate_mp, synthesize_from_target, Direction,
    HamiltonianArc,
};
pub use hjb::{attainable_points, check_sublevel_convexity, solve_min_time, SolveParams};
pub use nonsmooth::{
    cone_dimension, epi_normals, epi_phi_convexity, horiz_subdiff, phi_convexity_constant,
    prox_subdiff, proximal_normals, EpiNormalSample, ProximalCone,
};
pub use scenario::{builtin_scenarios, Scenario};
pub use space::{BoundsBox, MatN, VecN};
pub use theorems::VerificationReport;
