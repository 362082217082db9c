//! Spectral analysis of parametrized complex symmetric matrix families
//! `H(a) = diag(e_k(a) - (i/2) c_k(a)) + V`.
//!
//! The crate covers eigenvalue trajectories over real parameter sweeps,
//! bi-orthogonality diagnostics of the c-normalized eigenvectors, mixing
//! coefficients with respect to the uncoupled basis, and the location and
//! monodromy certification of branch points (exceptional points) in the
//! complex parameter plane.

pub mod cli;
pub mod eigen;
pub mod ep;
pub mod error;
pub mod family;
pub mod io;
pub mod sweep;
pub mod tolerances;

pub use eigen::{
    biorthogonality_metrics, closed_form_2x2, coalescence_residual, eigendecompose, eigendecompose_with,
    eigensystem_at, mixing_coefficients, BiorthMetrics, EigenOptions, EigenPair, EigenSystem, MixingMatrix, Strategy,
};
pub use ep::{
    discriminant, encircle, find_branch_point, list_branch_points, winding_count, BranchPoint, BranchPointScan, EpOptions,
    MonodromyResult, Region, ScannedBranchPoint,
};
pub use error::{ConfigError, Error, Result};
pub use family::{
    build_matrix, family_to_config, parse_family, unperturbed_crossings, ComplexMatrix, CouplingSpec, CrossingKind,
    FamilySpec, LevelCrossing, LevelSpec,
};
pub use num_complex::Complex64;
pub use tolerances::Tolerances;
