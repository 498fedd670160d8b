//! Spectral solver for the semiclassical D-bar problem of defocusing
//! Davey–Stewartson II inverse scattering.
//!
//! The library is generic over the floating-point type through [`Real`];
//! the aliases at the crate root fix it to `f64`, which is what the command
//! line driver uses.

pub mod dbar;
pub mod error;
pub mod fld;
pub mod grid;
pub mod krylov;
pub mod regularization;
pub mod scattering;
mod scalar;

pub use dbar::{
    ConvergenceLog, DbarOperator, DbarProblem, Potential, PotentialKind, Residual, SField, SolveConfig, SolveStatus,
    SolverKind,
};
pub use error::{Error, Result};
pub use grid::{boundary_decay, BoundaryDecay, ComplexField, Grid2D, Space};
pub use krylov::{gmres, FnOperator, GmresOptions, KrylovLog, KrylovStatus, LinearOperator, StagnationRule};
pub use regularization::{
    inv_ft_div_xi, inv_ft_div_xibar_shifted, singular_point, spectral_derivs_at, Direction, DivXi,
    DivXiBarShifted, EtaFamily, SingularPointInfo,
};
pub use scattering::{
    cauchy_oracle, dbar_residual, diagnostics, k_sweep, oscillatory_factor, phi1_from_s, phi2_from_phi1, reflection,
    CGOSolution, DbarResidual, Diagnostics, ReflectionSample, SweepEntry,
};
pub use scalar::{l2_norm, max_abs, Real};

pub type Grid = Grid2D<f64>;
pub type Field = ComplexField<f64>;
pub type C64 = num_complex::Complex<f64>;
