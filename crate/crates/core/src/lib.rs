//! Matrix-valued fourth-order quintic nonlinear Schrödinger equations solved
//! by linearisation.
//!
//! The scattering data `p` evolves under the linear equation
//! `∂ₜp = μ₂∂²p + μ₃∂³p + μ₄∂⁴p`, which is solved exactly in Fourier space.
//! For each `x` the Marchenko equation `p(y+z+x) = g(y,z) + ∫ g(y,ζ) q(ζ,z) dζ`
//! is discretised by quadrature and solved densely, and `g(0,0;x,t)` solves
//! the nonlinear equation. A split-step spectral solver gives an independent
//! reference.
//!
//! ```
//! use qnls::{gp_solution_at_time, CompanionVariant, DispersionCoefficients, GridConfig, ScatteringField};
//! use num_complex::Complex64;
//!
//! let grid = GridConfig::scalar(40.0, 64)?;
//! let p0 = ScatteringField::scalar(grid, |x| Complex64::new(0.15 / (x / 40.0).cosh(), 0.0));
//! let c = DispersionCoefficients::reference();
//! let sol = gp_solution_at_time(&p0, 1.0, CompanionVariant::Adjoint, &c)?;
//! assert_eq!(sol.field.g.len(), 64);
//! assert!(sol.min_det_abs() >= 1.0 - 1e-8);
//! # Ok::<(), qnls::Error>(())
//! ```

pub mod block;
pub mod cli;
pub mod config;
pub mod error;
pub mod fredholm;
pub mod hankel;
pub mod quintic;
pub mod spectral;
pub mod splitstep;
pub mod verify;

pub use block::Block;
pub use config::{load_config, RunConfig};
pub use error::{Error, Result};
pub use fredholm::{
    assemble_data_kernel, fredholm_determinant, gp_solution_at_time, solve_marchenko, DataKernel, DeterminantOrder,
    GpSolution, GpSolver, KernelSolution, QuadratureRule,
};
pub use hankel::{companion_field, hankel_sample, CompanionVariant, ScatteringField};
pub use quintic::{pde_residual, quintic_rhs, SolutionField};
pub use spectral::{
    check_dispersion_property, evolve_scattering, propagator_multipliers, spectral_derivative, DispersionCoefficients,
    GridConfig, WaveNumbers,
};
pub use splitstep::{splitstep_advance, splitstep_initial_data, SplitStepSolver, StepperState};
