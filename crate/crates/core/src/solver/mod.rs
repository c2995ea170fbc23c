//! Local Newton directions, spectral estimates, the theoretical bound
//! constants and Monte-Carlo checks of the sketch concentration bounds.

mod bounds;
mod cg;
mod sketch;
mod spectral;

pub use bounds::{
    byzantine_constants, compressed_constants, epsilon_floor, nu, sample_size_bound, zeta, BoundReport,
    ByzantineConstants, CompressedConstants,
};
pub use cg::{conjugate_gradient, local_newton_direction, solve_optimum, CgConfig, CgOutcome};
pub use sketch::{validate_gradient_sketch, validate_hessian_sketch, SketchCheck};
pub use spectral::{coherence, orthonormal_basis, quadratic_phi, spectral_extremes, SpectralEstimate};
