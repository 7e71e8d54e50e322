//! Radial-integral model of Gaussian blur and its matrix form.

pub mod framework;
pub mod grid;
pub mod patch;
pub mod weights;

pub use framework::{
    forward_candidates, ivec, vec_columns, CandidateEngine, CandidateVector, Framework,
};
pub use grid::{required_patch_side, QuadratureVector, RadialGrid, SigmaGrid, RADIAL_UPPER_BOUND};
pub use patch::{direct_blur_oracle, radial_average, sampled_tail_mass, Patch, SampledGaussian};
pub use weights::{Ring, WeightMatrix};
