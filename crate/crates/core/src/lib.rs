//! Reconstruction of finite measures from their half-space masses.
//!
//! The pipeline runs in two stages. Half-space masses `S -> mu(S)` are
//! integrated against the isometry-invariant measure on half-spaces to give
//! the distance potential `f(y) = int (|y - x| - |x|) dmu(x)`
//! ([`potential`]); then `mu = c_m^{-1} Delta^m f` in R^{2m-1}
//! ([`inversion`]), with even dimensions handled by embedding one dimension
//! up. A classical Radon-transform inversion ([`radon`]) serves as an
//! independent cross-check.

pub mod checks;
pub mod crofton;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod measures;
pub mod potential;
pub mod quadrature;
pub mod radon;

pub use crofton::{alpha_n, crofton_distance, CroftonSampler, Estimate};
pub use error::{Error, Result};
pub use geometry::{fibonacci_sphere, random_halfspaces, sample_sphere, sphere_area, HalfSpace, Vector};
pub use inversion::{
    c_const, embed_query, invert, laplacian_apply, reconstruct, reconstruct_embedded, LaplacianStencil,
    ReconstructionReport,
};
pub use measures::{make_query, DiscreteMeasure, GridDensity, GridSpec, Measure, Query};
pub use potential::{
    potential_direct, potential_from_halfspaces, potential_grid, PotentialField, PotentialOptions, Provenance,
};
pub use radon::{radon_forward, radon_invert_odd, radon_invert_odd_grid, PGrid, Sinogram};
