//! Numerical machinery for fixed-energy inverse potential scattering in three
//! dimensions: Faddeev-type complex-exponential eigenfunctions, the
//! fixed-energy scattering matrix, boundary pairings, and recovery of the
//! Fourier transform of `V - V'` on a frequency shell.

pub mod error;
pub mod faddeev;
pub mod field;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod oracle;
pub mod potential;
pub mod cgo;
pub mod recon;
pub mod rng;
pub mod sample;
pub mod scattering;
pub mod sphere;
pub mod sum;

pub use error::{Error, Result};
pub use field::{forward_transform, inverse_transform, weighted_norm, ComplexField, Spectrum, WeightedNormSpec};
pub use grid::{Frame, Grid, Lattice, Vec3};
pub use sample::{sample_function, Descriptor};
