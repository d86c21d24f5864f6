//! Numerical toolkit for the multi-species Boltzmann collision operator with
//! unequal molecular masses.
//!
//! The crate provides, at desk scale:
//!
//! * elastic collision kinematics and the Carleman admissible sets
//!   (hyperplanes for equal masses, spheres otherwise),
//! * Maxwellian equilibria, conservation moments and the entropy functional
//!   for an `N`-species mixture,
//! * the linearized collision operator `L = -nu + K`, its symmetric discrete
//!   assembly, spectral-gap estimation and the kernel (Carleman) form of `K`,
//! * Povzner constants `C_k`, the moment threshold `k0` and sphere-quadrature
//!   verification of the Povzner inequality,
//! * the truncated splitting `K = A + B` with randomized norm estimates,
//! * relaxation solvers for the perturbed equation (RK4) and the
//!   positivity-preserving gain/loss scheme.
//!
//! The crate is `no_std`-compatible (requires `alloc`); with the default
//! `std` feature enabled the float intrinsics of `std` are used, otherwise
//! `libm` provides them.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod math;
pub mod rng;

pub mod field;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod mixture;
pub mod weights;

pub mod linear;
pub mod povzner;
pub mod solver;
pub mod splitting;

pub mod eigen;

pub use error::CoreError;
pub use field::DistributionField;
pub use grid::{SphereQuadrature, VelocityGrid};
pub use kernel::{AngularKind, KernelSpec};
pub use mixture::{EquilibriumVector, MacroMoments, SpeciesSet};
