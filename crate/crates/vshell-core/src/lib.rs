//! Static shells of the spherically symmetric Vlasov-Poisson system with a
//! fixed central point mass.
//!
//! The library constructs steady states of the form
//! `f0(r,w,L) = A (E0 - E)_+^k (L - L0)_+^l` in the reduced coordinates
//! `(r, w, L)` (radius, radial velocity, squared angular momentum), where
//! `E = (w^2 + L/r^2)/2 + U0(r) - Mc/r` is the particle energy in the
//! self-consistent potential `U0` plus the external point-mass potential.
//! On top of the solver it provides
//!
//! * radial Poisson machinery (enclosed mass, potential, field energy),
//! * the energy, Casimir and energy-Casimir functionals and the stability
//!   distance `d(f, f0)`,
//! * the rescaling transformation and its scaling identities, including the
//!   negative-energy witness construction,
//! * a weighted-particle evolution scheme along the reduced characteristics
//!   with frozen-field, self-consistent and Picard iteration modes.
//!
//! All quantities use units with `G = 1`.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod params;
pub mod poisson;
pub mod record;
pub mod scaling;
pub mod special;
pub mod steady;

pub use error::CoreError;
pub use grid::{make_log_grid, RadialGrid};
pub use params::{ScalingTriple, ShellParams};
pub use poisson::{RadialDensity, RadialField};
pub use steady::{ShellModel, SolveMode, SolveOptions};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
