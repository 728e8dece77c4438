//! Simulation library for the PT-symmetric kicked rotor.
//!
//! The rotor is kicked once per period by the complex potential
//! `V(θ) = K [cos θ + iλ sin θ]`. This crate covers both faces of the model:
//!
//! - [`classical`]: the complexified standard map, ensemble second moments,
//!   divergence counting and the diffusion-law fits.
//! - [`quantum`]: split-step Floquet propagation in a truncated
//!   angular-momentum basis with log-norm bookkeeping.
//! - [`otoc`]: momentum out-of-time-order correlators and their growth,
//!   crossover and divergence diagnostics.
//! - [`spectrum`]: dense Floquet matrices, complex quasienergies and
//!   PT-breaking threshold bracketing.
//!
//! Shared parameter types live in [`params`], the index-keyed initial
//! ensemble in [`ensemble`] and the least-squares helpers in [`fit`].

pub mod classical;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod otoc;
pub mod params;
pub mod quantum;
pub mod spectrum;

mod sum;

pub use error::{Error, Result};
pub use params::{make_params, ComplexPhasePoint, EnsembleConfig, SystemParams};
