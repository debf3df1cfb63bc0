// SPDX-License-Identifier: Apache-2.0

//! Optimal purity-increasing control of dissipative N-level systems under
//! complete, instantaneous unitary control.
//!
//! The crate is organised bottom-up:
//!
//! - [`density`]: density matrices, spectra, purity measures, majorization.
//! - [`lindblad`]: full-matrix spontaneous-emission dynamics with unitary kicks.
//! - [`spectral`]: the reduced spectral equation `λ̇ = (ΘᵀBΘ + Θᵀ∘D)λ` and
//!   control policies.
//! - [`lambda3`]: closed forms for the three-level Λ system.
//! - [`hjb`]: the HJB objective, its maximisation, proof-step checks and a
//!   dynamic-programming solver on the ordered simplex.
//!
//! Interchangeable strategies (policies, Θ samplers, purity measures) are
//! trait objects registered by name in a [`registry::Registry`].

pub mod density;
pub mod error;
pub mod hjb;
pub mod lambda3;
pub mod lindblad;
pub mod registry;
pub mod sampling;
pub mod spectral;

pub use error::{CoreError, Result};
