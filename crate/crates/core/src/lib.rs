//! Desk-scale numerical laboratory for spectral Forrelation.
//!
//! The library is organized around the objects it manipulates:
//!
//! - [`hypercube`]: bit strings over {0,1}^n, fast Walsh-Hadamard transforms,
//!   multisets and their gamma spectra.
//! - [`instances`]: the Strong (S, U) instance distribution, spectral
//!   Forrelation, and the exact expectation matrices with their PSD sandwich.
//! - [`circuit`]: a dense statevector simulator with phase oracles and the
//!   two-ancilla Forrelation verifier.
//! - [`sampler`]: the hybrid-argument Sampler and CumulativeSampler that
//!   extract elements of S from a distinguishing query program.
//! - [`fock`]: exact ell-boson Fock-space algebra over 2^n modes, including
//!   hopping operators and quasi-even condensate projectors.
//! - [`oracle`]: the purified (compressed) two-oracle query channel and its
//!   exact equivalence to ensemble averaging.
//! - [`poly`]: Taylor / Chebyshev / flat / AKraus polynomial families with
//!   operator-level error computation.
//! - [`harness`]: seeded experiments E1-E9 bundling the above into
//!   machine-checkable bound reports.

pub mod circuit;
pub mod error;
pub mod fock;
pub mod harness;
pub mod hypercube;
pub mod instances;
pub mod linalg;
pub mod oracle;
pub mod poly;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
