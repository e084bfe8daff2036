//! Classical simulation of continuous-variable optical circuits built from
//! Gaussian states, Gaussian unitaries, Gaussian CP maps, homodyne-class
//! measurements and affine classical feedforward.
//!
//! Modules:
//!
//! - [`state`], [`symplectic`]: N-mode Gaussian states and symplectic gates
//! - [`channel`]: loss, amplification, additive noise, generic `(X, Y)` maps
//! - [`measure`]: homodyne, heterodyne and vacuum-branch photodetection
//! - [`circuit`]: the `.cvq` circuit language, validator and executors
//! - [`classify`]: static simulatability verdicts with citations
//! - [`fock`]: a truncated number-basis oracle for cross-checking
//! - [`bench`]: polynomial-scaling measurement
//!
//! Conventions: quadratures are interleaved `(x₀, p₀, x₁, p₁, …)` and the
//! vacuum covariance is the identity.

pub mod bench;
pub mod channel;
pub mod circuit;
pub mod citation;
pub mod classify;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measure;
pub mod state;
pub mod symplectic;

pub use channel::GaussianChannel;
pub use circuit::{parse, CircuitProgram};
pub use citation::Citation;
pub use error::{Error, Result};
pub use measure::{MeasurementKind, MeasurementOutcome, OutcomeValue, RandomStream};
pub use state::GaussianState;
pub use symplectic::SymplecticMatrix;
