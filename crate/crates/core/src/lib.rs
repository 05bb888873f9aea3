//! Numerical toolkit for quantum broadcast channels.
//!
//! The crate simulates the one-shot broadcast father protocol built from
//! fully-quantum-Slepian-Wolf decoupling, checks the decoupling and
//! Uhlmann error bounds by Monte Carlo over Haar-random unitaries, and
//! evaluates the associated achievable rate regions (entanglement-assisted,
//! unassisted, classical Marton, multi-receiver and finite-block regularized).
//!
//! Module map:
//!
//! - [`tensor`]: labelled states, partial traces, isometries, Uhlmann alignment.
//! - [`entropic`]: von Neumann entropies and information quantities (bits).
//! - [`channels`]: broadcast channels as isometric extensions, builtin zoo, JSON format.
//! - [`fqsw`]: the decoupling primitive and its Haar-average bound.
//! - [`protocol`]: end-to-end one-shot simulation.
//! - [`regions`]: rate-region formulas and boundary optimization.
//! - [`typicality`]: typical sets and typical projectors.

pub mod channels;
pub mod entropic;
pub mod error;
pub mod fqsw;
pub mod io;
pub mod optim;
pub mod protocol;
pub mod random;
pub mod regions;
pub mod tensor;
pub mod typicality;

pub use error::{Error, Result};
pub use tensor::{DensityOperator, Isometry, LabeledState, Layout, PureState};
