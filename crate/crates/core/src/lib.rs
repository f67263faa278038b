//! Closed-form and exact models of frequency-coded QKD links built from a
//! tandem of electro-optic modulators.
//!
//! Alice and Bob each drive a phase (PM), amplitude (AM) or unbalanced (UM)
//! modulator at the same RF frequency. Bob's sidebands interfere with the
//! ones Alice created, and two sideband photon counters read out the result.
//!
//! * [`modulator`]: the generalized two-arm modulator and its small-signal
//!   carrier/sideband amplitudes.
//! * [`tandem`]: link propagation, the Alice→Bob cascade, κ factors,
//!   visibility, phase offset and normalized sideband powers.
//! * [`protocol`]: B92/BB84 feasibility and the nine-configuration table.
//! * [`oracle`]: exact Jacobi-Anger harmonic expansion used to bound the
//!   small-signal approximation.
//! * [`montecarlo`]: faint-pulse key-exchange sessions with Poissonian
//!   detection.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod error;
pub mod modulator;
pub mod montecarlo;
pub mod oracle;
pub mod protocol;
pub mod tandem;

pub use error::{Error, Result};
pub use modulator::{ComplexAmplitude, ModulatorKind, ModulatorSpec, ThreeBandField};
pub use tandem::{LinkSpec, TandemResult};
