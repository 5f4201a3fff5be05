//! Free-fermion state transfer through unpolarized XX spin chains.
//!
//! * [`chain`]: chain parameters, the single-particle coupling matrix and
//!   seeded disorder.
//! * [`fermion`]: eigenmodes, resonance selection, transfer schedules,
//!   propagators and the leakage analytics.
//! * [`oracle`]: full-Hilbert-space spin dynamics used as ground truth.
//! * [`disorder`]: Monte-Carlo robustness studies.

pub mod chain;
pub mod disorder;
pub mod error;
pub mod fermion;
pub mod format;
pub mod oracle;
pub mod par;

pub use error::{Error, Result};
pub use par::Exec;
