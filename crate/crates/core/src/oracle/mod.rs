//! Brute-force full-Hilbert-space ground truth for the transfer protocols.

pub mod channel;
pub mod evolve;
pub mod fock;
pub mod gates;
pub mod hamiltonian;
pub mod protocols;

pub use channel::{average_fidelity, ChannelMatrix};
pub use evolve::{evolve_state, Evolver};
pub use hamiltonian::{build_spin_hamiltonian, SpinHamiltonian, DEFAULT_SITE_CAP};
