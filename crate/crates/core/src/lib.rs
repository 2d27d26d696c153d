//! Stroboscopic synthesis of the toric-code Hamiltonian from one- and
//! two-body gates, and engineered Lindblad dissipation that thermalizes or
//! cools it.
//!
//! Internal units set ħ = 1 and the per-gate time τ = 1 unless a function
//! says otherwise.

pub mod lattice;
pub mod linalg;
pub mod lindblad;
pub mod pauli;
pub mod sequence;
pub mod spectra;

pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
