//! Simulation and analysis of a quantum key distribution protocol that
//! encodes key bits in the path-spin entanglement of single spin-½
//! particles.
//!
//! - [`qmath`]: fixed-size complex linear algebra, a 3x3 symmetric
//!   eigensolver and a counter-based random source.
//! - [`optics`]: the four protocol states, the receiver's interferometer and
//!   the path/spin measurement.
//! - [`protocol`]: rounds, sifting, key extraction and `.qkdlog` transcripts.
//! - [`security`]: the Horodecki M(ρ) check on aborted rounds.
//! - [`adversary`]: intercept-resend eavesdropping and QBER estimation.

pub mod adversary;
pub mod optics;
pub mod protocol;
pub mod qmath;
pub mod security;
