//! Variational quantum metrology simulator.
//!
//! Prepares parameterized entangled probe states, passes them through a noisy
//! 3D-magnetic-field encoding channel, measures them with a parameterized POVM,
//! and trains both parameter sets to close the gap between the classical and
//! SLD quantum Cramér-Rao bounds.

pub mod ansatz;
pub mod channel;
pub mod config;
pub mod entanglement;
pub mod experiments;
pub mod fisher;
pub mod linalg;
pub mod report;
pub mod train;
