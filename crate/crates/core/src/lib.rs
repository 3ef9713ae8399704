//! Digital twin of an FPGA feedback and feed-forward controller for
//! superconducting qubits.
//!
//! The crate is layered bottom-up: [`physics`] evolves single-qubit states,
//! [`readout`] turns states into IQ records and feedback tags, [`isa`]
//! encodes the measure/control board instruction words, [`engine`] runs
//! those programs on a nanosecond event clock, and [`experiments`] wires
//! everything into the reset, stabilization, feed-forward and random-walk
//! protocols.

pub mod physics;
pub mod readout;
pub mod isa;
pub mod engine;
pub mod experiments;
