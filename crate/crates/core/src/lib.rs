//! Quantum kernel machine learning on a desk-scale simulator.
//!
//! Feature vectors are encoded into parameterized circuits, their fidelity
//! kernel is estimated from simulated randomized measurements (with global
//! depolarizing noise and its mitigation), and kernel SVMs are trained on the
//! result.

pub mod circuits;
pub mod config;
pub mod linalg;
pub mod rng;
pub mod simulator;
pub mod estimation;
pub mod experiments;
pub mod fleet;
pub mod datapipe;
pub mod learner;
