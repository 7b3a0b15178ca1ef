//! Simulation of counterfactual and orthogonal-state quantum key distribution
//! over a single-photon mode model, with a four-state baseline and classical
//! cipher tooling.

pub mod adversary;
pub mod classical;
pub mod gv;
pub mod hardware;
pub mod n09;
pub mod optics;
pub mod seed;
pub mod session;
pub mod stats;
