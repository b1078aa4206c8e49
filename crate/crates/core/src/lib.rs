//! Digital-twin toolkit for autonomous-vessel maneuvering.
//!
//! The crate simulates vessel maneuvers (zigzag, waypoint following) with
//! reduced-order dynamics, turns recorded trajectories into windowed training
//! data, trains a recurrent multistep state predictor plus an autoencoder
//! out-of-distribution detector, and evaluates detection quality under sensor
//! noise, actuator faults, and ocean-current spikes.
//!
//! Everything is deterministic: a scenario is a pure function of its spec and
//! seed, training is a pure function of the dataset and config, and reruns of
//! the bundled pipeline profiles produce byte-identical artifacts.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod scenario;
pub mod seed;
pub mod twin;
pub mod vessel;

pub use error::{Error, Result};
