//! Simulation of a DRL jamming attacker against a DRL dynamic channel-access
//! user, with diversified and orthogonal-policy defenses and an
//! attack-versus-environment-change detector.

pub mod actor_critic;
pub mod attacker;
pub mod config;
pub mod defense;
pub mod detector;
pub mod env;
pub mod error;
pub mod log;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod victim;

pub use error::{Error, Result};
