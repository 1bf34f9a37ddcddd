//! Solvers for the first responder network design problem: choose lanes
//! to reserve so every FR demand node is linked to an entry point, while
//! minimising total evacuation time of the public at user equilibrium.

pub mod bnb;
pub mod enumerate;
pub mod error;
pub mod experiment;
pub mod gaga;
pub mod gama;
pub mod graver;
pub mod netmodel;
pub mod pathgen;
pub mod shortest;
pub mod ue;

pub use error::{Error, Result};
