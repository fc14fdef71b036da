//! Simulation and verification lab for distributed Nesterov gradient methods
//! (D-NG and D-NC) over static networks.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod net;
pub mod objectives;
pub mod oracle;
pub mod solvers;
pub mod stack;

pub use error::{LabError, Result};
