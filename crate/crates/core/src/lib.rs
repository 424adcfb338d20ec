//! Inner and outer capacity bounds for two-receiver discrete memoryless
//! broadcast channels.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod functional;
pub mod info;
pub mod marton;
pub mod minmax;
pub mod report;
pub mod search;
pub mod separation;

pub use error::{BoundsError, Result};
