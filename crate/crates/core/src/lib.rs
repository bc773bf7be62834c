pub mod datagen;
pub mod error;
pub mod eval;
pub mod features;
pub mod filter;
pub mod fixture;
pub mod graph;
pub mod kga;
pub mod models;
pub mod rng;
pub mod training;

pub use error::{KgError, Result};
