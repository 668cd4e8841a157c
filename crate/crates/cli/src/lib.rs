pub mod api;
pub mod commands;

pub use tradeoff_core as core;
