pub mod analysis;
pub mod dataset;
pub mod definition;
pub mod expr;
pub mod fixture;
pub mod metrics;
pub mod ranker;
pub mod service;
