//! Command-line pipeline and annotation service for chess move sentiment
//! analysis, built on `movesense-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod pipeline;
pub mod service;
