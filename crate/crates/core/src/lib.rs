//! Aspect-based sentiment analysis of chess moves described in teaching text.
//!
//! The crate covers the whole pipeline: reading move notation, pulling
//! player-predicate-move triples out of sentences, grouping predicates into
//! move-action types, classifying sentiment towards each triple, and checking
//! the labels against a UCI engine.

pub mod chess;
pub mod extraction;
pub mod corpus;
pub mod clustering;
pub mod absa;
pub mod engine;
