//! Deterministic street-graph simulation engine: worlds, sensing, movement
//! and benchmark protocols for embodied agents.

pub mod benchmark;
pub mod canonical;
pub mod geo;
pub mod mobility;
pub mod parallel;
pub mod perception;
pub mod provider;
pub mod seeding;
pub mod world;
