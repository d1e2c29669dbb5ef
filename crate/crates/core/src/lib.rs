//! Environment, rewards and data pipeline for multi-turn text-to-SQL agents.

pub mod config;
pub mod db;
pub mod episode;
pub mod eval;
pub mod fixtures;
pub mod grpo;
pub mod memory;
pub mod pipeline;
pub mod policy;
pub mod reward;
pub mod service;
pub mod sql;
pub mod task;
pub mod templates;
