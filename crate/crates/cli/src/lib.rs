//! Configuration, experiment orchestration and artifact output for the
//! `recomb` command line tool.

pub mod config;
pub mod experiments;
pub mod output;
