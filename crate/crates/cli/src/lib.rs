//! Configuration, experiment runner and acceptance suites behind the
//! `gibbsfield` command.

pub mod config;
pub mod runner;
pub mod verify;
