//! Command-line front end: configuration, PPM rendering and CSV tables.

pub mod app;
pub mod config;
pub mod render;
pub mod tables;
