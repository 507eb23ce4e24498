//! Command-line front end and trial HTTP server.

pub mod api;
pub mod commands;
