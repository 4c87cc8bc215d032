//! Library side of the `online-neat` command: configuration layering and the
//! `run`, `synth` and `eval` commands.

pub mod commands;
pub mod config;

pub use commands::{cmd_eval, cmd_run, cmd_synth};
pub use config::RunConfig;
