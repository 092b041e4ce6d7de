//! `ppewatch`: live monitoring service, recorded-run checker, simulator and
//! config generator built on `ppe-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod sinks;
pub mod webhook;

pub use commands::{cmd_check, cmd_monitor, cmd_simulate, run, Cli, MonitorService};
pub use config::{AppConfig, Overrides, Settings, SinkConfig, SourceConfig};
pub use error::{exit, CliError, CliResult};
pub use pipeline::{Pipeline, SessionReport};
