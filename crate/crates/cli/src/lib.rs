//! Command implementations behind the `chaoseq` binary: configuration,
//! run directories with checksummed manifests, and the analysis pipelines.

pub mod analyze;
pub mod classical_cmd;
pub mod config;
pub mod error;
pub mod evolve;
pub mod io;
pub mod manifest;
pub mod spectrum;
pub mod tools;

pub use error::{CliError, CliResult};

use std::path::Path;

use config::{Config, RunConfig};

/// Builds a run configuration from an optional preset, an optional config
/// file and `key=value` overrides, applied in that order.
pub fn resolve_config(
    preset: Option<&str>,
    file: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> CliResult<RunConfig> {
    let mut cfg = match preset {
        Some(p) => Config::preset(p)?,
        None => Config::default(),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        cfg = cfg.merged(&Config::parse(&text)?);
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override must be key=value, got {o:?}")))?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(s) = seed {
        cfg.set("seed", s.to_string());
    }
    if preset.is_none() && file.is_none() && cfg.get("system.kind").is_none() {
        return Err(CliError::Config("give --preset or --config".into()));
    }
    RunConfig::from_config(&cfg)
}

/// Parses the `--kind` of the oracle command.
pub fn fluctuations_kind(s: &str) -> CliResult<chaoseq_core::fluctuations::FieldKind> {
    chaoseq_core::fluctuations::FieldKind::parse(s).map_err(CliError::config)
}
