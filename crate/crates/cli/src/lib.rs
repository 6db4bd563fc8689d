//! Front end for the `clickdyn` command: configuration, dispatch and dataset
//! emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod contour;
pub mod dataset;
pub mod error;

use std::path::PathBuf;

pub use commands::Command;
pub use config::{Overrides, RunConfig};
pub use error::CliError;

/// One run of a subcommand.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config_file: Option<PathBuf>,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub keep_partial: bool,
    pub plot_scripts: bool,
}

impl Invocation {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            config_file: None,
            overrides: Overrides::default(),
            out: None,
            jobs: None,
            keep_partial: false,
            plot_scripts: false,
        }
    }
}

/// Resolve, compute and write; returns the output directory.
pub fn execute(inv: &Invocation) -> Result<PathBuf, CliError> {
    let cfg = RunConfig::resolve(inv.config_file.as_deref(), &inv.overrides)?;
    let dir = inv
        .out
        .clone()
        .unwrap_or_else(|| config::default_out_dir(inv.command.name()));
    if inv.jobs == Some(0) {
        return Err(CliError::Config("invalid value for `jobs`: must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let echo = cfg.to_json();
    match pool.install(|| commands::compute(inv.command, &cfg)) {
        Ok(out) => {
            dataset::write_all(
                &dir,
                inv.command.name(),
                &echo,
                &out,
                inv.plot_scripts,
                inv.keep_partial,
            )?;
            Ok(dir)
        }
        Err(failure) => {
            if let (true, Some(partial)) = (inv.keep_partial, failure.partial) {
                dataset::write_all(&dir, inv.command.name(), &echo, &partial, inv.plot_scripts, true)?;
            }
            Err(failure.error)
        }
    }
}
