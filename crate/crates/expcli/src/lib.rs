//! Experiment harness: NMSE sweeps, decoder timing, training curves and
//! bound checks, written as CSV plus a JSON sidecar.

pub mod bounds;
pub mod config;
pub mod nmse;
pub mod output;
pub mod selftest;
pub mod tasks;
pub mod timing;
pub mod train;

use anyhow::Result;

use config::{CommandKind, ExperimentSpec};
use output::Report;

/// A rayon pool with `threads` workers (0: rayon's default).
pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Run the command named in `spec`.
pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    match spec.command {
        CommandKind::NmseSweep => nmse::cmd_nmse_sweep(spec),
        CommandKind::Timing => timing::cmd_timing(spec),
        CommandKind::Train => train::cmd_train(spec),
        CommandKind::Bounds => bounds::cmd_bounds(spec),
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
