use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use orthofl::fl::ReceiverKind;
use orthofl_cli::config::{CommandKind, ExperimentSpec};
use orthofl_cli::output::write_artifacts;
use orthofl_cli::selftest::{self, Hooks};
use orthofl_cli::timing::render_table;

#[derive(Parser)]
#[command(name = "orthofl", version, about = "Massive-MIMO over-the-air aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE of the aggregated sum versus SNR, per receiver, with CRLB floors.
    NmseSweep(Common),
    /// Decode-only CPU time of RO against MMSE.
    Timing(Common),
    /// Federated training curves (svm-mnist or quadratic task).
    Train(Common),
    /// Convergence bound, B table and SINR columns.
    Bounds(Common),
    /// Fast statistical invariant checks.
    Selftest {
        /// Flip the sign of the projection (mutation check; must fail).
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the built-in defaults.
    #[arg(long, env = "ORTHOFL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "ORTHOFL_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "ORTHOFL_TRIALS")]
    trials: Option<u64>,
    #[arg(long, env = "ORTHOFL_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores. Ignored by `timing`.
    #[arg(long, env = "ORTHOFL_THREADS")]
    threads: Option<usize>,
    /// Comma-separated subset of ideal, ro, mmse.
    #[arg(long, env = "ORTHOFL_RECEIVERS", value_delimiter = ',')]
    receivers: Option<Vec<ReceiverKind>>,
}

impl Common {
    fn resolve(self, command: CommandKind) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::load(command, self.config.as_deref())?;
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.out {
            spec.out = v;
        }
        if let Some(v) = self.threads {
            spec.threads = v;
        }
        if let Some(v) = self.receivers {
            spec.receivers = v;
        }
        spec.validate()?;
        spec.prepare_output()?;
        Ok(spec)
    }
}

fn experiment(command: CommandKind, args: Common) -> Result<bool> {
    let spec = args.resolve(command)?;
    let report = orthofl_cli::run(&spec)?;
    let (csv, json) = write_artifacts(&spec.out, command.name(), &report, &spec)?;
    if command == CommandKind::Timing {
        print!("{}", render_table(&report));
    }
    println!("wrote {} and {}", csv.display(), json.display());
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::NmseSweep(a) => experiment(CommandKind::NmseSweep, a),
        Command::Timing(a) => experiment(CommandKind::Timing, a),
        Command::Train(a) => experiment(CommandKind::Train, a),
        Command::Bounds(a) => experiment(CommandKind::Bounds, a),
        Command::Selftest { inject_sign_error } => selftest::run(Hooks { inject_sign_error }).map_err(Into::into).map(|checks| {
            for c in &checks {
                println!("{c}");
            }
            checks.iter().all(|c| c.passed)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
