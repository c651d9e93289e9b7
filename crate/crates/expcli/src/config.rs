//! Experiment specification: per-command defaults, overlaid by an optional
//! TOML file, overlaid by flags and `ORTHOFL_*` environment variables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use orthofl::fl::ReceiverKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    NmseSweep,
    Timing,
    Train,
    Bounds,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::NmseSweep => "nmse-sweep",
            CommandKind::Timing => "timing",
            CommandKind::Train => "train",
            CommandKind::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub antennas: Vec<usize>,
    pub clients: Vec<usize>,
    pub snr_db: Vec<f64>,
}

impl Grid {
    pub fn cells(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &m in &self.antennas {
            for &k in &self.clients {
                for &s in &self.snr_db {
                    out.push((m, k, s));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// Slots decoded per channel draw; each slot gets fresh symbols and noise.
    pub slots_per_trial: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SvmMnist,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Constant,
    /// `2 / (mu (t + gamma))` with `mu = lambda`.
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub task: Task,
    pub rounds: u64,
    /// Independent runs; each uses its own data split, SGD and channel seed.
    pub repeats: u64,
    pub local_steps: usize,
    pub batch_size: usize,
    /// Step rule of the SVM task. The quadratic task always decays with its
    /// exact `mu`.
    pub step_rule: StepRule,
    /// Step size of the constant rule.
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub data_dir: PathBuf,
    pub bias: bool,
    pub per_client: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticOptions {
    pub dim: usize,
    pub samples_per_client: usize,
    pub condition: f64,
    pub noise_std: f64,
    /// Mini-batch per client; the SVM task uses `train.batch_size`.
    pub batch_size: usize,
    /// Independent pre-runs, and the factor applied to their largest
    /// gradient norm, when measuring `H`.
    pub prerun_repeats: u64,
    pub grad_inflation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOptions {
    pub rounds: u64,
    /// `(K, M, SNR)` grid for the `B` table; `H = 1`.
    pub b_clients: Vec<usize>,
    pub b_antennas: Vec<usize>,
    pub b_snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: CommandKind,
    pub seed: u64,
    pub trials: u64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub receivers: Vec<ReceiverKind>,
    pub out: PathBuf,
    pub grid: Grid,
    pub sweep: SweepOptions,
    pub train: TrainOptions,
    pub quadratic: QuadraticOptions,
    pub bounds: BoundsOptions,
}

impl ExperimentSpec {
    pub fn defaults(command: CommandKind) -> Self {
        use ReceiverKind::*;
        let sweep_grid = Grid { antennas: vec![256, 512, 1024], clients: vec![8], snr_db: vec![-5.0, 0.0, 5.0, 10.0, 12.0, 15.0, 20.0] };
        let single = Grid { antennas: vec![256], clients: vec![8], snr_db: vec![10.0] };
        let (grid, receivers, trials) = match command {
            CommandKind::NmseSweep => (sweep_grid, vec![RandomOrthogonalization, Mmse], 2000),
            CommandKind::Timing => (Grid { snr_db: vec![10.0], ..sweep_grid }, vec![RandomOrthogonalization, Mmse], 2000),
            CommandKind::Train => (single, vec![Ideal, RandomOrthogonalization, Mmse], 1),
            CommandKind::Bounds => (single, vec![RandomOrthogonalization], 2000),
        };
        ExperimentSpec {
            command,
            seed: 1,
            trials,
            threads: 0,
            receivers,
            out: PathBuf::from("results"),
            grid,
            sweep: SweepOptions { slots_per_trial: 1 },
            train: TrainOptions {
                task: Task::SvmMnist,
                rounds: 100,
                repeats: 1,
                local_steps: 1,
                batch_size: 50,
                step_rule: StepRule::Constant,
                eta: 0.05,
                gamma: 4.0,
                lambda: 1e-3,
                data_dir: PathBuf::from("data/mnist"),
                bias: true,
                per_client: 500,
                test_size: 2000,
            },
            quadratic: QuadraticOptions {
                dim: 10,
                samples_per_client: 50,
                condition: 2.0,
                noise_std: 0.5,
                batch_size: 10,
                prerun_repeats: 20,
                grad_inflation: 1.2,
            },
            bounds: BoundsOptions {
                rounds: 200,
                b_clients: vec![1, 8, 64, 1024],
                b_antennas: vec![8, 64, 256, 1024],
                b_snr_db: vec![0.0, 10.0, 20.0, 100.0],
            },
        }
    }

    /// Defaults for `command` with the tables of a TOML file merged on top.
    /// The file may set any subset of keys; `command` itself is fixed.
    pub fn from_toml(command: CommandKind, text: &str) -> Result<Self> {
        let file: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        if file.contains_key("command") {
            bail!("`command` is chosen by the subcommand and cannot be set in the config file");
        }
        let mut base = toml::Table::try_from(Self::defaults(command))?;
        merge(&mut base, file);
        Ok(base.try_into().context("config does not match the experiment schema")?)
    }

    pub fn load(command: CommandKind, path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::defaults(command)),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(command, &text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.antennas.is_empty() || g.clients.is_empty() || g.snr_db.is_empty() {
            bail!("the (M, K, SNR) grid must not be empty");
        }
        if g.antennas.contains(&0) || g.clients.contains(&0) {
            bail!("antenna and client counts must be positive");
        }
        if let Some(s) = g.snr_db.iter().find(|s| !s.is_finite()) {
            bail!("SNR values must be finite dB numbers, got {s}");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.receivers.is_empty() {
            bail!("at least one receiver is required");
        }
        if self.sweep.slots_per_trial == 0 {
            bail!("slots_per_trial must be at least 1");
        }
        let t = &self.train;
        if t.repeats == 0 || t.local_steps == 0 || t.batch_size == 0 {
            bail!("train.repeats, train.local_steps and train.batch_size must be positive");
        }
        if !(t.eta > 0.0 && t.eta.is_finite()) {
            bail!("train.eta must be positive, got {}", t.eta);
        }
        if t.step_rule == StepRule::Decaying && t.task == Task::SvmMnist && !(t.lambda > 0.0) {
            bail!("the decaying step rule needs train.lambda > 0");
        }
        if !(t.gamma >= 0.0) || !(t.lambda >= 0.0) {
            bail!("train.gamma and train.lambda must be non-negative");
        }
        if self.quadratic.batch_size == 0 {
            bail!("quadratic.batch_size must be positive");
        }
        if self.quadratic.prerun_repeats == 0 || !(self.quadratic.grad_inflation >= 1.0) {
            bail!("quadratic.prerun_repeats must be positive and grad_inflation at least 1");
        }
        if self.bounds.rounds == 0 {
            bail!("bounds.rounds must be at least 1");
        }
        Ok(())
    }

    /// Create the output directory and make sure it accepts files.
    pub fn prepare_output(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating output directory {}", self.out.display()))?;
        let probe = self.out.join(".orthofl-write-test");
        std::fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", self.out.display()))?;
        std::fs::remove_file(&probe).ok();
        Ok(())
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
