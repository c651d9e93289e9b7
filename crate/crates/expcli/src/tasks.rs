//! Federations shared by `train`, `bounds` and the acceptance checks.

use anyhow::{Context, Result};
use orthofl::bounds::BoundParams;
use orthofl::dataio::{make_split, mnist_dataset, synth_quadratic, MnistFiles, SyntheticQuadratic};
use orthofl::fl::{estimate_grad_bound, Federation, ModelVector, ReceiverKind, Schedule};
use orthofl::objectives::{quadratic_constants, Dataset, Objective, QuadraticConstants};
use orthofl::rng::{derive_seed, stream, Purpose};
use orthofl::SystemConfig;

use crate::config::{ExperimentSpec, StepRule, Task};

/// Master seed of repeat `r`: its SGD, channel and noise streams, and for
/// the SVM task its data split, all hang off this value.
pub fn repeat_seed(master: u64, r: u64) -> u64 {
    derive_seed(master, Purpose::Sgd, &[r])
}

/// The least-squares task with exact constants and a measured `H`.
#[derive(Debug, Clone)]
pub struct QuadraticSetup {
    pub fed: Federation,
    pub consts: QuadraticConstants,
    pub params: BoundParams,
    pub schedule: Schedule,
}

/// Build the quadratic task for one `(M, K, SNR)` cell.
///
/// The data depends on `K` and the master seed only. `H` is the largest
/// mini-batch gradient norm over `prerun_repeats` independent random-
/// orthogonalization runs of `rounds` rounds, times `grad_inflation`.
pub fn quadratic_setup(spec: &ExperimentSpec, antennas: usize, clients: usize, snr_db: f64, rounds: u64) -> Result<QuadraticSetup> {
    let q = &spec.quadratic;
    let shape = SyntheticQuadratic {
        clients,
        dim: q.dim,
        samples_per_client: q.samples_per_client,
        condition: q.condition,
        noise_std: q.noise_std,
        lambda: spec.train.lambda,
    };
    let (shards, objective, _) = synth_quadratic(&shape, &mut stream(spec.seed, Purpose::Data, &[clients as u64]))?;
    let consts = quadratic_constants(&objective, &shards)?;
    let system = SystemConfig::builder(antennas, clients, q.dim, snr_db).seed(spec.seed).build()?;
    let fed = Federation::new(objective, shards, None, system, ReceiverKind::RandomOrthogonalization)?
        .with_batch_size(q.batch_size)
        .with_local_steps(spec.train.local_steps)
        .with_reference(consts.w_star.clone());
    let schedule = Schedule::Decaying { mu: consts.mu, gamma: spec.train.gamma };
    let init = ModelVector::zeros(q.dim);
    let grad_bound = estimate_grad_bound(&fed, &init, schedule, rounds, q.prerun_repeats, q.grad_inflation)
        .context("pre-run for the gradient bound failed")?;
    let params = BoundParams {
        mu: consts.mu,
        lip: consts.lip,
        grad_bound,
        clients,
        antennas,
        snr: system.snr(),
        gamma: spec.train.gamma,
        w0_dist_sq: init.dist_sq(&consts.w_star),
    };
    params.validate()?;
    Ok(QuadraticSetup { fed, consts, params, schedule })
}

/// Load the parity-labelled MNIST pool named by `train.data_dir`.
pub fn load_svm_data(spec: &ExperimentSpec) -> Result<Dataset> {
    let t = &spec.train;
    let files = MnistFiles::in_dir(&t.data_dir)
        .with_context(|| format!("no MNIST data for the svm-mnist task; set train.data_dir (now {})", t.data_dir.display()))?;
    mnist_dataset(&files, t.bias).with_context(|| format!("loading MNIST from {}", t.data_dir.display()))
}

/// The parity SVM for repeat `r`, with its own data split of `data`.
pub fn svm_setup(spec: &ExperimentSpec, data: &Dataset, antennas: usize, clients: usize, snr_db: f64, r: u64) -> Result<(Federation, Schedule)> {
    let t = &spec.train;
    let seed = repeat_seed(spec.seed, r);
    let split = make_split(data, clients, t.per_client, t.test_size, &mut stream(seed, Purpose::Data, &[]))?;
    let system = SystemConfig::builder(antennas, clients, data.dim(), snr_db).seed(seed).build()?;
    let fed = Federation::new(Objective::hinge(t.lambda), split.clients, Some(split.test), system, ReceiverKind::Ideal)?
        .with_batch_size(t.batch_size)
        .with_local_steps(t.local_steps);
    let schedule = match t.step_rule {
        StepRule::Constant => Schedule::Constant { eta: t.eta },
        StepRule::Decaying => Schedule::Decaying { mu: t.lambda, gamma: t.gamma },
    };
    Ok((fed, schedule))
}

pub fn is_quadratic(spec: &ExperimentSpec) -> bool {
    spec.train.task == Task::Quadratic
}
