use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{normalize, ModelVector};
use crate::bounds::learning_rate;
use crate::channel::{draw_channel, transmit};
use crate::dataio::shuffled_indices;
use crate::error::{Error, Result};
use crate::objectives::{accuracy, loss, minibatch_gradient, Dataset, Objective, ObjectiveKind};
use crate::receivers::{ro_aggregate, MmseDecoder};
use crate::rng::{derive_seed, stream, Purpose};
use crate::system::SystemConfig;

/// How the server recovers `sum_k x_k` from the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    /// Exact sum, no channel at all.
    Ideal,
    #[serde(rename = "ro", alias = "random-orthogonalization")]
    RandomOrthogonalization,
    Mmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [ReceiverKind::Ideal, ReceiverKind::RandomOrthogonalization, ReceiverKind::Mmse];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Ideal => "ideal",
            ReceiverKind::RandomOrthogonalization => "ro",
            ReceiverKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(ReceiverKind::Ideal),
            "ro" | "random-orthogonalization" => Ok(ReceiverKind::RandomOrthogonalization),
            "mmse" => Ok(ReceiverKind::Mmse),
            other => Err(Error::InvalidConfig(format!("unknown receiver '{other}' (expected ideal, ro or mmse)"))),
        }
    }
}

/// Result of one client's local SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub model: ModelVector,
    /// `||g||^2` of the first mini-batch gradient, taken at the global model.
    pub first_grad_sq: f64,
    /// Largest mini-batch gradient norm seen over the `E` steps.
    pub max_grad_norm: f64,
}

/// `E` mini-batch SGD steps from `w_global`.
///
/// Batches are drawn without replacement from a fresh permutation of the
/// local rows; when fewer than `batch_size` rows remain the permutation is
/// redrawn. A batch size of at least the local dataset size means full-batch
/// gradient descent and consumes no randomness.
pub fn local_update<R: rand::RngCore + ?Sized>(
    obj: &Objective,
    w_global: &ModelVector,
    data: &Dataset,
    local_steps: usize,
    batch_size: usize,
    eta: f64,
    rng: &mut R,
) -> Result<LocalUpdate> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if local_steps == 0 || batch_size == 0 {
        return Err(Error::InvalidConfig("local steps and batch size must be positive".into()));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidConfig(format!("learning rate must be finite and >= 0, got {eta}")));
    }
    let n = data.len();
    let full: Vec<usize> = (0..n).collect();
    let mut perm = Vec::new();
    let mut pos = 0;
    let mut w = w_global.as_slice().to_vec();
    let mut first_grad_sq = 0.0;
    let mut max_grad_norm: f64 = 0.0;
    for step in 0..local_steps {
        let batch: &[usize] = if batch_size >= n {
            &full
        } else {
            if step == 0 || pos + batch_size > n {
                perm = shuffled_indices(n, rng);
                pos = 0;
            }
            pos += batch_size;
            &perm[pos - batch_size..pos]
        };
        let g = minibatch_gradient(obj, &w, data, batch)?;
        let g_sq: f64 = g.iter().map(|v| v * v).sum();
        if step == 0 {
            first_grad_sq = g_sq;
        }
        max_grad_norm = max_grad_norm.max(g_sq.sqrt());
        if eta > 0.0 {
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= eta * gi;
            }
        }
    }
    Ok(LocalUpdate { model: ModelVector::new(w)?, first_grad_sq, max_grad_norm })
}

/// Everything that stays fixed over a training run.
#[derive(Debug, Clone)]
pub struct Federation {
    pub objective: Objective,
    pub clients: Vec<Dataset>,
    /// Held-out set; accuracy is reported for the hinge objective and the
    /// loss otherwise.
    pub test: Option<Dataset>,
    pub batch_size: usize,
    pub local_steps: usize,
    pub system: SystemConfig,
    pub receiver: ReceiverKind,
    /// Optional minimizer; when set traces carry `||w_{t+1} - w*||^2`.
    pub reference: Option<Vec<f64>>,
    train_union: Dataset,
}

impl Federation {
    /// Checks that there is one equal-size shard per client and that the
    /// model dimension matches the data.
    pub fn new(
        objective: Objective,
        clients: Vec<Dataset>,
        test: Option<Dataset>,
        system: SystemConfig,
        receiver: ReceiverKind,
    ) -> Result<Self> {
        if clients.len() != system.clients() {
            return Err(Error::DimensionMismatch { what: "client shards", expected: system.clients(), found: clients.len() });
        }
        let dim = system.model_dim();
        for c in clients.iter().chain(test.iter()) {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { what: "feature dimension", expected: dim, found: c.dim() });
            }
            if c.is_empty() {
                return Err(Error::EmptyDataset);
            }
        }
        let size = clients[0].len();
        if let Some(c) = clients.iter().find(|c| c.len() != size) {
            return Err(Error::InvalidConfig(format!(
                "equal weighting needs equal shards, found sizes {size} and {}",
                c.len()
            )));
        }
        let train_union = Dataset::concat(&clients)?;
        Ok(Federation {
            objective,
            clients,
            test,
            batch_size: size,
            local_steps: 1,
            system,
            receiver,
            reference: None,
            train_union,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_local_steps(mut self, local_steps: usize) -> Self {
        self.local_steps = local_steps;
        self
    }

    pub fn with_reference(mut self, w_star: Vec<f64>) -> Self {
        self.reference = Some(w_star);
        self
    }

    pub fn with_receiver(mut self, receiver: ReceiverKind) -> Self {
        self.receiver = receiver;
        self
    }

    pub fn with_system(mut self, system: SystemConfig) -> Self {
        self.system = system;
        self
    }

    pub fn train_union(&self) -> &Dataset {
        &self.train_union
    }

    pub fn test_metric(&self, w: &[f64]) -> Result<Option<f64>> {
        match &self.test {
            None => Ok(None),
            Some(t) if self.objective.kind == ObjectiveKind::HingeSvm => accuracy(w, t).map(Some),
            Some(t) => loss(&self.objective, w, t).map(Some),
        }
    }
}

/// Per-round diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u64,
    pub eta: f64,
    /// `eta > 1/(2 mu)` under a decaying schedule.
    pub eta_violation: bool,
    pub true_sum: Vec<f64>,
    pub est_sum: Vec<f64>,
    /// `||true_sum - est_sum||^2 / d`.
    pub agg_mse: f64,
    /// Training loss at `w_{t+1}` over all client data.
    pub global_loss: f64,
    pub test_metric: Option<f64>,
    pub decode_time_ns: u64,
    /// `||w_{t+1} - wbar_{t+1}||^2`, the deviation from the error-free update.
    pub channel_error_sq: f64,
    /// `sum_k ||g_k||^2` of the first local gradients.
    pub grad_sq_sum: f64,
    pub max_grad_norm: f64,
    /// `||w_{t+1} - w*||^2` when a reference is known.
    pub dist_sq: Option<f64>,
}

impl RoundTrace {
    /// Copy with the wall-clock field zeroed, for comparing runs.
    pub fn without_timing(&self) -> RoundTrace {
        RoundTrace { decode_time_ns: 0, ..self.clone() }
    }
}

/// Training state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FlState {
    pub model: ModelVector,
    /// Index of the next round.
    pub round: u64,
}

impl FlState {
    pub fn new(model: ModelVector) -> Self {
        FlState { model, round: 0 }
    }
}

/// A round that failed, with enough context to reproduce it.
#[derive(Debug, thiserror::Error)]
#[error("round {round} with receiver {receiver} failed: {source}")]
pub struct RoundError {
    pub round: u64,
    pub receiver: ReceiverKind,
    #[source]
    pub source: Error,
}

/// One synchronous round.
///
/// Client `k` draws its batches from `stream(seed, Sgd, [t, k])`; the round's
/// channel and noise come from `stream(seed, Channel, [t])` and
/// `stream(seed, Noise, [t])`, so two receivers run with the same seed see
/// the same channel.
///
/// Clients send `x_k = w^k_{t+1} - w_t` and the server applies
/// `w_{t+1} = w_t + est_sum / K`; with an exact sum this is plain averaging of
/// the local models.
pub fn run_round(fed: &Federation, state: &FlState, eta: f64, eta_violation: bool) -> Result<(FlState, RoundTrace), RoundError> {
    let fail = |source| RoundError { round: state.round, receiver: fed.receiver, source };
    run_round_inner(fed, state, eta, eta_violation).map_err(fail)
}

fn run_round_inner(fed: &Federation, state: &FlState, eta: f64, eta_violation: bool) -> Result<(FlState, RoundTrace)> {
    let cfg = &fed.system;
    let seed = cfg.master_seed();
    let t = state.round;
    let k_count = fed.clients.len();
    let d = cfg.model_dim();
    let w = state.model.as_slice();
    if w.len() != d {
        return Err(Error::DimensionMismatch { what: "global model", expected: d, found: w.len() });
    }

    let mut differentials = Vec::with_capacity(k_count);
    let mut grad_sq_sum = 0.0;
    let mut max_grad_norm: f64 = 0.0;
    for (k, data) in fed.clients.iter().enumerate() {
        let mut rng = stream(seed, Purpose::Sgd, &[t, k as u64]);
        let up = local_update(&fed.objective, &state.model, data, fed.local_steps, fed.batch_size, eta, &mut rng)?;
        grad_sq_sum += up.first_grad_sq;
        max_grad_norm = max_grad_norm.max(up.max_grad_norm);
        let x: Vec<f64> = up.model.as_slice().iter().zip(w).map(|(a, b)| a - b).collect();
        differentials.push(ModelVector::new(x)?);
    }
    let true_sum: Vec<f64> = (0..d).map(|i| differentials.iter().map(|x| x.as_slice()[i]).sum()).collect();

    let mut decode_time_ns = 0;
    let est_sum = match fed.receiver {
        ReceiverKind::Ideal => true_sum.clone(),
        rx => {
            let (scaled, norm) = normalize(&differentials);
            let channel = draw_channel(cfg, &mut stream(seed, Purpose::Channel, &[t]));
            let mut noise = stream(seed, Purpose::Noise, &[t]);
            let decoder = match rx {
                ReceiverKind::Mmse => Some(MmseDecoder::new(channel.per_user(), cfg.snr(), cfg.power())?),
                _ => None,
            };
            let mut est = Vec::with_capacity(d);
            let mut symbols = vec![0.0; k_count];
            for i in 0..d {
                for (s, x) in symbols.iter_mut().zip(&scaled) {
                    *s = x[i];
                }
                let y = transmit(&channel, &symbols, cfg, &mut noise)?;
                let value = match &decoder {
                    Some(dec) => {
                        let start = std::time::Instant::now();
                        let v: f64 = dec.decode(&y)?.iter().sum();
                        decode_time_ns += start.elapsed().as_nanos() as u64;
                        v
                    }
                    None => {
                        let a = ro_aggregate(&y, channel.sum_estimate(), cfg.power(), None)?;
                        decode_time_ns += a.decode_time_ns;
                        a.value
                    }
                };
                est.push(norm.denormalize(value));
            }
            est
        }
    };

    let inv_k = 1.0 / k_count as f64;
    let next: Vec<f64> = w.iter().zip(&est_sum).map(|(wi, s)| wi + inv_k * s).collect();
    let ideal_next: Vec<f64> = w.iter().zip(&true_sum).map(|(wi, s)| wi + inv_k * s).collect();
    let channel_error_sq: f64 = next.iter().zip(&ideal_next).map(|(a, b)| (a - b) * (a - b)).sum();
    let agg_mse = true_sum.iter().zip(&est_sum).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d as f64;
    let model = ModelVector::new(next)?;

    let trace = RoundTrace {
        round: t,
        eta,
        eta_violation,
        global_loss: loss(&fed.objective, model.as_slice(), &fed.train_union)?,
        test_metric: fed.test_metric(model.as_slice())?,
        dist_sq: fed.reference.as_ref().map(|r| model.dist_sq(r)),
        true_sum,
        est_sum,
        agg_mse,
        decode_time_ns,
        channel_error_sq,
        grad_sq_sum,
        max_grad_norm,
    };
    Ok((FlState { model, round: t + 1 }, trace))
}

/// Step size per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Schedule {
    Constant { eta: f64 },
    /// `eta_t = 2 / (mu (t + gamma))` with round index `t` starting at 0.
    Decaying { mu: f64, gamma: f64 },
}

impl Schedule {
    /// Step size for round `t` and whether it breaks `eta <= 1/(2 mu)`.
    pub fn at(&self, t: u64) -> (f64, bool) {
        match *self {
            Schedule::Constant { eta } => (eta, false),
            Schedule::Decaying { mu, gamma } => {
                let s = learning_rate(t, mu, gamma);
                (s.eta, s.violates_lemma)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub traces: Vec<RoundTrace>,
    pub final_model: ModelVector,
}

/// Failure part-way through training; the completed rounds are kept.
#[derive(Debug, thiserror::Error)]
#[error("training stopped after {} rounds: {source}", partial.len())]
pub struct TrainingError {
    pub partial: Vec<RoundTrace>,
    pub last_model: ModelVector,
    #[source]
    pub source: RoundError,
}

/// Run `rounds` rounds from `init`.
pub fn run_training(fed: &Federation, init: ModelVector, schedule: Schedule, rounds: u64) -> Result<TrainingRun, TrainingError> {
    let mut state = FlState::new(init);
    let mut traces = Vec::with_capacity(rounds as usize);
    for t in 0..rounds {
        let (eta, violation) = schedule.at(t);
        match run_round(fed, &state, eta, violation) {
            Ok((next, trace)) => {
                state = next;
                traces.push(trace);
            }
            Err(source) => return Err(TrainingError { partial: traces, last_model: state.model, source }),
        }
    }
    Ok(TrainingRun { traces, final_model: state.model })
}

/// Estimate the gradient-norm bound `H` as `inflation` times the largest
/// mini-batch gradient norm seen in a pre-run of `fed`.
///
/// The pre-run repeats training `repeats` times with master seeds derived
/// from `fed`'s seed, so it never shares draws with runs seeded directly.
pub fn estimate_grad_bound(
    fed: &Federation,
    init: &ModelVector,
    schedule: Schedule,
    rounds: u64,
    repeats: u64,
    inflation: f64,
) -> Result<f64, TrainingError> {
    let mut max: f64 = 0.0;
    for r in 0..repeats {
        let seed = derive_seed(fed.system.master_seed(), Purpose::Sgd, &[u64::MAX, r]);
        let pre = fed.clone().with_system(fed.system.with_seed(seed));
        let run = run_training(&pre, init.clone(), schedule, rounds)?;
        max = run.traces.iter().map(|t| t.max_grad_norm).fold(max, f64::max);
    }
    Ok(inflation * max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::full_gradient;

    fn quad_data(rows: &[[f64; 2]], targets: &[f64]) -> Dataset {
        Dataset::regression(rows.iter().flatten().copied().collect(), 2, targets.to_vec()).unwrap()
    }

    fn fed(receiver: ReceiverKind, snr_db: f64) -> Federation {
        let a = quad_data(&[[1.0, 0.5], [0.0, 1.0], [2.0, -1.0]], &[1.0, 2.0, 0.0]);
        let b = quad_data(&[[-1.0, 0.0], [0.5, 0.5], [1.0, 1.0]], &[0.0, 1.0, 3.0]);
        let cfg = SystemConfig::builder(32, 2, 2, snr_db).seed(9).build().unwrap();
        Federation::new(Objective::quadratic(0.0), vec![a, b], None, cfg, receiver).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let f = fed(ReceiverKind::Ideal, 10.0);
        let w = ModelVector::new(vec![0.3, -0.2]).unwrap();
        let up = local_update(&f.objective, &w, &f.clients[0], 3, 2, 0.0, &mut stream(0, Purpose::Sgd, &[])).unwrap();
        assert_eq!(up.model, w);
    }

    #[test]
    fn full_batch_step_is_gradient_step() {
        let f = fed(ReceiverKind::Ideal, 10.0);
        let w = ModelVector::new(vec![0.3, -0.2]).unwrap();
        let up = local_update(&f.objective, &w, &f.clients[0], 1, 100, 0.1, &mut stream(0, Purpose::Sgd, &[])).unwrap();
        let g = full_gradient(&f.objective, w.as_slice(), &f.clients[0]).unwrap();
        for i in 0..2 {
            assert_eq!(up.model.as_slice()[i], w.as_slice()[i] - 0.1 * g[i]);
        }
    }

    #[test]
    fn bad_local_settings_rejected() {
        let f = fed(ReceiverKind::Ideal, 10.0);
        let w = ModelVector::zeros(2);
        let mut rng = stream(0, Purpose::Sgd, &[]);
        assert!(local_update(&f.objective, &w, &f.clients[0], 0, 1, 0.1, &mut rng).is_err());
        assert!(local_update(&f.objective, &w, &f.clients[0], 1, 1, -0.1, &mut rng).is_err());
        assert!(matches!(f.clients[0].subset(&[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn ideal_round_averages_local_models() {
        let f = fed(ReceiverKind::Ideal, 10.0);
        let state = FlState::new(ModelVector::new(vec![0.1, 0.1]).unwrap());
        let (next, trace) = run_round(&f, &state, 0.05, false).unwrap();
        let mut avg = [0.0; 2];
        for c in &f.clients {
            let g = full_gradient(&f.objective, state.model.as_slice(), c).unwrap();
            for i in 0..2 {
                avg[i] += 0.5 * (state.model.as_slice()[i] - 0.05 * g[i]);
            }
        }
        for i in 0..2 {
            assert!((next.model.as_slice()[i] - avg[i]).abs() < 1e-15);
        }
        assert_eq!(trace.agg_mse, 0.0);
        assert_eq!(trace.channel_error_sq, 0.0);
        assert_eq!(next.round, 1);
    }

    #[test]
    fn channel_error_matches_sum_error() {
        for rx in [ReceiverKind::RandomOrthogonalization, ReceiverKind::Mmse] {
            let f = fed(rx, 5.0);
            let (_, tr) = run_round(&f, &FlState::new(ModelVector::zeros(2)), 0.1, false).unwrap();
            let direct: f64 = tr.true_sum.iter().zip(&tr.est_sum).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 4.0;
            assert!(tr.agg_mse > 0.0);
            assert!((tr.channel_error_sq - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
    }

    #[test]
    fn deterministic_and_empty_training() {
        let f = fed(ReceiverKind::RandomOrthogonalization, 10.0);
        let sched = Schedule::Constant { eta: 0.1 };
        let a = run_training(&f, ModelVector::zeros(2), sched, 5).unwrap();
        let b = run_training(&f, ModelVector::zeros(2), sched, 5).unwrap();
        let strip = |r: &TrainingRun| r.traces.iter().map(RoundTrace::without_timing).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.final_model, b.final_model);
        let none = run_training(&f, ModelVector::new(vec![1.0, 2.0]).unwrap(), sched, 0).unwrap();
        assert!(none.traces.is_empty());
        assert_eq!(none.final_model.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn decaying_schedule_flags_early_rounds() {
        let s = Schedule::Decaying { mu: 1.0, gamma: 2.0 };
        assert_eq!(s.at(0), (1.0, true));
        assert_eq!(s.at(2), (0.5, false));
    }

    #[test]
    fn receiver_names_round_trip() {
        for rx in ReceiverKind::ALL {
            assert_eq!(rx.name().parse::<ReceiverKind>().unwrap(), rx);
        }
        assert!("zf".parse::<ReceiverKind>().is_err());
    }
}
