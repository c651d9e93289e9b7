//! Monte-Carlo NMSE of the aggregated sum per receiver, with CRLB floors.
//!
//! Trial `t` of cell `(M, K)` draws its channel, symbols and unit noise from
//! streams keyed by `(M, K, t)` only, so every SNR and every receiver sees
//! the same draws and the curves differ by the noise scale alone.

use anyhow::Result;
use num_complex::Complex64;
use orthofl::bounds::crlb;
use orthofl::channel::{complex_gaussian, draw_channel, superpose};
use orthofl::fl::ReceiverKind;
use orthofl::receivers::{ro_aggregate, MmseDecoder};
use orthofl::rng::{stream, Purpose};
use orthofl::stats::{db, RunningStats};
use orthofl::SystemConfig;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentSpec;
use crate::output::{Report, ResultRow};

pub const EXPERIMENT: &str = "nmse-sweep";

/// Per-trial squared errors, summed over the trial's slots.
#[derive(Debug, Clone, Copy, Default)]
struct Trial {
    truth_sq: f64,
    /// `sum_k x_k^2`, the normalizer for per-client decoding.
    symbols_sq: f64,
    ro: f64,
    mmse: f64,
    mmse_users: f64,
    crlb_sum: f64,
    crlb_trace: f64,
}

fn run_trial(m: usize, k: usize, snr_db: f64, t: u64, slots: usize, seed: u64, want_mmse: bool) -> orthofl::Result<Trial> {
    let cfg = SystemConfig::builder(m, k, 1, snr_db).seed(seed).build()?;
    let key = [m as u64, k as u64, t];
    let h = draw_channel(&cfg, &mut stream(seed, Purpose::Channel, &key));
    let mut symbols = stream(seed, Purpose::Symbols, &key);
    let mut noise = stream(seed, Purpose::Noise, &key);
    let sigma = cfg.noise_variance().sqrt();
    let decoder = if want_mmse { Some(MmseDecoder::new(h.per_user(), cfg.snr(), cfg.power())?) } else { None };
    let floor = crlb(h.per_user(), cfg.snr())?;
    let mut out = Trial { crlb_sum: floor.sum_floor * slots as f64, crlb_trace: floor.mse_floor * slots as f64, ..Trial::default() };
    for _ in 0..slots {
        let x: Vec<f64> = (0..k).map(|_| symbols.sample(StandardNormal)).collect();
        let truth: f64 = x.iter().sum();
        let mut y = superpose(&h, &x, cfg.power())?;
        for v in y.iter_mut() {
            *v += complex_gaussian(&mut noise, 1.0) * Complex64::new(sigma, 0.0);
        }
        out.truth_sq += truth * truth;
        out.symbols_sq += x.iter().map(|v| v * v).sum::<f64>();
        let ro = ro_aggregate(&y, h.sum_estimate(), cfg.power(), None)?.value;
        out.ro += (ro - truth).powi(2);
        if let Some(dec) = &decoder {
            let xh = dec.decode(&y)?;
            out.mmse += (xh.iter().sum::<f64>() - truth).powi(2);
            out.mmse_users += xh.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(out)
}

pub fn cmd_nmse_sweep(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let want_ro = spec.receivers.contains(&ReceiverKind::RandomOrthogonalization);
    let want_mmse = spec.receivers.contains(&ReceiverKind::Mmse);
    let slots = spec.sweep.slots_per_trial;
    let cells = spec.grid.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();
    let results: Vec<Result<Trial, String>> = crate::pool(spec.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let (m, k, s) = cells[c];
                run_trial(m, k, s, t, slots, spec.seed, want_mmse).map_err(|e| format!("trial {t}: {e}"))
            })
            .collect()
    });

    let mut report = Report::default();
    let mut gaps = Vec::new();
    for (c, chunk) in results.chunks(spec.trials as usize).enumerate() {
        let (m, k, snr_db) = cells[c];
        let errors: Vec<&String> = chunk.iter().filter_map(|r| r.as_ref().err()).collect();
        if let Some(first) = errors.first() {
            report.failures.push(format!("cell M={m} K={k} snr_db={snr_db}: {} failed trials, first: {first}", errors.len()));
            continue;
        }
        let trials: Vec<Trial> = chunk.iter().map(|r| *r.as_ref().unwrap()).collect();
        let row = |metric: &str, value: f64, receiver: &str| {
            ResultRow::new(EXPERIMENT, metric, value, spec.trials, spec.seed).cell(m, k, Some(snr_db)).receiver(receiver)
        };
        let per_slot = slots as f64;
        let truth: f64 = trials.iter().map(|t| t.truth_sq).sum();
        let stats = |f: fn(&Trial) -> f64| trials.iter().map(|t| f(t) / per_slot).collect::<RunningStats>();
        let symbols: f64 = trials.iter().map(|t| t.symbols_sq).sum();
        let mut push_estimator = |name: &str, s: RunningStats, floor: RunningStats, floor_name: &str, norm: f64| {
            report.rows.push(row("mse", s.mean(), name));
            report.rows.push(row("mse_std_error", s.std_error(), name));
            report.rows.push(row(floor_name, floor.mean(), name));
            report.rows.push(row("nmse_db", db(s.mean() * per_slot * trials.len() as f64 / norm), name));
        };
        let mut nmse = [f64::NAN; 2];
        if want_ro {
            push_estimator("ro", stats(|t| t.ro), stats(|t| t.crlb_sum), "crlb_sum_floor", truth);
            nmse[0] = trials.iter().map(|t| t.ro).sum::<f64>() / truth;
        }
        if want_mmse {
            push_estimator("mmse", stats(|t| t.mmse), stats(|t| t.crlb_sum), "crlb_sum_floor", truth);
            push_estimator("mmse-per-user", stats(|t| t.mmse_users), stats(|t| t.crlb_trace), "crlb_trace_floor", symbols);
            nmse[1] = trials.iter().map(|t| t.mmse).sum::<f64>() / truth;
        }
        let crlb_sum: f64 = trials.iter().map(|t| t.crlb_sum).sum();
        let crlb_trace: f64 = trials.iter().map(|t| t.crlb_trace).sum();
        report.rows.push(row("crlb_sum_nmse_db", db(crlb_sum / truth), ""));
        report.rows.push(row("crlb_trace_nmse_db", db(crlb_trace / symbols), ""));
        if want_ro && want_mmse {
            let gap = db(nmse[0]) - db(nmse[1]);
            report.rows.push(row("gap_ro_minus_mmse_db", gap, ""));
            gaps.push(json!({"M": m, "K": k, "snr_db": snr_db, "gap_db": gap}));
        }
    }
    let ignored: Vec<String> =
        spec.receivers.iter().filter(|r| **r == ReceiverKind::Ideal).map(|r| r.to_string()).collect();
    report.summary.insert(
        "nmse_definition".into(),
        json!({"sum": "sum over slots of (sum_k x_k - estimate)^2 / sum over slots of (sum_k x_k)^2",
               "per_user": "sum over slots of ||x - x_hat||^2 / sum over slots of ||x||^2",
               "symbols": "i.i.d. N(0, 1), P = 1"}),
    );
    report.summary.insert(
        "crlb_floors".into(),
        json!({"crlb_sum_floor": "1^T C 1, variance floor for unbiased estimates of the sum",
               "crlb_trace_floor": "trace C, floor for unbiased per-client decoding"}),
    );
    report.summary.insert("gaps".into(), json!(gaps));
    if !ignored.is_empty() {
        report.summary.insert("ignored_receivers".into(), json!(ignored));
    }
    Ok(report)
}
