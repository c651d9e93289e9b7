//! Federated training curves per receiver.
//!
//! Every receiver of a repeat shares the repeat's seed, so data split, SGD
//! batches, channels and noise are the same draws; only the decoding differs.

use anyhow::{bail, Result};
use orthofl::bounds::theorem1_bound;
use orthofl::fl::{run_training, Federation, ModelVector, ReceiverKind, RoundTrace, Schedule};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentSpec;
use crate::output::{Report, ResultRow};
use crate::tasks::{is_quadratic, load_svm_data, quadratic_setup, repeat_seed, svm_setup, QuadraticSetup};

pub const EXPERIMENT: &str = "train";

/// `eta^2 * (sum_k ||g_k||^2 / K^2) * (K + 1/snr) / M` for one round.
pub fn lemma_term(tr: &RoundTrace, clients: usize, antennas: usize, snr: f64) -> f64 {
    let k = clients as f64;
    tr.eta * tr.eta * tr.grad_sq_sum / (k * k) * (k + 1.0 / snr) / antennas as f64
}

fn mean_by_round(runs: &[Vec<RoundTrace>], f: impl Fn(&RoundTrace) -> f64) -> Vec<f64> {
    let rounds = runs[0].len();
    (0..rounds).map(|t| runs.iter().map(|r| f(&r[t])).sum::<f64>() / runs.len() as f64).collect()
}

pub fn cmd_train(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let t = &spec.train;
    let quadratic = is_quadratic(spec);
    let svm_data = if quadratic { None } else { Some(load_svm_data(spec)?) };
    let mut report = Report::default();
    let mut finals = Vec::new();
    for (m, k, snr_db) in spec.grid.cells() {
        let setup: Option<QuadraticSetup> = if quadratic { Some(quadratic_setup(spec, m, k, snr_db, t.rounds)?) } else { None };
        let mut feds: Vec<(Federation, Schedule)> = Vec::new();
        for r in 0..t.repeats {
            feds.push(match (&setup, &svm_data) {
                (Some(s), _) => {
                    let fed = s.fed.clone();
                    let sys = fed.system.with_seed(repeat_seed(spec.seed, r));
                    (fed.with_system(sys), s.schedule)
                }
                (None, Some(data)) => svm_setup(spec, data, m, k, snr_db, r)?,
                (None, None) => bail!("no task data"),
            });
        }
        let jobs: Vec<(ReceiverKind, usize)> =
            spec.receivers.iter().flat_map(|&rx| (0..feds.len()).map(move |r| (rx, r))).collect();
        let results: Vec<_> = crate::pool(spec.threads)?.install(|| {
            jobs.par_iter()
                .map(|&(rx, r)| {
                    let (fed, schedule) = &feds[r];
                    let fed = fed.clone().with_receiver(rx);
                    let init = ModelVector::zeros(fed.system.model_dim());
                    run_training(&fed, init, *schedule, t.rounds)
                })
                .collect()
        });
        let snr = feds[0].0.system.snr();
        for (i, &rx) in spec.receivers.iter().enumerate() {
            let chunk = &results[i * feds.len()..(i + 1) * feds.len()];
            if let Some(e) = chunk.iter().find_map(|r| r.as_ref().err()) {
                report.failures.push(format!("cell M={m} K={k} snr_db={snr_db}: {e}"));
                continue;
            }
            let runs: Vec<Vec<RoundTrace>> = chunk.iter().map(|r| r.as_ref().unwrap().traces.clone()).collect();
            if t.rounds == 0 {
                continue;
            }
            let row = |metric: &str, step: usize, value: f64| {
                ResultRow::new(EXPERIMENT, metric, value, t.repeats, spec.seed)
                    .cell(m, k, Some(snr_db))
                    .receiver(rx.name())
                    .step(step as u64 + 1)
            };
            let mut series: Vec<(&str, Vec<f64>)> = vec![
                ("eta", mean_by_round(&runs, |tr| tr.eta)),
                ("global_loss", mean_by_round(&runs, |tr| tr.global_loss)),
                ("agg_mse", mean_by_round(&runs, |tr| tr.agg_mse)),
                ("channel_error_sq", mean_by_round(&runs, |tr| tr.channel_error_sq)),
                ("lemma_term", mean_by_round(&runs, |tr| lemma_term(tr, k, m, snr))),
            ];
            if !quadratic {
                series.push(("test_accuracy", mean_by_round(&runs, |tr| tr.test_metric.unwrap_or(f64::NAN))));
            }
            let mut cell_summary = json!({"M": m, "K": k, "snr_db": snr_db, "receiver": rx.name()});
            if let Some(s) = &setup {
                let gap = mean_by_round(&runs, |tr| tr.global_loss - s.consts.f_star);
                let bound: Vec<f64> = (0..gap.len()).map(|i| theorem1_bound(i as u64 + 1, &s.params)).collect();
                let worst = gap.iter().zip(&bound).map(|(g, b)| g / b).fold(f64::NEG_INFINITY, f64::max);
                cell_summary["worst_gap_over_bound"] = json!(worst);
                cell_summary["bound_params"] = json!(s.params);
                cell_summary["f_star"] = json!(s.consts.f_star);
                series.push(("gap", gap));
                series.push(("theorem1_bound", bound));
                series.push(("dist_sq", mean_by_round(&runs, |tr| tr.dist_sq.unwrap_or(f64::NAN))));
            }
            let err: f64 = series[3].1.iter().sum();
            let term: f64 = series[4].1.iter().sum();
            cell_summary["channel_error_over_lemma_term"] = json!(err / term);
            for (name, values) in &series {
                let last = *values.last().unwrap();
                cell_summary[format!("final_{name}")] = json!(last);
                for (i, v) in values.iter().enumerate() {
                    report.rows.push(row(name, i, *v));
                }
            }
            finals.push(cell_summary);
        }
    }
    report.summary.insert("task".into(), json!(t.task));
    report.summary.insert("runs".into(), json!(finals));
    Ok(report)
}
