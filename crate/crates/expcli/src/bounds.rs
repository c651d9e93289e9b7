//! Convergence bound, `B` table and SINR checks.

use anyhow::Result;
use orthofl::bounds::{b_factor, theorem1_bound};
use orthofl::receivers::{high_snr_sir, sinr_analytic, sinr_empirical};
use orthofl::rng::{stream, Purpose};
use orthofl::stats::{db, from_db};
use orthofl::SystemConfig;
use serde_json::json;

use crate::config::ExperimentSpec;
use crate::output::{Report, ResultRow};
use crate::tasks::quadratic_setup;

pub const EXPERIMENT: &str = "bounds";

pub fn cmd_bounds(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let b = &spec.bounds;
    let mut report = Report::default();
    let mut params = Vec::new();
    for (m, k, snr_db) in spec.grid.cells() {
        let row = |metric: &str, value: f64, trials: u64| {
            ResultRow::new(EXPERIMENT, metric, value, trials, spec.seed).cell(m, k, Some(snr_db))
        };
        match quadratic_setup(spec, m, k, snr_db, b.rounds) {
            Ok(setup) => {
                for t in 1..=b.rounds {
                    report.rows.push(row("theorem1_bound", theorem1_bound(t, &setup.params), 1).step(t));
                }
                params.push(json!({"M": m, "K": k, "snr_db": snr_db, "params": setup.params, "f_star": setup.consts.f_star}));
            }
            Err(e) => report.failures.push(format!("cell M={m} K={k} snr_db={snr_db}: {e:#}")),
        }

        let snr = from_db(snr_db);
        let analytic = sinr_analytic(m, k, snr);
        report.rows.push(row("sinr_analytic", analytic, 1));
        report.rows.push(row("sinr_analytic_db", db(analytic), 1));
        let cfg = SystemConfig::builder(m, k, 1, snr_db).seed(spec.seed).build()?;
        let emp = sinr_empirical(&cfg, spec.trials, &mut stream(spec.seed, Purpose::Channel, &[m as u64, k as u64]));
        report.rows.push(row("sinr_empirical", emp.empirical, spec.trials));
        report.rows.push(row("sinr_empirical_db", db(emp.empirical), spec.trials));
        if k > 1 {
            let (sir, inverse) = high_snr_sir(m, k);
            report.rows.push(row("high_snr_sir", sir, 1));
            report.rows.push(row("high_snr_sir_inverse", inverse, 1));
        }
    }
    for &k in &b.b_clients {
        for &m in &b.b_antennas {
            for &s in &b.b_snr_db {
                let ratio = b_factor(k, m, from_db(s), 1.0) * k as f64;
                report.rows.push(ResultRow::new(EXPERIMENT, "b_over_h2_per_k", ratio, 1, spec.seed).cell(m, k, Some(s)));
            }
        }
    }
    report.summary.insert("bound_params".into(), json!(params));
    report.summary.insert(
        "b_table".into(),
        json!("b_over_h2_per_k = B / (H^2 / K) = 1 + (K + 1/snr) / M, independent of H"),
    );
    Ok(report)
}
