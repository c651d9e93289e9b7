//! Decode-only CPU time of the two receivers.
//!
//! Inputs are generated up front, each decoder runs once over all of them
//! as warm-up, then a single `Instant` brackets each full loop over the
//! trials. The reported total is the fastest of [`PASSES`] such loops.
//! The MMSE side includes forming `H^H H`, factoring and solving; the RO
//! side is the projection onto the sum channel.

use std::hint::black_box;
use std::time::Instant;

use anyhow::Result;
use num_complex::Complex64;
use orthofl::channel::{complex_gaussian, draw_channel, superpose, ChannelRealization};
use orthofl::fl::ReceiverKind;
use orthofl::receivers::{project, MmseDecoder};
use orthofl::rng::{stream, Purpose};
use orthofl::SystemConfig;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::config::ExperimentSpec;
use crate::output::{Report, ResultRow};

pub const EXPERIMENT: &str = "timing";
pub const PASSES: usize = 5;

type Input = (ChannelRealization, orthofl::channel::CVector);

fn inputs(cfg: &SystemConfig, trials: u64) -> orthofl::Result<Vec<Input>> {
    let (m, k) = (cfg.antennas() as u64, cfg.clients() as u64);
    let sigma = cfg.noise_variance().sqrt();
    (0..trials)
        .map(|t| {
            let key = [m, k, t];
            let h = draw_channel(cfg, &mut stream(cfg.master_seed(), Purpose::Channel, &key));
            let mut sym = stream(cfg.master_seed(), Purpose::Symbols, &key);
            let x: Vec<f64> = (0..cfg.clients()).map(|_| sym.sample(StandardNormal)).collect();
            let mut noise = stream(cfg.master_seed(), Purpose::Noise, &key);
            let mut y = superpose(&h, &x, cfg.power())?;
            for v in y.iter_mut() {
                *v += complex_gaussian(&mut noise, 1.0) * sigma;
            }
            Ok((h, y))
        })
        .collect()
}

fn time_ro(inputs: &[Input]) -> u64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let start = Instant::now();
    for (h, y) in inputs {
        acc += project(black_box(y), black_box(h.sum_estimate()));
    }
    let ns = start.elapsed().as_nanos() as u64;
    black_box(acc);
    ns
}

fn time_mmse(inputs: &[Input], snr: f64, power: f64) -> orthofl::Result<u64> {
    let mut acc = 0.0;
    let start = Instant::now();
    for (h, y) in inputs {
        let dec = MmseDecoder::new(black_box(h.per_user()), snr, power)?;
        acc += dec.decode(black_box(y))?.iter().sum::<f64>();
    }
    let ns = start.elapsed().as_nanos() as u64;
    black_box(acc);
    Ok(ns)
}

/// Timing ignores `threads`: everything runs on the calling thread.
pub fn cmd_timing(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let want_ro = spec.receivers.contains(&ReceiverKind::RandomOrthogonalization);
    let want_mmse = spec.receivers.contains(&ReceiverKind::Mmse);
    let mut report = Report::default();
    let mut table = Vec::new();
    for (m, k, snr_db) in spec.grid.cells() {
        let cfg = SystemConfig::builder(m, k, 1, snr_db).seed(spec.seed).build()?;
        let data = inputs(&cfg, spec.trials)?;
        let row = |metric: &str, value: f64, receiver: &str| {
            ResultRow::new(EXPERIMENT, metric, value, spec.trials, spec.seed).cell(m, k, Some(snr_db)).receiver(receiver)
        };
        let mut ro_ns = None;
        let mut mmse_ns = None;
        if want_ro {
            time_ro(&data);
            let ns = (0..PASSES).map(|_| time_ro(&data)).min().unwrap_or(0);
            report.rows.push(row("total_cpu_s", ns as f64 * 1e-9, "ro").wall_time(ns));
            ro_ns = Some(ns);
        }
        if want_mmse {
            let measured = time_mmse(&data, cfg.snr(), cfg.power()).and_then(|_| {
                (0..PASSES).map(|_| time_mmse(&data, cfg.snr(), cfg.power())).try_fold(u64::MAX, |a, b| b.map(|b| a.min(b)))
            });
            match measured {
                Ok(ns) => {
                    report.rows.push(row("total_cpu_s", ns as f64 * 1e-9, "mmse").wall_time(ns));
                    mmse_ns = Some(ns);
                }
                Err(e) => report.failures.push(format!("cell M={m} K={k} snr_db={snr_db}: mmse: {e}")),
            }
        }
        let ratio = match (ro_ns, mmse_ns) {
            (Some(a), Some(b)) if b > 0 => {
                let r = a as f64 / b as f64;
                report.rows.push(row("ro_over_mmse", r, ""));
                Some(r)
            }
            _ => None,
        };
        table.push(json!({"M": m, "K": k, "snr_db": snr_db, "ro_ns": ro_ns, "mmse_ns": mmse_ns, "ratio": ratio}));
    }
    report.summary.insert(
        "method".into(),
        json!(format!("single thread, inputs pre-generated, one warm-up loop per decoder, fastest of {PASSES} timed loops")),
    );
    report.summary.insert("table".into(), json!(table));
    Ok(report)
}

/// Human-readable version of the timing rows.
pub fn render_table(report: &Report) -> String {
    let mut out = String::from("     M    K  RO total (s)  MMSE total (s)  RO/MMSE\n");
    let cells: Vec<_> = report.rows.iter().filter(|r| r.metric == "ro_over_mmse").collect();
    for r in cells {
        let time = |rx: &str| {
            report
                .find("total_cpu_s", |x| x.receiver == rx && x.antennas == r.antennas && x.clients == r.clients && x.snr_db == r.snr_db)
                .map_or(f64::NAN, |x| x.value)
        };
        out.push_str(&format!(
            "{:>6} {:>4} {:>13.6} {:>15.6} {:>7.3}%\n",
            r.antennas.unwrap_or(0),
            r.clients.unwrap_or(0),
            time("ro"),
            time("mmse"),
            100.0 * r.value
        ));
    }
    out
}
