//! Acceptance criteria 1 to 12, one PASS/FAIL line each.
//!
//! Criteria that fail for reasons intrinsic to the model are still run at
//! their stated tolerance and reported; the binary exits nonzero only when
//! `ORTHOFL_ACCEPTANCE_STRICT` is set or a criterion panics.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use orthofl::bounds::crlb;
use orthofl::channel::{draw_channel, transmit};
use orthofl::dataio::{parse_idx, serialize_idx, shuffled_indices, IdxData, IdxTensor};
use orthofl::fl::{run_round, FlState, ModelVector, ReceiverKind};
use orthofl::objectives::Dataset;
use orthofl::receivers::{decompose, ro_aggregate, GroundTruth};
use orthofl::rng::{stream, Purpose};
use orthofl::stats::{ComplexStats, RunningStats};
use orthofl::SystemConfig;
use orthofl_cli::config::{CommandKind, ExperimentSpec, Grid, Task};
use orthofl_cli::output::{write_csv, Report, ResultRow};
use orthofl_cli::tasks::{load_svm_data, svm_setup};
use rand::{Rng, RngCore};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn grid(antennas: &[usize], clients: &[usize], snr_db: &[f64]) -> Grid {
    Grid { antennas: antennas.to_vec(), clients: clients.to_vec(), snr_db: snr_db.to_vec() }
}

fn value(report: &Report, metric: &str, m: usize, snr_db: f64, receiver: &str) -> f64 {
    report
        .find(metric, |r| r.antennas == Some(m) && r.snr_db == Some(snr_db) && r.receiver == receiver)
        .unwrap_or_else(|| panic!("no {metric} row for M={m} snr={snr_db} {receiver}"))
        .value
}

fn sweep() -> Report {
    let spec = ExperimentSpec::defaults(CommandKind::NmseSweep);
    let report = orthofl_cli::run(&spec).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    report
}

const SWEEP_M: [usize; 3] = [256, 512, 1024];

fn c1() -> Outcome {
    let start = Instant::now();
    let cfg = SystemConfig::builder(256, 8, 1, 10.0).seed(101).build().unwrap();
    let x = [0.8, -1.2, 0.3, 0.5, -0.7, 1.1, 0.2, -0.4];
    let sum: f64 = x.iter().sum();
    let mut rng = stream(101, Purpose::Channel, &[]);
    let mut est = RunningStats::new();
    for _ in 0..100_000 {
        let h = draw_channel(&cfg, &mut rng);
        let y = transmit(&h, &x, &cfg, &mut rng).unwrap();
        est.push(ro_aggregate(&y, h.sum_estimate(), 1.0, None).unwrap().value);
    }
    let z = (est.mean() - sum).abs() / est.std_error();
    let secs = start.elapsed().as_secs_f64();
    outcome(z <= 4.0 && secs < 30.0, format!("|mean - sum| = {z:.2} SE (limit 4), {secs:.1} s (limit 30)"))
}

fn c2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (m, k, seed) in [(64usize, 4usize, 201u64), (256, 8, 202)] {
        let cfg = SystemConfig::builder(m, k, 1, 10.0).seed(seed).build().unwrap();
        let x: Vec<f64> = (0..k).map(|i| 1.0 - 0.3 * i as f64).collect();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let mut rng = stream(seed, Purpose::Channel, &[]);
        let mut signal = RunningStats::new();
        let mut interference = ComplexStats::default();
        for _ in 0..10_000 {
            let h = draw_channel(&cfg, &mut rng);
            let y = transmit(&h, &x, &cfg, &mut rng).unwrap();
            let d = decompose(&y, 1.0, GroundTruth { channel: &h, symbols: &x }).unwrap();
            signal.push(d.signal.re);
            interference.push(d.interference);
        }
        let es = signal.variance() / (sq / m as f64) - 1.0;
        let ei = interference.variance() / ((k - 1) as f64 * sq / m as f64) - 1.0;
        worst = worst.max(es.abs()).max(ei.abs());
        parts.push(format!("({m},{k}): signal {:+.1}%, interference {:+.1}%", 100.0 * es, 100.0 * ei));
    }
    outcome(worst <= 0.2, format!("{} (limit 20%)", parts.join("; ")))
}

fn c3(report: &Report) -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for m in SWEEP_M {
        for snr in [-5.0, 0.0, 5.0, 10.0, 12.0] {
            let gap = value(report, "gap_ro_minus_mmse_db", m, snr, "");
            worst = worst.max(gap.abs());
            if gap.abs() > 1.5 {
                bad.push(format!("M={m} {snr} dB: {gap:.2}"));
            }
        }
    }
    let detail = if bad.is_empty() { String::new() } else { format!("; outside: {}", bad.join(", ")) };
    outcome(bad.is_empty(), format!("max |gap| at SNR <= 12 dB = {worst:.2} dB (limit 1.5){detail}"))
}

fn c4(report: &Report) -> Outcome {
    let g: Vec<f64> = SWEEP_M.iter().map(|&m| value(report, "gap_ro_minus_mmse_db", m, 20.0, "")).collect();
    let monotone = g.windows(2).all(|w| w[1] <= w[0]);
    let pass = (3.5..=6.5).contains(&g[0]) && (1.0..=3.0).contains(&g[2]) && monotone;
    outcome(pass, format!("gap at 20 dB: M=256 {:.2}, M=512 {:.2}, M=1024 {:.2} dB; nonincreasing: {monotone}", g[0], g[1], g[2]))
}

fn c5(report: &Report) -> Outcome {
    let mut violations = Vec::new();
    let mut cells = 0;
    for r in report.rows.iter().filter(|r| r.metric == "mse") {
        let floor_name = if r.receiver == "mmse-per-user" { "crlb_trace_floor" } else { "crlb_sum_floor" };
        let same = |x: &ResultRow| x.antennas == r.antennas && x.snr_db == r.snr_db && x.receiver == r.receiver;
        let floor = report.find(floor_name, same).unwrap().value;
        let se = report.find("mse_std_error", same).unwrap().value;
        cells += 1;
        if r.value + 2.0 * se < floor {
            violations.push(format!("{} M={} {} dB ({:.1} SE below)", r.receiver, r.antennas.unwrap(), r.snr_db.unwrap(), (floor - r.value) / se));
        }
    }
    // algebraic: C(2 snr) = C(snr) / 2 elementwise
    let mut worst: f64 = 0.0;
    for t in 0..50u64 {
        let cfg = SystemConfig::builder(32, 6, 1, 0.0).build().unwrap();
        let h = draw_channel(&cfg, &mut stream(501, Purpose::Channel, &[t]));
        let snr = 0.1 + t as f64;
        let a = crlb(h.per_user(), snr).unwrap().crlb;
        let b = crlb(h.per_user(), 2.0 * snr).unwrap().crlb;
        for (x, y) in a.iter().zip(b.iter()) {
            worst = worst.max((x - 2.0 * y).abs() / x.abs().max(1e-300));
        }
    }
    let algebra = worst <= 1e-12;
    let detail = format!(
        "{} of {cells} estimator cells below floor by > 2 SE{}; 1/SNR scaling rel. err {worst:.1e}",
        violations.len(),
        if violations.is_empty() { String::new() } else { format!(" [{}]", violations.join(", ")) }
    );
    outcome(violations.is_empty() && algebra, detail)
}

fn c6() -> Outcome {
    let spec = ExperimentSpec::defaults(CommandKind::Timing);
    let report = orthofl_cli::run(&spec).unwrap();
    let ratios: Vec<f64> = SWEEP_M.iter().map(|&m| value(&report, "ro_over_mmse", m, 10.0, "")).collect();
    let below = ratios.iter().all(|&r| r < 0.10);
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        below && monotone,
        format!(
            "RO/MMSE = {:.2}%, {:.2}%, {:.2}% at M = 256, 512, 1024; all < 10%: {below}; nonincreasing: {monotone}",
            100.0 * ratios[0],
            100.0 * ratios[1],
            100.0 * ratios[2]
        ),
    )
}

fn quadratic_spec(m: usize, k: usize, snr_db: f64, rounds: u64, repeats: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::defaults(CommandKind::Train);
    spec.grid = grid(&[m], &[k], &[snr_db]);
    spec.receivers = vec![ReceiverKind::RandomOrthogonalization];
    spec.train.task = Task::Quadratic;
    spec.train.rounds = rounds;
    spec.train.repeats = repeats;
    spec
}

fn series(report: &Report, metric: &str) -> Vec<f64> {
    let mut rows: Vec<&ResultRow> = report.rows.iter().filter(|r| r.metric == metric).collect();
    rows.sort_by_key(|r| r.step);
    rows.iter().map(|r| r.value).collect()
}

fn c7() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, k, snr) in [(256, 8, 10.0), (64, 16, 0.0)] {
        let spec = quadratic_spec(m, k, snr, 200, 100);
        assert!(spec.train.gamma >= 4.0);
        let report = orthofl_cli::run(&spec).unwrap();
        let gap = series(&report, "gap");
        let bound = series(&report, "theorem1_bound");
        assert_eq!(gap.len(), 200);
        let worst = gap.iter().zip(&bound).map(|(g, b)| g / b).fold(f64::NEG_INFINITY, f64::max);
        pass &= worst <= 1.0;
        parts.push(format!("({m},{k},{snr} dB): max gap/bound {worst:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 600.0, format!("{}; {secs:.0} s (limit 600)", parts.join("; ")))
}

fn c8() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, k, snr) in [(256, 8, 10.0), (64, 16, 0.0)] {
        let mut spec = quadratic_spec(m, k, snr, 500, 20);
        spec.quadratic.prerun_repeats = 5;
        let report = orthofl_cli::run(&spec).unwrap();
        let err: f64 = series(&report, "channel_error_sq").iter().sum();
        let term: f64 = series(&report, "lemma_term").iter().sum();
        let ratio = err / term;
        pass &= (ratio - 1.0).abs() <= 0.25;
        parts.push(format!("({m},{k},{snr} dB): measured / predicted = {ratio:.3}"));
    }
    outcome(pass, format!("{} over 500 rounds x 20 runs (limit 1 +- 0.25)", parts.join("; ")))
}

fn c9() -> Outcome {
    let mut spec = ExperimentSpec::defaults(CommandKind::Train);
    spec.train.data_dir = data_dir();
    spec.train.repeats = 5;
    let report = orthofl_cli::run(&spec).unwrap();
    let last = |rx: &str| {
        let s: Vec<f64> =
            report.rows.iter().filter(|r| r.metric == "test_accuracy" && r.receiver == rx).map(|r| r.value).collect();
        *s.last().unwrap()
    };
    let (ideal, ro, mmse) = (last("ideal"), last("ro"), last("mmse"));
    let pass = (ro - mmse).abs() <= 0.02 && (ro - ideal).abs() <= 0.03;
    outcome(
        pass,
        format!("final accuracy over 5 seeds: ideal {:.2}%, RO {:.2}%, MMSE {:.2}%", 100.0 * ideal, 100.0 * ro, 100.0 * mmse),
    )
}

// Plain FedAvg on the harness's SVM split, written independently of the engine.
fn c10() -> Outcome {
    let mut spec = ExperimentSpec::defaults(CommandKind::Train);
    spec.train.data_dir = data_dir();
    let data = load_svm_data(&spec).unwrap();
    let (fed, _) = svm_setup(&spec, &data, 256, 8, 10.0, 0).unwrap();
    let fed = fed.with_receiver(ReceiverKind::Ideal);
    let (eta, lambda, batch) = (spec.train.eta, spec.train.lambda, spec.train.batch_size);
    let seed = fed.system.master_seed();
    let d = data.dim();
    let clients: &[Dataset] = &fed.clients;
    let mut w = vec![0.0; d];
    let mut state = FlState::new(ModelVector::zeros(d));
    let mut worst: f64 = 0.0;
    for t in 0..50u64 {
        let mut next = vec![0.0; d];
        for (k, shard) in clients.iter().enumerate() {
            let perm = shuffled_indices(shard.len(), &mut stream(seed, Purpose::Sgd, &[t, k as u64]));
            let mut g = vec![0.0; d];
            for &i in &perm[..batch] {
                let (x, y) = (shard.row(i), shard.target(i));
                if y * x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() < 1.0 {
                    for j in 0..d {
                        g[j] -= y * x[j] / batch as f64;
                    }
                }
            }
            for j in 0..d {
                next[j] += (w[j] - eta * (g[j] + lambda * w[j])) / clients.len() as f64;
            }
        }
        w = next;
        state = run_round(&fed, &state, eta, false).unwrap().0;
        for (a, b) in state.model.as_slice().iter().zip(&w) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |engine - oracle| over 50 rounds x {d} weights = {worst:.1e} (limit 1e-9)"))
}

fn random_tensor(rng: &mut impl Rng) -> IdxTensor {
    let dims: Vec<usize> = (0..rng.random_range(0..4)).map(|_| rng.random_range(0..6)).collect();
    let n: usize = dims.iter().product();
    let data = match rng.random_range(0..6) {
        0 => IdxData::U8((0..n).map(|_| rng.random()).collect()),
        1 => IdxData::I8((0..n).map(|_| rng.random()).collect()),
        2 => IdxData::I16((0..n).map(|_| rng.random()).collect()),
        3 => IdxData::I32((0..n).map(|_| rng.random()).collect()),
        4 => IdxData::F32((0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0xbf7f_ffff)).collect()),
        _ => IdxData::F64((0..n).map(|_| rng.random_range(-1e6..1e6)).collect()),
    };
    IdxTensor::new(dims, data).unwrap()
}

fn c11() -> Outcome {
    let mut rng = stream(1101, Purpose::Data, &[]);
    let round_trips = (0..1000).filter(|_| {
        let t = random_tensor(&mut rng);
        parse_idx(&serialize_idx(&t)).ok().as_ref() == Some(&t)
    });
    let identical = round_trips.count();
    let mut crashes = 0;
    let mut oversized = 0;
    for i in 0..10_000 {
        let bytes: Vec<u8> = if i % 2 == 0 {
            let mut b = serialize_idx(&random_tensor(&mut rng));
            for _ in 0..rng.random_range(1..4) {
                let at = rng.random_range(0..b.len());
                b[at] = rng.random();
            }
            b.truncate(rng.random_range(0..=b.len()));
            b
        } else {
            let mut b = vec![0u8; rng.random_range(0..48)];
            rng.fill_bytes(&mut b);
            if b.len() >= 4 && rng.random_bool(0.7) {
                b[0] = 0;
                b[1] = 0;
                b[2] = [0x08, 0x09, 0x0B, 0x0C, 0x0D, 0x0E][rng.random_range(0..6)];
                b[3] = rng.random_range(0..4);
            }
            b
        };
        match catch_unwind(|| parse_idx(&bytes)) {
            Err(_) => crashes += 1,
            Ok(Ok(t)) => {
                if 4 + 4 * t.dims().len() + t.data().len() * t.dtype().size() != bytes.len() {
                    oversized += 1;
                }
            }
            Ok(Err(_)) => {}
        }
    }
    outcome(
        identical == 1000 && crashes == 0 && oversized == 0,
        format!("{identical}/1000 round trips identical; fuzz 10000 cases: {crashes} panics, {oversized} payloads beyond declared size"),
    )
}

fn csv_bytes(spec: &ExperimentSpec) -> Vec<u8> {
    let report = orthofl_cli::run(spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    write_csv(&p, &report.rows).unwrap();
    std::fs::read(p).unwrap()
}

fn c12() -> Outcome {
    let small = grid(&[16, 64], &[4], &[0.0, 20.0]);
    let mut specs = Vec::new();
    for command in [CommandKind::NmseSweep, CommandKind::Timing, CommandKind::Train, CommandKind::Bounds] {
        let mut spec = ExperimentSpec::defaults(command);
        spec.trials = 200;
        spec.grid = small.clone();
        if command == CommandKind::Train {
            spec.train.task = Task::Quadratic;
            spec.train.rounds = 20;
            spec.train.repeats = 3;
            spec.quadratic.prerun_repeats = 2;
        }
        spec.bounds.rounds = 20;
        specs.push((command.name().to_string(), spec));
    }
    let mut svm = ExperimentSpec::defaults(CommandKind::Train);
    svm.train.data_dir = data_dir();
    svm.train.rounds = 10;
    specs.push(("train (svm-mnist)".into(), svm));
    let mut differing = Vec::new();
    for (name, spec) in &specs {
        let mut one = spec.clone();
        one.threads = 1;
        let mut many = spec.clone();
        many.threads = 3;
        let (a, b, c) = (csv_bytes(&one), csv_bytes(&one), csv_bytes(&many));
        if a != b || a != c {
            differing.push(name.clone());
        }
    }
    let detail = if differing.is_empty() {
        format!("all {} command CSVs byte-identical across runs and thread counts", specs.len())
    } else {
        format!("{}/{} commands byte-identical; differing: {}", specs.len() - differing.len(), specs.len(), differing.join(", "))
    };
    outcome(differing.is_empty(), detail)
}

fn main() {
    let mut shared: Option<Report> = None;
    let mut with_sweep = |f: fn(&Report) -> Outcome| -> Outcome {
        let report = shared.get_or_insert_with(sweep);
        f(report)
    };
    let mut results = Vec::new();
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail, panicked) = match out {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail, false),
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                ("FAIL", format!("panicked: {}", msg.unwrap_or_default()), true)
            }
        };
        println!("criterion {n:>2} {tag} {name}: {detail} [{secs:.1} s]");
        results.push((tag == "PASS", panicked));
    };
    run(1, "unbiased aggregation", &mut c1);
    run(2, "variance laws", &mut c2);
    run(3, "NMSE parity at moderate SNR", &mut || with_sweep(c3));
    run(4, "high-SNR gap trend", &mut || with_sweep(c4));
    run(5, "CRLB dominance", &mut || with_sweep(c5));
    run(6, "decode timing ratio", &mut c6);
    run(7, "convergence bound holds", &mut c7);
    run(8, "one-step channel error term", &mut c8);
    run(9, "learning equivalence", &mut c9);
    run(10, "oracle equivalence", &mut c10);
    run(11, "parser robustness", &mut c11);
    run(12, "determinism", &mut c12);
    let passed = results.iter().filter(|r| r.0).count();
    println!("{passed}/{} criteria passed", results.len());
    let strict = std::env::var_os("ORTHOFL_ACCEPTANCE_STRICT").is_some();
    if results.iter().any(|r| r.1) || (strict && passed < results.len()) {
        std::process::exit(1);
    }
}
