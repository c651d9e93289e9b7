//! Fast statistical invariants with fixed seeds.

use std::fmt;

use orthofl::bounds::crlb;
use orthofl::channel::{draw_channel, transmit};
use orthofl::receivers::{decompose, ro_aggregate, GroundTruth};
use orthofl::rng::{stream, Purpose};
use orthofl::stats::{ComplexStats, RunningStats};
use orthofl::SystemConfig;

const SEED: u64 = 0x5e1f;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<30} statistic={:<12.6e} threshold={:.6e}", self.name, self.statistic, self.threshold)
    }
}

/// Test hooks for mutation checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    /// Flip the sign of the projection before it is used.
    pub inject_sign_error: bool,
}

fn at_most(name: &'static str, statistic: f64, threshold: f64) -> Check {
    Check { name, statistic, threshold, passed: statistic <= threshold }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn run(hooks: Hooks) -> orthofl::Result<Vec<Check>> {
    let mut out = Vec::new();

    // hardening: ||h_k||^2 has mean 1 and variance 1/M
    let cfg = SystemConfig::builder(64, 2, 1, 10.0).seed(SEED).build()?;
    let mut rng = stream(SEED, Purpose::Channel, &[1]);
    let mut norms = RunningStats::new();
    let mut cross = RunningStats::new();
    for _ in 0..20_000 {
        let h = draw_channel(&cfg, &mut rng);
        let (a, b) = (h.user(0), h.user(1));
        norms.push(a.norm_squared());
        cross.push(a.dotc(&b).norm_sqr());
    }
    out.push(at_most("hardening_variance_rel_err", rel_err(norms.variance(), 1.0 / 64.0), 0.1));
    out.push(at_most("favorable_propagation_rel_err", rel_err(cross.mean(), 1.0 / 64.0), 0.1));

    // unbiased sum at (256, 8, 10 dB)
    let cfg = SystemConfig::builder(256, 8, 1, 10.0).seed(SEED).build()?;
    let x = [0.9, -0.4, 1.3, 0.2, -1.1, 0.5, 0.7, -0.3];
    let sum: f64 = x.iter().sum();
    let sign = if hooks.inject_sign_error { -1.0 } else { 1.0 };
    let mut rng = stream(SEED, Purpose::Channel, &[2]);
    let mut est = RunningStats::new();
    let mut signal = RunningStats::new();
    let mut interference = ComplexStats::default();
    for _ in 0..20_000 {
        let h = draw_channel(&cfg, &mut rng);
        let y = transmit(&h, &x, &cfg, &mut rng)?;
        est.push(sign * ro_aggregate(&y, h.sum_estimate(), cfg.power(), None)?.value);
        let parts = decompose(&y, cfg.power(), GroundTruth { channel: &h, symbols: &x })?;
        signal.push(parts.signal.re);
        interference.push(parts.interference);
    }
    out.push(at_most("unbiased_sum_z_score", (est.mean() - sum).abs() / est.std_error(), 4.0));
    let sq: f64 = x.iter().map(|v| v * v).sum();
    out.push(at_most("signal_variance_rel_err", rel_err(signal.variance(), sq / 256.0), 0.2));
    out.push(at_most("interference_variance_rel_err", rel_err(interference.variance(), 7.0 * sq / 256.0), 0.2));

    // CRLB identities
    let h = draw_channel(&cfg, &mut stream(SEED, Purpose::Channel, &[3]));
    let c1 = crlb(h.per_user(), 10.0)?;
    let c2 = crlb(h.per_user(), 20.0)?;
    let eye = &c1.crlb * &c1.fim;
    let id_err = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).map(|(i, j)| (eye[(i, j)] - f64::from(i == j)).abs()).fold(0.0, f64::max);
    out.push(at_most("crlb_times_fim_minus_identity", id_err, 1e-9));
    out.push(at_most("crlb_inverse_snr_scaling", rel_err(c1.mse_floor, 2.0 * c2.mse_floor), 1e-12));
    Ok(out)
}
