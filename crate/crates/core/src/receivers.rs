//! Aggregation receivers.
//!
//! [`ro_aggregate`] is the random-orthogonalization receiver: one inner
//! product of the received vector with the estimated sum channel, which by
//! channel hardening and favorable propagation is an unbiased estimate of
//! `sum_k x_k`. [`mmse_aggregate`] is the full-CSI baseline that decodes every
//! client with a linear MMSE filter and adds the results.

use std::time::Instant;

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{check_len, draw_channel, superpose, CMatrix, CVector, ChannelRealization, Link};
use crate::error::{Error, Result};
use crate::system::SystemConfig;

/// The three terms of `h_s^H y / sqrt(P)` when the true channel is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `sum_k h_k^H h_k x_k`
    pub signal: Complex64,
    /// `sum_k sum_{j != k} h_k^H h_j x_j`
    pub interference: Complex64,
    /// `h_s^H n / sqrt(P)`
    pub noise: Complex64,
}

impl Decomposition {
    pub fn total(&self) -> Complex64 {
        self.signal + self.interference + self.noise
    }
}

/// What the diagnostics split needs to know beyond the receiver inputs.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruth<'a> {
    pub channel: &'a ChannelRealization,
    pub symbols: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateEstimate {
    /// Estimate of `sum_k x_k`.
    pub value: f64,
    /// Imaginary residue of the projection, kept for inspection only.
    pub imag_residue: f64,
    pub parts: Option<Decomposition>,
    pub decode_time_ns: u64,
}

/// Projection used by [`ro_aggregate`]; split out so timing brackets only
/// this arithmetic.
#[inline]
pub fn project(y: &CVector, sum_channel: &CVector) -> Complex64 {
    sum_channel.dotc(y)
}

/// Random-orthogonalization estimate `Re(h_s^H y) / sqrt(P)`.
///
/// With `truth` supplied the estimate also carries the signal, interference
/// and noise split computed from the true channel; with a perfect sum
/// estimate the three parts add up to the projection.
pub fn ro_aggregate(
    y: &CVector,
    sum_channel: &CVector,
    power: f64,
    truth: Option<GroundTruth<'_>>,
) -> Result<AggregateEstimate> {
    check_len("sum channel", y.len(), sum_channel.len())?;
    let start = Instant::now();
    let z = project(y, sum_channel);
    let decode_time_ns = start.elapsed().as_nanos() as u64;
    let amp = power.sqrt();
    let parts = truth.map(|t| decompose(y, power, t)).transpose()?;
    Ok(AggregateEstimate {
        value: z.re / amp,
        imag_residue: z.im / amp,
        parts,
        decode_time_ns,
    })
}

/// Split `h_s^H y / sqrt(P)` into its signal, interference and noise terms.
pub fn decompose(y: &CVector, power: f64, truth: GroundTruth<'_>) -> Result<Decomposition> {
    let h = truth.channel.per_user();
    check_len("received vector", h.nrows(), y.len())?;
    check_len("transmitted symbols", h.ncols(), truth.symbols.len())?;
    let x = truth.symbols;
    let gram = h.ad_mul(h);
    let mut signal = Complex64::new(0.0, 0.0);
    let mut interference = Complex64::new(0.0, 0.0);
    for k in 0..h.ncols() {
        for (j, &xj) in x.iter().enumerate() {
            let term = gram[(k, j)] * xj;
            if j == k {
                signal += term;
            } else {
                interference += term;
            }
        }
    }
    let noise_vec = y - superpose(truth.channel, x, power)?;
    let noise = truth.channel.sum().dotc(&noise_vec) / power.sqrt();
    Ok(Decomposition { signal, interference, noise })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseEstimate {
    pub per_user: Vec<f64>,
    pub sum: f64,
    pub decode_time_ns: u64,
}

/// Linear MMSE filter for a fixed channel, factorized once and reused for
/// every slot of a block.
#[derive(Debug, Clone)]
pub struct MmseDecoder {
    channel: CMatrix,
    factor: Cholesky<Complex64, nalgebra::Dyn>,
    amp: f64,
}

impl MmseDecoder {
    /// Factor `H^H H + I/snr`. `snr` may be infinite (zero forcing); a
    /// rank-deficient channel then fails instead of falling back to a
    /// pseudo-inverse.
    pub fn new(channel: &CMatrix, snr: f64, power: f64) -> Result<Self> {
        let mut gram = channel.ad_mul(channel);
        let reg = if snr.is_infinite() { 0.0 } else { 1.0 / snr };
        for k in 0..gram.nrows() {
            gram[(k, k)] += reg;
        }
        let factor = gram.cholesky().ok_or(Error::Singular("regularized Gram matrix H^H H + I/SNR"))?;
        // Cholesky accepts matrices that are numerically singular; reject
        // pivots that vanish relative to the largest one.
        let l = factor.l_dirty();
        let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        if diag.iter().any(|&p| !(p > max * 1e-7)) {
            return Err(Error::Singular("regularized Gram matrix H^H H + I/SNR"));
        }
        Ok(MmseDecoder { channel: channel.clone(), factor, amp: power.sqrt() })
    }

    /// Per-client estimates `Re[(H^H H + I/snr)^{-1} H^H y] / sqrt(P)`.
    pub fn decode(&self, y: &CVector) -> Result<Vec<f64>> {
        check_len("received vector", self.channel.nrows(), y.len())?;
        let matched = self.channel.ad_mul(y);
        let x = self.factor.solve(&matched);
        Ok(x.iter().map(|v| v.re / self.amp).collect())
    }
}

/// Full MMSE decode of one received vector, timing the Gram build, the
/// factorization and the solve together.
pub fn mmse_aggregate(y: &CVector, channel: &CMatrix, snr: f64, power: f64) -> Result<MmseEstimate> {
    check_len("received vector", channel.nrows(), y.len())?;
    let start = Instant::now();
    let per_user = MmseDecoder::new(channel, snr, power)?.decode(y)?;
    let decode_time_ns = start.elapsed().as_nanos() as u64;
    let sum = per_user.iter().sum();
    Ok(MmseEstimate { per_user, sum, decode_time_ns })
}

/// Approximate post-projection SINR `M / (K - 1 + 1/snr)`.
pub fn sinr_analytic(antennas: usize, clients: usize, snr: f64) -> f64 {
    antennas as f64 / (clients as f64 - 1.0 + 1.0 / snr)
}

/// SIR the approximation tends to as `snr -> inf`, `M / (K - 1)`, together
/// with its reciprocal `(K - 1) / M`, which is how the high-SNR limit is
/// sometimes quoted.
pub fn high_snr_sir(antennas: usize, clients: usize) -> (f64, f64) {
    let m = antennas as f64;
    let km1 = clients as f64 - 1.0;
    (m / km1, km1 / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub analytic: f64,
    /// `mean |signal|^2 / mean |interference + noise|^2`; `+inf` when the
    /// denominator vanishes.
    pub empirical: f64,
    pub trials: u64,
}

/// Measure the SINR of the projection over `trials` fresh blocks with
/// i.i.d. standard normal symbols.
pub fn sinr_empirical<R: Rng + ?Sized>(cfg: &SystemConfig, trials: u64, rng: &mut R) -> SinrReport {
    sinr_empirical_on(cfg.antennas(), cfg.clients(), Link::from(cfg), trials, rng)
}

/// [`sinr_empirical`] over an explicit link (allows a noiseless one).
pub fn sinr_empirical_on<R: Rng + ?Sized>(
    antennas: usize,
    clients: usize,
    link: Link,
    trials: u64,
    rng: &mut R,
) -> SinrReport {
    // Only the shape matters for drawing; the link decides the noise.
    let shape = SystemConfig::new(antennas, clients, 1, 0.0).expect("positive dimensions");
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..trials {
        let channel = draw_channel(&shape, rng);
        let x: Vec<f64> = (0..clients).map(|_| rng.sample(StandardNormal)).collect();
        let y = crate::channel::transmit_on(&channel, &x, link, rng).expect("matching dimensions");
        let parts = decompose(&y, link.power, GroundTruth { channel: &channel, symbols: &x })
            .expect("matching dimensions");
        num += parts.signal.norm_sqr();
        den += (parts.interference + parts.noise).norm_sqr();
    }
    let empirical = if den > 0.0 { num / den } else { f64::INFINITY };
    SinrReport { analytic: sinr_analytic(antennas, clients, link.snr()), empirical, trials }
}
