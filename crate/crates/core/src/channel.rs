//! Rayleigh block-fading uplink.
//!
//! Each client `k` sees a channel `h_k ~ CN(0, I/M)`; the base station
//! receives `y = sqrt(P) * sum_k h_k x_k + n` with `n ~ CN(0, sigma^2 I)`.
//! One [`ChannelRealization`] stays fixed for the pilot phase and all `d`
//! model slots of a round.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::system::SystemConfig;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Draw from `CN(0, variance)`: real and imaginary parts each carry half.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Power and noise level of the uplink. [`SystemConfig`] always yields a
/// noisy link; a zero `noise_variance` is allowed here for noiseless
/// references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub power: f64,
    pub noise_variance: f64,
}

impl Link {
    pub fn noiseless(power: f64) -> Self {
        Link { power, noise_variance: 0.0 }
    }

    /// `P / sigma^2`; infinite for a noiseless link.
    pub fn snr(&self) -> f64 {
        self.power / self.noise_variance
    }
}

impl From<&SystemConfig> for Link {
    fn from(cfg: &SystemConfig) -> Self {
        Link { power: cfg.power(), noise_variance: cfg.noise_variance() }
    }
}

/// The `K` channel vectors of one coherence block together with their sum
/// and the receiver's estimate of that sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    per_user: CMatrix,
    sum: CVector,
    sum_estimate: CVector,
}

impl ChannelRealization {
    /// Wrap an explicit `M x K` channel matrix; the sum estimate is exact.
    pub fn from_matrix(per_user: CMatrix) -> Self {
        let sum = per_user.column_sum();
        ChannelRealization { sum_estimate: sum.clone(), per_user, sum }
    }

    pub fn antennas(&self) -> usize {
        self.per_user.nrows()
    }

    pub fn clients(&self) -> usize {
        self.per_user.ncols()
    }

    /// `H = [h_1 .. h_K]`.
    pub fn per_user(&self) -> &CMatrix {
        &self.per_user
    }

    pub fn user(&self, k: usize) -> CVector {
        self.per_user.column(k).into_owned()
    }

    /// Exact `h_s = sum_k h_k`.
    pub fn sum(&self) -> &CVector {
        &self.sum
    }

    /// What the receiver believes `h_s` to be.
    pub fn sum_estimate(&self) -> &CVector {
        &self.sum_estimate
    }

    pub fn set_sum_estimate(&mut self, estimate: CVector) -> Result<()> {
        check_len("sum channel estimate", self.antennas(), estimate.len())?;
        self.sum_estimate = estimate;
        Ok(())
    }
}

/// One received vector for model slot `slot_index` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSymbol {
    pub y: CVector,
    pub slot_index: usize,
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}

/// Draw a fresh block: `K` i.i.d. `CN(0, I/M)` vectors. With
/// `pilot_repetitions > 0` the sum estimate comes from
/// [`estimate_sum_channel`], drawing pilot noise from the same stream after
/// the channel coefficients.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let m = cfg.antennas();
    let variance = 1.0 / m as f64;
    // Column-major fill: client by client.
    let per_user = CMatrix::from_fn(m, cfg.clients(), |_, _| complex_gaussian(rng, variance));
    let mut realization = ChannelRealization::from_matrix(per_user);
    if cfg.pilot_repetitions() > 0 {
        let est = pilot_estimate(&realization, cfg.pilot_repetitions(), Link::from(cfg), rng);
        realization.sum_estimate = est;
    }
    realization
}

/// Maximum-likelihood estimate of `h_s` from `pilot_repetitions` synchronous
/// unit pilots: the received pilot vectors are averaged and scaled by
/// `1/sqrt(P)`, so the error is `CN(0, sigma^2 / (N P) I)`.
pub fn estimate_sum_channel<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<CVector> {
    estimate_sum_channel_on(realization, cfg.pilot_repetitions(), Link::from(cfg), rng)
}

/// [`estimate_sum_channel`] with explicit repetition count and link.
pub fn estimate_sum_channel_on<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    repetitions: usize,
    link: Link,
    rng: &mut R,
) -> Result<CVector> {
    if repetitions == 0 {
        return Err(Error::NoPilot);
    }
    Ok(pilot_estimate(realization, repetitions, link, rng))
}

fn pilot_estimate<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    repetitions: usize,
    link: Link,
    rng: &mut R,
) -> CVector {
    let amp = link.power.sqrt();
    let mut acc = CVector::zeros(realization.antennas());
    for _ in 0..repetitions {
        for (a, h) in acc.iter_mut().zip(realization.sum.iter()) {
            *a += h * amp + complex_gaussian(rng, link.noise_variance);
        }
    }
    acc / Complex64::new(repetitions as f64 * amp, 0.0)
}

/// Noise-free part of the received signal, `sqrt(P) * H x`.
pub fn superpose(realization: &ChannelRealization, x: &[f64], power: f64) -> Result<CVector> {
    check_len("transmitted symbols", realization.clients(), x.len())?;
    let amp = power.sqrt();
    let mut y = CVector::zeros(realization.antennas());
    for (k, &xk) in x.iter().enumerate() {
        if xk != 0.0 {
            y.axpy(Complex64::new(amp * xk, 0.0), &realization.per_user.column(k), Complex64::new(1.0, 0.0));
        }
    }
    Ok(y)
}

/// `y = sqrt(P) * sum_k h_k x_k + n` with fresh noise from `rng`.
pub fn transmit<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    x: &[f64],
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<CVector> {
    transmit_on(realization, x, Link::from(cfg), rng)
}

/// [`transmit`] over an explicit link.
pub fn transmit_on<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    x: &[f64],
    link: Link,
    rng: &mut R,
) -> Result<CVector> {
    let mut y = superpose(realization, x, link.power)?;
    if link.noise_variance > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, link.noise_variance);
        }
    }
    Ok(y)
}

/// [`transmit`] tagged with its slot.
pub fn transmit_slot<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    slot_index: usize,
    x: &[f64],
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ReceivedSymbol> {
    if slot_index == 0 || slot_index > cfg.model_dim() {
        return Err(Error::InvalidConfig(format!(
            "slot index {slot_index} outside 1..={}",
            cfg.model_dim()
        )));
    }
    check_len("received vector", cfg.antennas(), realization.antennas())?;
    Ok(ReceivedSymbol { y: transmit(realization, x, cfg, rng)?, slot_index })
}
