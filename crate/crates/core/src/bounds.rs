//! Estimation and convergence bounds.
//!
//! * Fisher information and Cramer-Rao floor for decoding the real symbol
//!   vector `x` from `y = H x + n`.
//! * The variance constant `B`, the one-step contraction and the `O(1/t)`
//!   optimality-gap bound for parallel SGD aggregated by projection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::CMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult {
    /// `F = 2 snr Re(H^H H)`
    pub fim: DMatrix<f64>,
    /// `C = F^{-1}`
    pub crlb: DMatrix<f64>,
    /// `trace(C)`: floor on `E||x - x_hat||^2` for unbiased per-client decoding.
    pub mse_floor: f64,
    /// `1^T C 1`: floor on the variance of any unbiased estimate of `sum_k x_k`.
    pub sum_floor: f64,
}

/// Fisher information and CRLB for the real symbols behind one received
/// vector. Fails on a singular FIM (e.g. two identical channel columns).
pub fn crlb(channel: &CMatrix, snr: f64) -> Result<CrlbResult> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidConfig(format!("CRLB needs a finite positive SNR, got {snr}")));
    }
    let gram = channel.ad_mul(channel);
    let fim = gram.map(|z| 2.0 * snr * z.re);
    let crlb = spd_inverse(&fim).ok_or(Error::Singular("Fisher information matrix"))?;
    let mse_floor = crlb.trace();
    let sum_floor = crlb.sum();
    Ok(CrlbResult { fim, crlb, mse_floor, sum_floor })
}

/// Inverse of a symmetric positive-definite matrix via Cholesky; `None` when
/// the factorization fails or a pivot is negligible.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let max = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    if (0..l.nrows()).any(|i| !(l[(i, i)] > max * 1e-7)) {
        return None;
    }
    Some(chol.inverse())
}

/// Constants of the convergence analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Strong-convexity constant.
    pub mu: f64,
    /// Smoothness constant.
    pub lip: f64,
    /// Uniform bound on the mini-batch gradient norm.
    pub grad_bound: f64,
    pub clients: usize,
    pub antennas: usize,
    /// Linear SNR.
    pub snr: f64,
    pub gamma: f64,
    /// `||w_0 - w*||^2`
    pub w0_dist_sq: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.lip >= self.mu
            && self.grad_bound >= 0.0
            && self.clients > 0
            && self.antennas > 0
            && self.snr > 0.0
            && self.gamma >= 0.0
            && self.w0_dist_sq >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inconsistent bound parameters: {self:?}")))
        }
    }

    pub fn b(&self) -> f64 {
        b_factor(self.clients, self.antennas, self.snr, self.grad_bound)
    }
}

/// `B = [1 + (K + 1/snr) / M] * H^2 / K`.
///
/// The leading `H^2/K` is the variance reduction from averaging `K`
/// gradients; the `(K + 1/snr) H^2 / (M K)` part is what interference and
/// noise in the projection add on top.
pub fn b_factor(clients: usize, antennas: usize, snr: f64, grad_bound: f64) -> f64 {
    let k = clients as f64;
    let m = antennas as f64;
    (1.0 + (k + 1.0 / snr) / m) * grad_bound * grad_bound / k
}

/// Right-hand side of the one-step recursion
/// `E||w_{t+1} - w*||^2 <= (1 - 2 mu eta) E||w_t - w*||^2 + eta^2 B`.
pub fn lemma1_rhs(prev_err_sq: f64, eta: f64, params: &BoundParams) -> Result<f64> {
    let max = 1.0 / (2.0 * params.mu);
    if eta > max {
        return Err(Error::LearningRateTooLarge { eta, max });
    }
    Ok((1.0 - 2.0 * params.mu * eta) * prev_err_sq + eta * eta * params.b())
}

/// `L / (2 (t + gamma)) * [4 B / mu^2 + (1 + gamma) ||w_0 - w*||^2]`, valid
/// for `t >= 1` under the schedule of [`learning_rate`].
pub fn theorem1_bound(t: u64, params: &BoundParams) -> f64 {
    let tg = t as f64 + params.gamma;
    let b = params.b();
    params.lip / (2.0 * tg) * (4.0 * b / (params.mu * params.mu) + (1.0 + params.gamma) * params.w0_dist_sq)
}

/// A learning-rate value together with whether it respects `eta <= 1/(2 mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub eta: f64,
    pub violates_lemma: bool,
}

/// `eta_t = 2 / (mu (t + gamma))`. Rounds with `t + gamma < 4` exceed
/// `1/(2 mu)` and are flagged, not clamped.
pub fn learning_rate(t: u64, mu: f64, gamma: f64) -> Step {
    let eta = 2.0 / (mu * (t as f64 + gamma));
    Step { eta, violates_lemma: eta > 1.0 / (2.0 * mu) }
}
