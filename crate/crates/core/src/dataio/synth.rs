use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Dataset, Objective};

/// Shape of a synthetic least-squares federation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticQuadratic {
    pub clients: usize,
    pub dim: usize,
    pub samples_per_client: usize,
    /// Target ratio of the largest to smallest eigenvalue of the data Gram
    /// matrix (`>= 1`).
    pub condition: f64,
    pub noise_std: f64,
    pub lambda: f64,
}

/// Gaussian regression data whose pooled Gram matrix `(1/N) A^T A` has
/// eigenvalues spread geometrically over `[1/condition, 1]` exactly.
///
/// The design is `sqrt(N) Q diag(s) V^T`, where `Q` orthonormalizes an
/// `N x d` Gaussian matrix and `V` is a random rotation, so the rows stay
/// rotation-invariant while the spectrum is pinned. Targets are
/// `A w_plant + noise_std * eps` with `w_plant ~ N(0, I)`.
///
/// Returns the client shards, the objective and the planted weights.
pub fn synth_quadratic<R: Rng + ?Sized>(spec: &SyntheticQuadratic, rng: &mut R) -> Result<(Vec<Dataset>, Objective, Vec<f64>)> {
    let SyntheticQuadratic { clients, dim, samples_per_client, condition, noise_std, lambda } = *spec;
    if clients == 0 || dim == 0 || samples_per_client == 0 {
        return Err(Error::InvalidConfig("synthetic task sizes must be positive".into()));
    }
    if !(condition >= 1.0) || !(noise_std >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need condition >= 1, noise_std >= 0, lambda >= 0 (got {condition}, {noise_std}, {lambda})"
        )));
    }
    let n = clients * samples_per_client;
    if n < dim {
        return Err(Error::InsufficientSamples { needed: dim, available: n });
    }
    let mut gaussian = |r: usize, c: usize| DMatrix::<f64>::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let q = gaussian(n, dim).qr().q();
    let v = gaussian(dim, dim).qr().q();
    let scales = DVector::from_fn(dim, |j, _| {
        let frac = if dim == 1 { 0.0 } else { j as f64 / (dim - 1) as f64 };
        condition.powf(-0.5 * frac)
    });
    let design = (q * DMatrix::from_diagonal(&scales)) * v.transpose() * (n as f64).sqrt();
    let w_plant: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let clean = &design * DVector::from_column_slice(&w_plant);

    let mut shards = Vec::with_capacity(clients);
    for k in 0..clients {
        let rows = k * samples_per_client..(k + 1) * samples_per_client;
        let mut features = Vec::with_capacity(samples_per_client * dim);
        let mut targets = Vec::with_capacity(samples_per_client);
        for i in rows {
            features.extend(design.row(i).iter());
            let eps: f64 = rng.sample(StandardNormal);
            targets.push(clean[i] + noise_std * eps);
        }
        shards.push(Dataset::regression(features, dim, targets)?);
    }
    Ok((shards, Objective::quadratic(lambda), w_plant))
}
