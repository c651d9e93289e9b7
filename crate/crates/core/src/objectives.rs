//! Local losses: an L2-regularized linear SVM (hinge loss) for
//! classification, and a ridge-regularized least-squares quadratic whose
//! curvature, minimizer and minimum are known in closed form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major samples with one target per row. For the SVM the targets are
/// `+1`/`-1` labels; for the quadratic they are real responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    /// Classification data; every label must be exactly `+1` or `-1`.
    pub fn labeled(features: Vec<f64>, dim: usize, labels: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidLabel(bad));
        }
        Self::regression(features, dim, labels)
    }

    pub fn regression(features: Vec<f64>, dim: usize, targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 || features.len() != dim * targets.len() {
            return Err(Error::DimensionMismatch { what: "feature matrix", expected: dim * targets.len(), found: features.len() });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Dataset { dim, features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Rows `indices` in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            self.check_index(i)?;
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset::regression(features, self.dim, targets)
    }

    /// Stack several datasets of equal dimension.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Self> {
        let mut iter = parts.into_iter().peekable();
        let dim = iter.peek().map(|d| d.dim).ok_or(Error::EmptyDataset)?;
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for part in iter {
            if part.dim != dim {
                return Err(Error::DimensionMismatch { what: "dataset dimension", expected: dim, found: part.dim });
            }
            features.extend_from_slice(&part.features);
            targets.extend_from_slice(&part.targets);
        }
        Dataset::regression(features, dim, targets)
    }

    /// Append a constant-1 feature to every row.
    pub fn with_bias(&self) -> Self {
        let dim = self.dim + 1;
        let mut features = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            features.extend_from_slice(self.row(i));
            features.push(1.0);
        }
        Dataset { dim, features, targets: self.targets.clone() }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidIndex { index: i, len: self.len() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    HingeSvm,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    /// Ridge weight `lambda >= 0`.
    pub lambda: f64,
}

impl Objective {
    pub fn hinge(lambda: f64) -> Self {
        Objective { kind: ObjectiveKind::HingeSvm, lambda }
    }

    pub fn quadratic(lambda: f64) -> Self {
        Objective { kind: ObjectiveKind::Quadratic, lambda }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_model(w: &[f64], data: &Dataset) -> Result<()> {
    if w.len() == data.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what: "model", expected: data.dim(), found: w.len() })
    }
}

/// Mini-batch gradient averaged over `batch`, plus the ridge term.
///
/// Hinge: `(1/|B|) sum_{y<w,x> < 1} (-y x) + lambda w`.
/// Quadratic: `(1/|B|) sum (<a,w> - b) a + lambda w`.
pub fn minibatch_gradient(obj: &Objective, w: &[f64], data: &Dataset, batch: &[usize]) -> Result<Vec<f64>> {
    check_model(w, data)?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut g = vec![0.0; w.len()];
    for &i in batch {
        data.check_index(i)?;
        let x = data.row(i);
        let y = data.target(i);
        let coeff = match obj.kind {
            ObjectiveKind::HingeSvm => {
                if y * dot(w, x) < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            ObjectiveKind::Quadratic => dot(w, x) - y,
        };
        if coeff != 0.0 {
            g.iter_mut().zip(x).for_each(|(gj, xj)| *gj += coeff * xj);
        }
    }
    let inv = 1.0 / batch.len() as f64;
    g.iter_mut().zip(w).for_each(|(gj, wj)| *gj = *gj * inv + obj.lambda * wj);
    Ok(g)
}

/// Full-data gradient.
pub fn full_gradient(obj: &Objective, w: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..data.len()).collect();
    minibatch_gradient(obj, w, data, &all)
}

/// Mean hinge loss or mean half squared residual, plus `lambda/2 ||w||^2`.
pub fn loss(obj: &Objective, w: &[f64], data: &Dataset) -> Result<f64> {
    check_model(w, data)?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let margin = dot(w, data.row(i));
        let y = data.target(i);
        total += match obj.kind {
            ObjectiveKind::HingeSvm => (1.0 - y * margin).max(0.0),
            ObjectiveKind::Quadratic => 0.5 * (margin - y).powi(2),
        };
    }
    Ok(total / data.len() as f64 + 0.5 * obj.lambda * dot(w, w))
}

/// Fraction of rows whose predicted sign matches the label; a zero score
/// predicts `+1`.
pub fn accuracy(w: &[f64], data: &Dataset) -> Result<f64> {
    check_model(w, data)?;
    let hits = (0..data.len())
        .filter(|&i| {
            let pred = if dot(w, data.row(i)) >= 0.0 { 1.0 } else { -1.0 };
            pred == data.target(i)
        })
        .count();
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticConstants {
    pub mu: f64,
    pub lip: f64,
    pub w_star: Vec<f64>,
    pub f_star: f64,
}

/// Exact curvature extremes, minimizer and minimum of the global quadratic
/// `f = (1/K) sum_k f_k` over equal-size clients.
///
/// The global Hessian is `lambda I + (1/N) A^T A` over the stacked data; its
/// extreme eigenvalues are `mu` and `L`.
pub fn quadratic_constants(obj: &Objective, clients: &[Dataset]) -> Result<QuadraticConstants> {
    if obj.kind != ObjectiveKind::Quadratic {
        return Err(Error::InvalidConfig("quadratic constants need the quadratic objective".into()));
    }
    let all = Dataset::concat(clients)?;
    let d = all.dim();
    let n = all.len() as f64;
    let a = DMatrix::from_row_slice(all.len(), d, &all.features);
    let b = DVector::from_column_slice(all.targets());
    let mut hessian = a.tr_mul(&a) / n;
    for j in 0..d {
        hessian[(j, j)] += obj.lambda;
    }
    let rhs = a.tr_mul(&b) / n;
    let eig = SymmetricEigen::new(hessian.clone());
    let mu = eig.eigenvalues.min();
    let lip = eig.eigenvalues.max();
    if !(mu > lip * 1e-12) {
        return Err(Error::Singular("quadratic Hessian"));
    }
    let w_star = hessian.cholesky().ok_or(Error::Singular("quadratic Hessian"))?.solve(&rhs);
    let w_star: Vec<f64> = w_star.iter().copied().collect();
    let f_star = loss(obj, &w_star, &all)?;
    Ok(QuadraticConstants { mu, lip, w_star, f_star })
}
