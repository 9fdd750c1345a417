//! Pooled-covariance linear discriminant analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::serde_mat;

/// Trained LDA. Decision value of class `k` is
/// `x^T Σ^-1 μ_k - ½ μ_k^T Σ^-1 μ_k + ln π_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub class_means: Vec<Vec<f64>>,
    /// Lower Cholesky factor of the ridge-stabilized pooled covariance.
    #[serde(with = "serde_mat")]
    pub pooled_cov_factor: Mat,
    pub priors: Vec<f64>,
    pub ridge: f64,
    /// Columns `Σ^-1 μ_k`.
    #[serde(with = "serde_mat")]
    pub weights: Mat,
    pub biases: Vec<f64>,
}

impl LdaModel {
    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    /// Per-class decision values.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!(
                "feature vector has length {} but the classifier expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok((0..self.n_classes())
            .map(|k| {
                let mut s = self.biases[k];
                for (j, xj) in x.iter().enumerate() {
                    s += xj * self.weights[(j, k)];
                }
                s
            })
            .collect())
    }

    /// Predicted class id (1-based; ties go to the lowest id) and decision values.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let values = self.decision_values(x)?;
        Ok((argmax(&values) + 1, values))
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits LDA on `features` with labels in `1..=class_count`.
///
/// `ridge = None` adds `1e-6 * trace / dim` (floored so an all-zero pooled
/// covariance still factors); `Some(r)` adds exactly `r`.
pub fn lda_train(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    ridge: Option<f64>,
) -> Result<LdaModel> {
    if features.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if class_count < 2 {
        return Err(Error::InvalidArgument("LDA needs at least 2 classes".into()));
    }
    let p = features.first().map(Vec::len).unwrap_or(0);
    if p == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    if features.iter().any(|f| f.len() != p) {
        return Err(Error::Dimension("feature vectors differ in length".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        if l == 0 || l > class_count {
            return Err(Error::InvalidArgument(format!("label {l} outside 1..={class_count}")));
        }
        counts[l - 1] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(Error::InvalidArgument(format!(
            "class {} has {} samples; LDA needs at least 2 per class",
            k + 1,
            counts[k]
        )));
    }

    let n = features.len();
    let mut means = vec![vec![0.0; p]; class_count];
    for (f, &l) in features.iter().zip(labels) {
        for (m, v) in means[l - 1].iter_mut().zip(f) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }

    let mut pooled = Mat::zeros(p, p);
    let mut energy = 0.0;
    for (f, &l) in features.iter().zip(labels) {
        let d = Vector::from_iterator(p, f.iter().zip(&means[l - 1]).map(|(a, b)| a - b));
        pooled += &d * d.transpose();
        energy += f.iter().map(|v| v * v).sum::<f64>();
    }
    pooled /= (n - class_count).max(1) as f64;
    let ridge = match ridge {
        Some(r) if r >= 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidArgument(format!("ridge must be non-negative, got {r}"))),
        None => {
            let floor = 1e-12 * energy / (n as f64 * p as f64);
            (1e-6 * pooled.trace() / p as f64).max(floor).max(f64::MIN_POSITIVE)
        }
    };
    for i in 0..p {
        pooled[(i, i)] += ridge;
    }

    let chol = pooled.clone().cholesky().ok_or(Error::SingularCovariance { ridge })?;
    let l = chol.l();
    let diag: Vec<f64> = (0..p).map(|i| l[(i, i)]).collect();
    let dmax = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let dmin = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(dmin > 0.0) || (dmin / dmax).powi(2) < 1e-15 {
        return Err(Error::SingularCovariance { ridge });
    }

    let mut weights = Mat::zeros(p, class_count);
    let mut biases = Vec::with_capacity(class_count);
    for k in 0..class_count {
        let mu = Vector::from_vec(means[k].clone());
        let w = chol.solve(&mu);
        let prior = counts[k] as f64 / n as f64;
        biases.push(-0.5 * mu.dot(&w) + prior.ln());
        weights.set_column(k, &w);
    }
    Ok(LdaModel {
        class_means: means,
        pooled_cov_factor: l,
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        ridge,
        weights,
        biases,
    })
}
