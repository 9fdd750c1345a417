//! Classical CSP and its Tikhonov / stationary regularizations.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, RankTolerance, Subspace};
use crate::preprocess::CovarianceSet;
use crate::serde_mat;

/// Where a spatial filter came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Csp,
    Trcsp,
    Scsp,
    Strcsp,
    Scacsp,
    Extra(Subspace),
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Csp => f.write_str("csp"),
            Provenance::Trcsp => f.write_str("trcsp"),
            Provenance::Scsp => f.write_str("scsp"),
            Provenance::Strcsp => f.write_str("strcsp"),
            Provenance::Scacsp => f.write_str("scacsp"),
            Provenance::Extra(s) => write!(f, "extra:{s}"),
        }
    }
}

/// Ordered spatial filters (columns of `filters`) with scores and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    #[serde(with = "serde_mat")]
    pub filters: Mat,
    pub scores: Vec<f64>,
    pub provenance: Vec<Provenance>,
    #[serde(with = "serde_mat")]
    pub whitener: Mat,
    /// Filters expressed in the whitened space (`filters = whitener * whitened`),
    /// when the method produced them there.
    #[serde(with = "serde_mat::option", default)]
    pub whitened: Option<Mat>,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.filters.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.ncols() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.filters.nrows()
    }

    pub fn filter(&self, j: usize) -> Vec<f64> {
        self.filters.column(j).iter().copied().collect()
    }

    /// Appends `other`'s filters after this bank's.
    pub fn concat(&self, other: &FilterBank) -> FilterBank {
        let filters = concat_columns(&self.filters, &other.filters);
        let whitened = match (&self.whitened, &other.whitened) {
            (Some(a), Some(b)) => Some(concat_columns(a, b)),
            _ => None,
        };
        let mut scores = self.scores.clone();
        scores.extend(&other.scores);
        let mut provenance = self.provenance.clone();
        provenance.extend(&other.provenance);
        FilterBank {
            filters,
            scores,
            provenance,
            whitener: self.whitener.clone(),
            whitened,
        }
    }
}

pub(crate) fn concat_columns(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn select_columns(m: &Mat, idx: &[usize]) -> Mat {
    Mat::from_columns(&idx.iter().map(|&i| m.column(i)).collect::<Vec<_>>())
}

/// Regularization parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl RegGrid {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.iter().chain(&betas).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "regularization parameters must be non-negative".into(),
            ));
        }
        Ok(Self { alphas, betas })
    }

    /// `{0, 1e-6, 1e-5, ..., 1}` for both parameters.
    pub fn standard() -> Self {
        let mut v = vec![0.0];
        v.extend((-6..=0).map(|e| 10f64.powi(e)));
        Self {
            alphas: v.clone(),
            betas: v,
        }
    }

    pub fn single(alpha: f64, beta: f64) -> Self {
        Self {
            alphas: vec![alpha],
            betas: vec![beta],
        }
    }
}

fn check_m(m: usize, max: usize, n_channels: usize) -> Result<()> {
    if m == 0 || m > max {
        return Err(Error::InvalidArgument(format!(
            "m = {m} invalid for {n_channels} channels"
        )));
    }
    Ok(())
}

/// CSP filters: whitened class-1 mean eigendecomposed, `m` filters from each end
/// of the spectrum, scores are the variance ratios.
pub fn csp_train(cov: &CovarianceSet, m: usize) -> Result<FilterBank> {
    cov.require_binary()?;
    let n = cov.n_channels();
    check_m(m, n / 2, n)?;
    let eig = linalg::sym_eig(&cov.whitened_class_mean(1))?;
    if eig.values.iter().all(|v| (v - 0.5).abs() < 1e-12) {
        warn!("class-mean covariances coincide; CSP filter selection is degenerate");
    }
    let idx: Vec<usize> = (0..m).chain(n - m..n).collect();
    let whitened = select_columns(&eig.vectors, &idx);
    Ok(FilterBank {
        filters: &cov.whitener * &whitened,
        scores: idx.iter().map(|&i| eig.values[i]).collect(),
        provenance: vec![Provenance::Csp; 2 * m],
        whitener: cov.whitener.clone(),
        whitened: Some(whitened),
    })
}

fn log_feature(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        warn!("non-positive projected variance {v:e}; clamping to 1e-300");
        1e-300f64.ln()
    }
}

/// `w_j^T C w_j` per filter, optionally log-transformed.
pub fn csp_features(bank: &FilterBank, trial_cov: &Mat, log: bool) -> Result<Vec<f64>> {
    if trial_cov.nrows() != bank.n_channels() || trial_cov.ncols() != bank.n_channels() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} but filters have {} channels",
            trial_cov.nrows(),
            trial_cov.ncols(),
            bank.n_channels()
        )));
    }
    Ok((0..bank.len())
        .map(|j| {
            let v = linalg::quad_form(trial_cov, &bank.filter(j));
            if log {
                log_feature(v)
            } else {
                v
            }
        })
        .collect())
}

/// Variances of the spatially filtered signals `w_j^T X` of a centered trial.
pub fn projected_variance_features(bank: &FilterBank, trial: &Mat, log: bool) -> Result<Vec<f64>> {
    if trial.nrows() != bank.n_channels() {
        return Err(Error::Dimension(format!(
            "trial has {} channels but filters have {}",
            trial.nrows(),
            bank.n_channels()
        )));
    }
    let nt = trial.ncols();
    let denom = (nt.max(2) - 1) as f64;
    let projected = bank.filters.transpose() * trial;
    Ok(projected
        .row_iter()
        .map(|row| {
            let v = row.iter().map(|y| y * y).sum::<f64>() / denom;
            if log {
                log_feature(v)
            } else {
                v
            }
        })
        .collect())
}

fn per_class_filters(
    cov: &CovarianceSet,
    m: usize,
    denominator: &Mat,
    provenance: Provenance,
    tol: RankTolerance,
) -> Result<FilterBank> {
    cov.require_binary()?;
    let n = cov.n_channels();
    check_m(m, n, n)?;
    let mut cols = Vec::with_capacity(2 * m);
    let mut scores = Vec::with_capacity(2 * m);
    for k in 0..2 {
        let eig = linalg::gen_sym_eig(&cov.class_means[k], denominator, tol)?;
        for j in 0..m {
            cols.push(eig.vectors.column(j).into_owned());
            scores.push(eig.values[j]);
        }
    }
    Ok(FilterBank {
        filters: Mat::from_columns(&cols),
        scores,
        provenance: vec![provenance; 2 * m],
        whitener: cov.whitener.clone(),
        whitened: None,
    })
}

fn check_reg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")))
    }
}

/// Tikhonov-regularized CSP: per class, top `m` of `C̃_k w = λ (C̃ + αI) w`.
pub fn trcsp_train(cov: &CovarianceSet, m: usize, alpha: f64) -> Result<FilterBank> {
    check_reg("alpha", alpha)?;
    let n = cov.n_channels();
    let denom = &cov.composite + Mat::identity(n, n) * alpha;
    per_class_filters(cov, m, &denom, Provenance::Trcsp, cov.tol)
}

/// `Σ_k Σ_{i∈Ω_k} |C_i - C̃_k|`, where `|·|` flips negative eigenvalues.
pub fn scsp_penalty(cov: &CovarianceSet) -> Result<Mat> {
    let n = cov.n_channels();
    let mut p = Mat::zeros(n, n);
    for (c, &l) in cov.per_trial.iter().zip(&cov.labels) {
        let diff = linalg::symmetrize(&(c - &cov.class_means[l - 1]));
        let eig = linalg::sym_eig(&diff)?;
        let abs: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
        p += linalg::scale_columns(&eig.vectors, &abs) * eig.vectors.transpose();
    }
    Ok(linalg::symmetrize(&p))
}

/// Stationary CSP (`beta = 0` case of [`strcsp_train`]).
pub fn scsp_train(cov: &CovarianceSet, m: usize, alpha: f64) -> Result<FilterBank> {
    let mut bank = strcsp_train(cov, m, alpha, 0.0)?;
    bank.provenance = vec![Provenance::Scsp; bank.len()];
    Ok(bank)
}

/// Stationary Tikhonov CSP: per class, top `m` of
/// `C̃_k w = λ (C̃ + α P_s + β I) w`.
pub fn strcsp_train(cov: &CovarianceSet, m: usize, alpha: f64, beta: f64) -> Result<FilterBank> {
    check_reg("alpha", alpha)?;
    check_reg("beta", beta)?;
    let n = cov.n_channels();
    let mut denom = &cov.composite + Mat::identity(n, n) * beta;
    if alpha > 0.0 {
        denom += scsp_penalty(cov)? * alpha;
    }
    per_class_filters(cov, m, &denom, Provenance::Strcsp, cov.tol)
}
