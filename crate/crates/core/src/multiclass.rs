//! One-versus-rest and pair-wise multi-class CSP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::{self, FilterBank};
use crate::error::{Error, Result};
use crate::lda::{self, LdaModel};
use crate::linalg::Mat;
use crate::preprocess::{CovarianceSet, RestMode};

/// CSP filters and the LDA trained on their features for one binary problem.
/// Class 1 of the sub-problem is the "own" (OVR) or first (PW) class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCspModel {
    pub bank: FilterBank,
    pub lda: LdaModel,
    pub log_features: bool,
}

impl BinaryCspModel {
    pub fn train(cov: &CovarianceSet, m: usize, log_features: bool) -> Result<Self> {
        let bank = csp::csp_train(cov, m)?;
        let feats = cov
            .per_trial
            .iter()
            .map(|c| csp::csp_features(&bank, c, log_features))
            .collect::<Result<Vec<_>>>()?;
        let lda = lda::lda_train(&feats, &cov.labels, 2, None)?;
        Ok(Self { bank, lda, log_features })
    }

    /// `δ_1 - δ_2` from a trial covariance; positive favours class 1.
    pub fn margin_cov(&self, trial_cov: &Mat) -> Result<f64> {
        let f = csp::csp_features(&self.bank, trial_cov, self.log_features)?;
        let v = self.lda.decision_values(&f)?;
        Ok(v[0] - v[1])
    }

    /// `δ_1 - δ_2` from a centered trial via projected variances.
    pub fn margin_trial(&self, trial: &Mat) -> Result<f64> {
        let f = csp::projected_variance_features(&self.bank, trial, self.log_features)?;
        let v = self.lda.decision_values(&f)?;
        Ok(v[0] - v[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub class_count: usize,
    pub rest_mode: RestMode,
    /// One sub-model per class, in class-id order.
    pub models: Vec<BinaryCspModel>,
}

impl OvrModel {
    pub fn sub_problems(&self) -> usize {
        self.models.len()
    }

    fn decide(margins: &[f64]) -> usize {
        lda::argmax(margins) + 1
    }

    pub fn predict_cov(&self, trial_cov: &Mat) -> Result<usize> {
        let margins = self.models.iter().map(|m| m.margin_cov(trial_cov)).collect::<Result<Vec<_>>>()?;
        Ok(Self::decide(&margins))
    }

    pub fn predict_trial(&self, trial: &Mat) -> Result<usize> {
        let margins = self.models.iter().map(|m| m.margin_trial(trial)).collect::<Result<Vec<_>>>()?;
        Ok(Self::decide(&margins))
    }
}

fn require_multiclass(cov: &CovarianceSet) -> Result<()> {
    if cov.class_count < 2 {
        return Err(Error::InvalidArgument("at least 2 classes are required".into()));
    }
    Ok(())
}

/// Trains one CSP+LDA problem per class against the rest.
pub fn multiclass_ovr_train(cov: &CovarianceSet, m: usize, rest_mode: RestMode, log_features: bool) -> Result<OvrModel> {
    require_multiclass(cov)?;
    let models = (1..=cov.class_count)
        .into_par_iter()
        .map(|k| BinaryCspModel::train(&cov.one_vs_rest(k, rest_mode)?, m, log_features))
        .collect::<Result<Vec<_>>>()?;
    Ok(OvrModel {
        class_count: cov.class_count,
        rest_mode,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwModel {
    pub class_count: usize,
    pub pairs: Vec<(usize, usize)>,
    pub models: Vec<BinaryCspModel>,
}

impl PwModel {
    pub fn sub_problems(&self) -> usize {
        self.models.len()
    }

    fn decide(&self, margins: &[f64]) -> usize {
        let outcomes: Vec<(usize, f64)> = self
            .pairs
            .iter()
            .zip(margins)
            .map(|(&(a, b), &d)| if d >= 0.0 { (a, d.abs()) } else { (b, d.abs()) })
            .collect();
        pw_vote(self.class_count, &outcomes)
    }

    pub fn predict_cov(&self, trial_cov: &Mat) -> Result<usize> {
        let margins = self.models.iter().map(|m| m.margin_cov(trial_cov)).collect::<Result<Vec<_>>>()?;
        Ok(self.decide(&margins))
    }

    pub fn predict_trial(&self, trial: &Mat) -> Result<usize> {
        let margins = self.models.iter().map(|m| m.margin_trial(trial)).collect::<Result<Vec<_>>>()?;
        Ok(self.decide(&margins))
    }
}

/// Majority vote over `(winner, margin)` pair outcomes. Ties are broken by the
/// summed winning margins of the tied classes, then by the lowest class id.
pub fn pw_vote(class_count: usize, outcomes: &[(usize, f64)]) -> usize {
    let mut votes = vec![0usize; class_count];
    let mut margin = vec![0.0f64; class_count];
    for &(w, d) in outcomes {
        votes[w - 1] += 1;
        margin[w - 1] += d;
    }
    let mut best = 0;
    for k in 1..class_count {
        if votes[k] > votes[best] || (votes[k] == votes[best] && margin[k] > margin[best]) {
            best = k;
        }
    }
    best + 1
}

/// Trains one CSP+LDA problem for every unordered class pair `(a, b)`, `a < b`.
pub fn multiclass_pw_train(cov: &CovarianceSet, m: usize, log_features: bool) -> Result<PwModel> {
    require_multiclass(cov)?;
    let pairs: Vec<(usize, usize)> = (1..=cov.class_count)
        .flat_map(|a| (a + 1..=cov.class_count).map(move |b| (a, b)))
        .collect();
    let models = pairs
        .par_iter()
        .map(|&(a, b)| BinaryCspModel::train(&cov.pair(a, b)?, m, log_features))
        .collect::<Result<Vec<_>>>()?;
    Ok(PwModel {
        class_count: cov.class_count,
        pairs,
        models,
    })
}
