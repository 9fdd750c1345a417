//! End-to-end training and prediction for every supported method.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::csp::{self, FilterBank, RegGrid};
use crate::error::{Error, Result};
use crate::eval::{self, CvPlan, CvReport, GridPoint};
use crate::lda::{self, LdaModel};
use crate::linalg::{self, Mat, RankTolerance};
use crate::multiclass::{self, OvrModel, PwModel};
use crate::preprocess::{self, BandpassSpec, CovarianceSet, RestMode, TrialSet};
use crate::scatter::{self, SelectionMode};
use crate::serde_mat;
use crate::subspace::{self, NsrMode, NsrProjector, SubspaceSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Csp,
    Trcsp,
    Scsp,
    Strcsp,
    CspOvr,
    CspPw,
    Scacsp,
    ScacspExtrasub,
    ScacspNsr,
    ScacspNsrExtrasub,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Csp,
        Method::Trcsp,
        Method::Scsp,
        Method::Strcsp,
        Method::CspOvr,
        Method::CspPw,
        Method::Scacsp,
        Method::ScacspExtrasub,
        Method::ScacspNsr,
        Method::ScacspNsrExtrasub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Csp => "csp",
            Method::Trcsp => "trcsp",
            Method::Scsp => "scsp",
            Method::Strcsp => "strcsp",
            Method::CspOvr => "csp-ovr",
            Method::CspPw => "csp-pw",
            Method::Scacsp => "scacsp",
            Method::ScacspExtrasub => "scacsp-extrasub",
            Method::ScacspNsr => "scacsp-nsr",
            Method::ScacspNsrExtrasub => "scacsp-nsr-extrasub",
        }
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::Trcsp | Method::Scsp | Method::Strcsp)
    }

    pub fn uses_beta(self) -> bool {
        self == Method::Strcsp
    }

    pub fn is_regularized(self) -> bool {
        self.uses_alpha() || self.uses_beta()
    }

    pub fn is_scacsp(self) -> bool {
        matches!(
            self,
            Method::Scacsp | Method::ScacspExtrasub | Method::ScacspNsr | Method::ScacspNsrExtrasub
        )
    }

    pub fn uses_extra(self) -> bool {
        matches!(self, Method::ScacspExtrasub | Method::ScacspNsrExtrasub)
    }

    pub fn uses_nsr(self) -> bool {
        matches!(self, Method::ScacspNsr | Method::ScacspNsrExtrasub)
    }

    /// Two-class-only methods.
    pub fn is_binary_only(self) -> bool {
        matches!(self, Method::Csp | Method::Trcsp | Method::Scsp | Method::Strcsp)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == t)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Band-pass corners and order; the sampling rate comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

impl Default for Band {
    fn default() -> Self {
        Self {
            low_hz: 7.0,
            high_hz: 31.0,
            order: 5,
        }
    }
}

impl Band {
    pub fn spec(self, fs: f64) -> BandpassSpec {
        BandpassSpec {
            low_hz: self.low_hz,
            high_hz: self.high_hz,
            order: self.order,
            fs,
        }
    }
}

fn default_m() -> usize {
    3
}

fn default_true() -> bool {
    true
}

fn default_rank_tol() -> f64 {
    RankTolerance::default().relative()
}

fn default_band() -> Option<Band> {
    Some(Band::default())
}

/// Method and options. Optional fields left `None` take method defaults;
/// setting one the method does not use is a configuration error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    #[serde(default = "default_m")]
    pub m: usize,
    /// `None` disables band-pass filtering.
    #[serde(default = "default_band")]
    pub band: Option<Band>,
    /// `(start, end)` seconds from trial onset, applied after filtering.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub extra_subspaces: Option<SubspaceSelector>,
    /// Number of extra filters (default `m`).
    #[serde(default)]
    pub extra_count: Option<usize>,
    /// Default CNSR, with BNSR used when CNSR is inapplicable.
    #[serde(default)]
    pub nsr_mode: Option<NsrMode>,
    /// Default: the standard `{0, 1e-6, ..., 1}` grid.
    #[serde(default)]
    pub reg_grid: Option<RegGrid>,
    #[serde(default)]
    pub cv: CvPlan,
    #[serde(default = "default_true")]
    pub log_features: bool,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default)]
    pub ovr_rest: RestMode,
    /// Filter selection for 3+ class scaCSP.
    #[serde(default)]
    pub selection: SelectionMode,
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            m: default_m(),
            band: default_band(),
            window: None,
            extra_subspaces: None,
            extra_count: None,
            nsr_mode: None,
            reg_grid: None,
            cv: CvPlan::default(),
            log_features: true,
            rank_tol: default_rank_tol(),
            ovr_rest: RestMode::default(),
            selection: SelectionMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let method = self.method;
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        RankTolerance::new(self.rank_tol)?;
        if self.cv.folds < 2 {
            return Err(Error::InfeasibleFolds(format!("need at least 2 folds, got {}", self.cv.folds)));
        }
        if self.nsr_mode.is_some() && !method.uses_nsr() {
            return Err(Error::InvalidArgument(format!("NSR mode requires an NSR scaCSP method, not {method}")));
        }
        if self.nsr_mode == Some(NsrMode::None) {
            return Err(Error::InvalidArgument("NSR methods need mode cnsr or bnsr".into()));
        }
        if (self.extra_subspaces.is_some() || self.extra_count.is_some()) && !method.uses_extra() {
            return Err(Error::InvalidArgument(format!("extra subspaces require an extrasub method, not {method}")));
        }
        if self.extra_count == Some(0) {
            return Err(Error::InvalidArgument("extra filter count must be positive".into()));
        }
        if self.reg_grid.is_some() && !method.is_regularized() {
            return Err(Error::InvalidArgument(format!("{method} has no regularization parameters")));
        }
        if let Some(g) = &self.reg_grid {
            RegGrid::new(g.alphas.clone(), g.betas.clone())?;
        }
        if let Some((a, b)) = self.window {
            if !(a >= 0.0 && b > a) {
                return Err(Error::InvalidArgument(format!("window {a}:{b} must satisfy 0 <= start < end")));
            }
        }
        Ok(())
    }

    pub fn tol(&self) -> RankTolerance {
        RankTolerance::new(self.rank_tol).unwrap_or_default()
    }

    pub fn grid(&self) -> RegGrid {
        self.reg_grid.clone().unwrap_or_else(RegGrid::standard)
    }

    pub fn grid_points(&self) -> Vec<GridPoint> {
        eval::grid_points(&self.grid(), self.method.uses_alpha(), self.method.uses_beta())
    }

    pub fn nsr(&self) -> NsrMode {
        self.nsr_mode.unwrap_or_default()
    }

    pub fn extra_count(&self) -> usize {
        self.extra_count.unwrap_or(self.m)
    }

    pub fn selector(&self) -> SubspaceSelector {
        self.extra_subspaces.clone().unwrap_or_default()
    }

    /// Band-pass filtering then windowing, as configured.
    pub fn preprocess(&self, trials: &TrialSet) -> Result<TrialSet> {
        let mut out: Vec<Mat> = match self.band {
            Some(b) => {
                let spec = b.spec(trials.fs);
                spec.validate()?;
                trials
                    .trials
                    .iter()
                    .map(|x| preprocess::butterworth_bandpass(x, &spec))
                    .collect::<Result<_>>()?
            }
            None => trials.trials.clone(),
        };
        if let Some((a, b)) = self.window {
            let start = (a * trials.fs).round() as usize;
            let end = (b * trials.fs).round() as usize;
            if end > trials.n_samples() || end <= start {
                return Err(Error::OutOfBounds {
                    events: (0..trials.len()).collect(),
                });
            }
            out = out.into_iter().map(|x| x.columns(start, end - start).into_owned()).collect();
        }
        TrialSet::new(out, trials.labels.clone(), trials.fs, trials.class_count, trials.channel_names.clone())
    }
}

/// Filters, optional null-space reduction and one LDA over their features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleModel {
    pub bank: FilterBank,
    pub nsr: Option<NsrProjector>,
    pub lda: LdaModel,
    pub log_features: bool,
}

impl SingleModel {
    fn fit(bank: FilterBank, nsr: Option<NsrProjector>, cov: &CovarianceSet, log_features: bool) -> Result<Self> {
        let feats = cov
            .per_trial
            .iter()
            .map(|c| features(&bank, nsr.as_ref(), log_features, c))
            .collect::<Result<Vec<_>>>()?;
        let lda = lda::lda_train(&feats, &cov.labels, cov.class_count, None)?;
        Ok(Self {
            bank,
            nsr,
            lda,
            log_features,
        })
    }

    pub fn features(&self, trial_cov: &Mat) -> Result<Vec<f64>> {
        features(&self.bank, self.nsr.as_ref(), self.log_features, trial_cov)
    }
}

/// Quadratic-form features, or `V^T (I - QQ^T) r` (never logged) under NSR.
fn features(bank: &FilterBank, nsr: Option<&NsrProjector>, log: bool, trial_cov: &Mat) -> Result<Vec<f64>> {
    match nsr {
        Some(proj) => {
            let whitened = bank
                .whitened
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("NSR needs whitened-space filters".into()))?;
            let pc = &bank.whitener;
            let r = linalg::vec(&linalg::symmetrize(&(pc.transpose() * trial_cov * pc)));
            subspace::reduce_features(proj, &scatter::feature_projection(whitened), &r)
        }
        None => csp::csp_features(bank, trial_cov, log),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Single(Box<SingleModel>),
    Ovr(OvrModel),
    Pw(PwModel),
}

/// A trained pipeline; persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub config: PipelineConfig,
    pub n_channels: usize,
    pub class_count: usize,
    /// Composite whitener of the full training set.
    #[serde(with = "serde_mat")]
    pub whitener: Mat,
    /// Regularization point the final model was trained at.
    pub params: GridPoint,
    pub classifier: Classifier,
}

fn build_nsr(cov: &CovarianceSet, config: &PipelineConfig) -> Result<NsrProjector> {
    let v = scatter::vectorize_covariances(cov);
    let triple = scatter::scatter_matrices(&v, cov.tol)?;
    let proj = subspace::nsr_projector(&triple, config.nsr())?;
    if proj.applicable {
        return Ok(proj);
    }
    if proj.mode == NsrMode::Cnsr {
        warn!("CNSR inapplicable (semi-full total scatter); using BNSR");
        let fallback = subspace::nsr_projector(&triple, NsrMode::Bnsr)?;
        if fallback.applicable {
            return Ok(fallback);
        }
    }
    Err(Error::InapplicableProjector { fallback: "no reduction" })
}

fn scacsp_bank(cov: &CovarianceSet, config: &PipelineConfig) -> Result<FilterBank> {
    let base = if cov.class_count == 2 {
        scatter::scacsp_binary_train(cov, config.m)?.0
    } else {
        scatter::scacsp_multi_train(cov, config.m, config.selection)?.0
    };
    if !config.method.uses_extra() {
        return Ok(base);
    }
    let v = scatter::vectorize_covariances(cov);
    let triple = scatter::scatter_matrices(&v, cov.tol)?;
    let extra = subspace::extra_filters(&triple, &config.selector(), config.extra_count())?;
    subspace::augment(&base, &extra)
}

impl PipelineModel {
    /// Trains at one fixed regularization point.
    pub fn fit(config: &PipelineConfig, cov: &CovarianceSet, params: GridPoint) -> Result<Self> {
        config.validate()?;
        let method = config.method;
        if method.is_binary_only() && cov.class_count != 2 {
            return Err(Error::InvalidArgument(format!(
                "{method} is a two-class method but the data has {} classes (use csp-ovr, csp-pw or scacsp)",
                cov.class_count
            )));
        }
        let m = config.m;
        let log = config.log_features;
        let classifier = match method {
            Method::Csp => Classifier::Single(Box::new(SingleModel::fit(csp::csp_train(cov, m)?, None, cov, log)?)),
            Method::Trcsp => {
                Classifier::Single(Box::new(SingleModel::fit(csp::trcsp_train(cov, m, params.alpha)?, None, cov, log)?))
            }
            Method::Scsp => {
                Classifier::Single(Box::new(SingleModel::fit(csp::scsp_train(cov, m, params.alpha)?, None, cov, log)?))
            }
            Method::Strcsp => Classifier::Single(Box::new(SingleModel::fit(
                csp::strcsp_train(cov, m, params.alpha, params.beta)?,
                None,
                cov,
                log,
            )?)),
            Method::CspOvr => Classifier::Ovr(multiclass::multiclass_ovr_train(cov, m, config.ovr_rest, log)?),
            Method::CspPw => Classifier::Pw(multiclass::multiclass_pw_train(cov, m, log)?),
            Method::Scacsp | Method::ScacspExtrasub | Method::ScacspNsr | Method::ScacspNsrExtrasub => {
                let bank = scacsp_bank(cov, config)?;
                let nsr = if method.uses_nsr() { Some(build_nsr(cov, config)?) } else { None };
                Classifier::Single(Box::new(SingleModel::fit(bank, nsr, cov, log)?))
            }
        };
        Ok(Self {
            config: config.clone(),
            n_channels: cov.n_channels(),
            class_count: cov.class_count,
            whitener: cov.whitener.clone(),
            params,
            classifier,
        })
    }

    /// Cross-validates every grid point (one point for unregularized methods),
    /// retraining the whole pipeline inside each fold, then fits the best point
    /// on all trials.
    pub fn train(config: &PipelineConfig, cov: &CovarianceSet) -> Result<(Self, CvReport)> {
        config.validate()?;
        let report = cross_validate(config, cov)?;
        info!(
            "{}: best alpha={} beta={} cv accuracy={:.4}",
            config.method, report.best.alpha, report.best.beta, report.best_accuracy
        );
        let model = Self::fit(config, cov, report.best)?;
        Ok((model, report))
    }

    /// Fits without cross-validation: at the single grid point of an
    /// unregularized method, or the first (smallest) point otherwise.
    pub fn fit_default(config: &PipelineConfig, cov: &CovarianceSet) -> Result<Self> {
        let point = config.grid_points()[0];
        Self::fit(config, cov, point)
    }

    fn check_channels(&self, n: usize) -> Result<()> {
        if n != self.n_channels {
            return Err(Error::Dimension(format!(
                "model expects {} channels, data has {n}",
                self.n_channels
            )));
        }
        Ok(())
    }

    /// Predicted class id for one trial covariance.
    pub fn predict_cov(&self, trial_cov: &Mat) -> Result<usize> {
        self.check_channels(trial_cov.nrows())?;
        match &self.classifier {
            Classifier::Single(s) => Ok(s.lda.predict(&s.features(trial_cov)?)?.0),
            Classifier::Ovr(o) => o.predict_cov(trial_cov),
            Classifier::Pw(p) => p.predict_cov(trial_cov),
        }
    }

    /// Predicted class id for one centered trial. Filter-only models work on
    /// the projected signals; NSR models need the full covariance.
    pub fn predict_trial(&self, trial: &Mat) -> Result<usize> {
        self.check_channels(trial.nrows())?;
        match &self.classifier {
            Classifier::Single(s) if s.nsr.is_none() => {
                let f = csp::projected_variance_features(&s.bank, trial, s.log_features)?;
                Ok(s.lda.predict(&f)?.0)
            }
            Classifier::Single(_) => self.predict_cov(&preprocess::trial_covariance(trial)),
            Classifier::Ovr(o) => o.predict_trial(trial),
            Classifier::Pw(p) => p.predict_trial(trial),
        }
    }

    pub fn predict_all(&self, covs: &[Mat]) -> Result<Vec<usize>> {
        covs.iter().map(|c| self.predict_cov(c)).collect()
    }

    pub fn feature_count(&self) -> usize {
        match &self.classifier {
            Classifier::Single(s) => s.bank.len(),
            Classifier::Ovr(o) => o.models.iter().map(|m| m.bank.len()).sum(),
            Classifier::Pw(p) => p.models.iter().map(|m| m.bank.len()).sum(),
        }
    }
}

/// Fold-wise accuracy of every grid point of `config`.
pub fn cross_validate(config: &PipelineConfig, cov: &CovarianceSet) -> Result<CvReport> {
    let points = config.grid_points();
    eval::cross_validate(&cov.labels, &config.cv, &points, |p, train, test| {
        let fold = cov.subset(train)?;
        let model = PipelineModel::fit(config, &fold, *p)?;
        let preds = test.iter().map(|&i| model.predict_cov(&cov.per_trial[i])).collect::<Result<Vec<_>>>()?;
        let truth: Vec<usize> = test.iter().map(|&i| cov.labels[i]).collect();
        eval::accuracy(&preds, &truth)
    })
}
