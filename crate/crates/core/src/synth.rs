//! Seeded synthetic multichannel Gaussian trials.
//!
//! Each trial `i` draws from its own ChaCha8 stream (`seed`, stream `i`), in
//! this order: one uniform for the outlier decision, `n²` jitter variates
//! (row-major), then `n * N_t` signal variates (sample by sample). Gaussian
//! variates come from the Box-Muller transform `√(-2 ln u1) (cos, sin)(2π u2)`
//! with `u1 = 1 - U[0,1)`, both outputs used in turn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::preprocess::TrialSet;
use crate::serde_mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_channels: usize,
    pub n_samples: usize,
    pub trials_per_class: usize,
    #[serde(with = "serde_mat::vec")]
    pub class_covariances: Vec<Mat>,
    /// Scale `s` of the per-trial mixing jitter `I + s G / √n`.
    #[serde(default)]
    pub nonstationarity: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    /// Amplitude factor applied to outlier trials.
    #[serde(default = "default_outlier_scale")]
    pub outlier_scale: f64,
    pub seed: u64,
    #[serde(default = "default_fs")]
    pub fs: f64,
}

fn default_outlier_scale() -> f64 {
    1.0
}

fn default_fs() -> f64 {
    250.0
}

impl SynthSpec {
    pub fn new(class_covariances: Vec<Mat>, trials_per_class: usize, n_samples: usize, seed: u64) -> Self {
        let n_channels = class_covariances.first().map(|c| c.nrows()).unwrap_or(0);
        Self {
            n_channels,
            n_samples,
            trials_per_class,
            class_covariances,
            nonstationarity: 0.0,
            outlier_rate: 0.0,
            outlier_scale: default_outlier_scale(),
            seed,
            fs: default_fs(),
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_covariances.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_covariances.is_empty() {
            return Err(Error::InvalidArgument("at least one class covariance is required".into()));
        }
        if self.n_channels == 0 || self.n_samples < 2 || self.trials_per_class == 0 {
            return Err(Error::InvalidArgument(
                "channels, trials per class must be positive and samples at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidArgument(format!("outlier rate {} outside [0, 1]", self.outlier_rate)));
        }
        if !(self.nonstationarity >= 0.0 && self.nonstationarity.is_finite())
            || !(self.outlier_scale > 0.0 && self.outlier_scale.is_finite())
            || !(self.fs > 0.0 && self.fs.is_finite())
        {
            return Err(Error::InvalidArgument("jitter, outlier scale and fs must be finite and positive".into()));
        }
        for c in &self.class_covariances {
            if c.shape() != (self.n_channels, self.n_channels) {
                return Err(Error::Dimension(format!(
                    "class covariance is {}x{} but n_channels = {}",
                    c.nrows(),
                    c.ncols(),
                    self.n_channels
                )));
            }
        }
        Ok(())
    }
}

/// Standard normal variates by Box-Muller over a ChaCha8 stream.
pub struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

fn cholesky_factor(c: &Mat) -> Result<Mat> {
    linalg::check_finite(c)?;
    let asym = (c - c.transpose()).norm();
    if asym > 1e-9 * c.norm() {
        return Err(Error::NotSymmetric { asymmetry: asym / c.norm().max(f64::MIN_POSITIVE) });
    }
    let sym = linalg::symmetrize(c);
    match sym.clone().cholesky() {
        Some(ch) => Ok(ch.l()),
        None => {
            let e = linalg::sym_eig(&sym)?;
            Err(Error::NotPositiveDefinite {
                eigenvalue: *e.values.last().unwrap_or(&0.0),
            })
        }
    }
}

/// Trial `index` of the set; its class is `index % class_count`.
pub fn generate_trial(spec: &SynthSpec, factors: &[Mat], index: usize) -> Mat {
    let n = spec.n_channels;
    let k = index % factors.len();
    let mut g = Gaussian::new(spec.seed, index as u64);
    let outlier = g.uniform() < spec.outlier_rate;
    let mut l = factors[k].clone();
    if spec.nonstationarity > 0.0 {
        let mut jitter = Mat::identity(n, n);
        let s = spec.nonstationarity / (n as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                jitter[(i, j)] += s * g.sample();
            }
        }
        l = jitter * l;
    } else {
        for _ in 0..n * n {
            g.sample();
        }
    }
    if outlier {
        l *= spec.outlier_scale;
    }
    let mut z = Mat::zeros(n, spec.n_samples);
    for t in 0..spec.n_samples {
        for c in 0..n {
            z[(c, t)] = g.sample();
        }
    }
    l * z
}

/// Trials interleaved by class (`1, 2, ..., K, 1, 2, ...`), rows centered.
pub fn generate(spec: &SynthSpec) -> Result<TrialSet> {
    spec.validate()?;
    let factors = spec
        .class_covariances
        .iter()
        .map(cholesky_factor)
        .collect::<Result<Vec<_>>>()?;
    let k = spec.class_count();
    let total = k * spec.trials_per_class;
    let trials: Vec<Mat> = (0..total)
        .into_par_iter()
        .map(|i| generate_trial(spec, &factors, i))
        .collect();
    let labels = (0..total).map(|i| i % k + 1).collect();
    TrialSet::new(trials, labels, spec.fs, k, Vec::new())
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> Mat {
    let mut g = Gaussian::new(seed, u64::MAX);
    let a = Mat::from_fn(n, n, |_, _| g.sample());
    a.qr().q()
}

/// Class covariances `Q diag(λ_k) Q^T` sharing a random rotation `Q`, where
/// class `k` has eigenvalue `1 + separation` on axis `k mod n` and 1 elsewhere,
/// plus a mild common spectrum so the composite is well conditioned.
pub fn well_separated_covariances(n_channels: usize, n_classes: usize, separation: f64, seed: u64) -> Vec<Mat> {
    let q = random_orthogonal(n_channels, seed);
    (0..n_classes)
        .map(|k| {
            let diag: Vec<f64> = (0..n_channels)
                .map(|i| {
                    let base = 1.0 + 0.5 * i as f64 / n_channels as f64;
                    if i == k % n_channels {
                        base + separation
                    } else {
                        base
                    }
                })
                .collect();
            linalg::symmetrize(&(&q * Mat::from_diagonal(&Vector::from_vec(diag)) * q.transpose()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp;
    use crate::preprocess::covariances;
    use crate::linalg::RankTolerance;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&Vector::from_vec(v.to_vec()))
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec::new(vec![diag(&[2.0, 1.0]), diag(&[1.0, 2.0])], 3, 50, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.trials, b.trials);
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(generate(&other).unwrap().trials, a.trials);
    }

    #[test]
    fn csp_recovers_known_axis() {
        let spec = SynthSpec::new(vec![diag(&[3.0, 1.0]), diag(&[1.0, 3.0])], 100, 500, 1);
        let trials = generate(&spec).unwrap();
        assert_eq!(trials.len(), 200);
        let cov = covariances(&trials, RankTolerance::default()).unwrap();
        let bank = csp::csp_train(&cov, 1).unwrap();
        let w = bank.filter(0);
        let angle = (w[0].abs() / (w[0] * w[0] + w[1] * w[1]).sqrt()).acos().to_degrees();
        assert!(angle < 5.0, "{angle}");
    }

    #[test]
    fn stationary_penalty_is_sampling_sized() {
        let spec = SynthSpec::new(vec![diag(&[2.0, 1.0, 1.0]), diag(&[1.0, 2.0, 1.0])], 20, 2000, 2);
        let cov = covariances(&generate(&spec).unwrap(), RankTolerance::default()).unwrap();
        let p = csp::scsp_penalty(&cov).unwrap();
        // each |C_i - C̃_k| has Frobenius norm about ‖C‖ √(2 / N_t)
        let bound = 40.0 * 3.0 * 2.0 * (2.0f64 / 2000.0).sqrt() * 3.0;
        assert!(p.norm() <= bound, "{} > {bound}", p.norm());
        let mut jittered = spec.clone();
        jittered.nonstationarity = 0.5;
        let cov2 = covariances(&generate(&jittered).unwrap(), RankTolerance::default()).unwrap();
        assert!(csp::scsp_penalty(&cov2).unwrap().norm() > p.norm());
    }

    #[test]
    fn sample_covariance_converges() {
        let c = diag(&[2.0, 0.5, 1.0]);
        let err_at = |nt: usize| {
            let spec = SynthSpec::new(vec![c.clone()], 40, nt, 3);
            let cov = covariances(&generate(&spec).unwrap(), RankTolerance::default()).unwrap();
            cov.per_trial.iter().map(|ci| (ci - &c).norm()).sum::<f64>() / 40.0
        };
        let (e1, e2) = (err_at(200), err_at(3200));
        // 16x more samples -> about 4x smaller error
        let ratio = e1 / e2;
        assert!((2.5..6.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn outliers_and_validation() {
        let mut spec = SynthSpec::new(vec![diag(&[1.0, 1.0])], 50, 100, 4);
        spec.outlier_rate = 1.0;
        spec.outlier_scale = 10.0;
        let t = generate(&spec).unwrap();
        let v: f64 = t.trials.iter().map(|x| x.norm_squared()).sum::<f64>() / (50.0 * 2.0 * 100.0);
        assert!(v > 50.0);
        spec.outlier_rate = 1.5;
        assert!(generate(&spec).is_err());
        let bad = SynthSpec::new(vec![diag(&[1.0, -1.0])], 2, 10, 0);
        assert!(matches!(generate(&bad), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn gaussian_moments() {
        let mut g = Gaussian::new(9, 0);
        let xs: Vec<f64> = (0..20000).map(|_| g.sample()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn separated_covariances_are_spd() {
        let covs = well_separated_covariances(6, 4, 3.0, 1);
        assert_eq!(covs.len(), 4);
        for c in &covs {
            let e = linalg::sym_eig(c).unwrap();
            assert!(*e.values.last().unwrap() > 0.9);
            assert!(e.values[0] > 3.9);
        }
        assert!((&covs[0] - &covs[1]).norm() > 1.0);
    }
}
