//! Band-pass filtering, epoching, centering and spatial covariance estimation.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, RankTolerance};

/// Labeled trials of identical shape (`channels x samples`), each row centered.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Mat>,
    /// Class ids in `1..=class_count`.
    pub labels: Vec<usize>,
    pub fs: f64,
    pub class_count: usize,
    pub channel_names: Vec<String>,
}

/// Subtracts each row's mean.
pub fn center_rows(x: &mut Mat) {
    let n = x.ncols();
    if n == 0 {
        return;
    }
    for mut row in x.row_iter_mut() {
        let mean = row.iter().sum::<f64>() / n as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
}

pub(crate) fn validate_labels(labels: &[usize], class_count: usize) -> Result<()> {
    if class_count == 0 {
        return Err(Error::InvalidArgument("class count must be at least 1".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > class_count) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside 1..={class_count}"
        )));
    }
    for k in 1..=class_count {
        if !labels.contains(&k) {
            return Err(Error::InvalidArgument(format!("class {k} has no trials")));
        }
    }
    Ok(())
}

impl TrialSet {
    /// Validates shapes and labels and centers every trial row.
    pub fn new(
        mut trials: Vec<Mat>,
        labels: Vec<usize>,
        fs: f64,
        class_count: usize,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InvalidArgument("trial set is empty".into()));
        }
        if trials.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} trials but {} labels",
                trials.len(),
                labels.len()
            )));
        }
        let (nc, nt) = trials[0].shape();
        if let Some(i) = trials.iter().position(|t| t.shape() != (nc, nt)) {
            return Err(Error::Dimension(format!(
                "trial {i} is {}x{}, expected {nc}x{nt}",
                trials[i].nrows(),
                trials[i].ncols()
            )));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling rate must be positive, got {fs}")));
        }
        validate_labels(&labels, class_count)?;
        for t in &trials {
            linalg::check_finite(t)?;
        }
        let channel_names = if channel_names.is_empty() {
            (1..=nc).map(|i| format!("ch{i}")).collect()
        } else if channel_names.len() == nc {
            channel_names
        } else {
            return Err(Error::Dimension(format!(
                "{} channel names for {nc} channels",
                channel_names.len()
            )));
        };
        trials.iter_mut().for_each(center_rows);
        Ok(Self {
            trials,
            labels,
            fs,
            class_count,
            channel_names,
        })
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.trials[0].nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.trials[0].ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub fs: f64,
}

impl BandpassSpec {
    /// 7-31 Hz, fifth order.
    pub fn motor_imagery(fs: f64) -> Self {
        Self {
            low_hz: 7.0,
            high_hz: 31.0,
            order: 5,
            fs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyq = self.fs / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyq) {
            return Err(Error::InvalidArgument(format!(
                "corner frequencies must satisfy 0 < {} < {} < fs/2 = {nyq}",
                self.low_hz, self.high_hz
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("filter order must be at least 1".into()));
        }
        Ok(())
    }
}

/// One biquad `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let z2 = z_inv * z_inv;
        let num = Complex::new(self.b[0], 0.0) + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex<f64> {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / fs;
        let z_inv = Complex::new(omega.cos(), -omega.sin());
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Causal filtering of one channel (transposed direct form II, zero state).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }
}

/// Digital Butterworth band-pass: analog low-pass prototype, low-pass to
/// band-pass transform at prewarped corners, bilinear transform, grouped into
/// `order` biquads each holding one zero at `z = 1` and one at `z = -1`.
pub fn design_bandpass(spec: &BandpassSpec) -> Result<SosFilter> {
    spec.validate()?;
    let n = spec.order;
    let fs = spec.fs;
    let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
    let (w1, w2) = (warp(spec.low_hz), warp(spec.high_hz));
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let mut poles: Vec<Complex<f64>> = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let root = (half * half - Complex::new(w0 * w0, 0.0)).sqrt();
        for s in [half + root, half - root] {
            let t = s / (2.0 * fs);
            poles.push((Complex::new(1.0, 0.0) + t) / (Complex::new(1.0, 0.0) - t));
        }
    }

    let eps = 1e-9;
    let mut upper: Vec<Complex<f64>> = poles.iter().copied().filter(|z| z.im > eps).collect();
    let mut real: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= eps).map(|z| z.re).collect();
    upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    real.sort_by(f64::total_cmp);
    if upper.len() * 2 + real.len() != 2 * n || !real.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "band-pass design produced unpaired poles".into(),
        ));
    }

    let mut sections: Vec<Biquad> = upper
        .iter()
        .map(|z| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        })
        .collect();
    for pair in real.chunks(2) {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(pair[0] + pair[1]), pair[0] * pair[1]],
        });
    }

    let mut filter = SosFilter { sections };
    let center_hz = 2.0 * (w0 / (2.0 * fs)).atan() * fs / (2.0 * std::f64::consts::PI);
    let gain = filter.response(center_hz, fs).norm();
    let g = 1.0 / gain;
    filter.sections[0].b.iter_mut().for_each(|b| *b *= g);
    Ok(filter)
}

/// Causal per-channel Butterworth band-pass of a `channels x samples` matrix.
pub fn butterworth_bandpass(signal: &Mat, spec: &BandpassSpec) -> Result<Mat> {
    let filter = design_bandpass(spec)?;
    if signal.ncols() <= 3 * spec.order {
        return Err(Error::InvalidArgument(format!(
            "signal has {} samples; need more than {}",
            signal.ncols(),
            3 * spec.order
        )));
    }
    let mut out = Mat::zeros(signal.nrows(), signal.ncols());
    for (r, row) in signal.row_iter().enumerate() {
        let x: Vec<f64> = row.iter().copied().collect();
        let y = filter.filter(&x);
        for (c, v) in y.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

/// Slices `[event + start_s, event + end_s)` windows out of a continuous
/// recording; `events` holds `(sample index, class id)` pairs.
pub fn extract_epochs(
    continuous: &Mat,
    events: &[(usize, usize)],
    window: (f64, f64),
    fs: f64,
    class_count: usize,
    channel_names: Vec<String>,
) -> Result<TrialSet> {
    let (start_s, end_s) = window;
    if !(end_s > start_s) {
        return Err(Error::InvalidArgument(format!(
            "window end {end_s} must exceed start {start_s}"
        )));
    }
    let offset = (start_s * fs).round() as i64;
    let len = ((end_s - start_s) * fs).round() as i64;
    if len <= 0 {
        return Err(Error::InvalidArgument("window shorter than one sample".into()));
    }
    let total = continuous.ncols() as i64;
    let bad: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, &(idx, _))| {
            let s = idx as i64 + offset;
            s < 0 || s + len > total
        })
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::OutOfBounds { events: bad });
    }
    let trials = events
        .iter()
        .map(|&(idx, _)| {
            let s = (idx as i64 + offset) as usize;
            continuous.columns(s, len as usize).into_owned()
        })
        .collect();
    let labels = events.iter().map(|&(_, l)| l).collect();
    TrialSet::new(trials, labels, fs, class_count, channel_names)
}

/// `X X^T / (N_t - 1)`, accumulated in fixed sample order; exactly symmetric.
pub fn trial_covariance(x: &Mat) -> Mat {
    let (nc, nt) = x.shape();
    let denom = (nt.max(2) - 1) as f64;
    let mut c = Mat::zeros(nc, nc);
    for i in 0..nc {
        for j in 0..=i {
            let mut acc = 0.0;
            for t in 0..nt {
                acc += x[(i, t)] * x[(j, t)];
            }
            let v = acc / denom;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// How the "rest" class mean is formed in one-versus-rest problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestMode {
    /// Arithmetic mean of the rest classes' mean covariances.
    #[default]
    ClassMean,
    /// Mean over all rest trials.
    TrialPool,
}

/// Per-trial covariances with class means, composite, whitener and whitened forms.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub per_trial: Vec<Mat>,
    pub class_means: Vec<Mat>,
    pub composite: Mat,
    pub whitener: Mat,
    pub whitened_per_trial: Vec<Mat>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub tol: RankTolerance,
}

impl CovarianceSet {
    /// Class means `1/|Ω_k| Σ C_i` and composite `Σ_k C̃_k`.
    pub fn from_trial_covariances(
        per_trial: Vec<Mat>,
        labels: Vec<usize>,
        class_count: usize,
        tol: RankTolerance,
    ) -> Result<Self> {
        if per_trial.is_empty() {
            return Err(Error::InvalidArgument("no trials".into()));
        }
        if per_trial.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} covariances but {} labels",
                per_trial.len(),
                labels.len()
            )));
        }
        validate_labels(&labels, class_count)?;
        let n = per_trial[0].nrows();
        let mut sums = vec![Mat::zeros(n, n); class_count];
        let mut counts = vec![0usize; class_count];
        for (c, &l) in per_trial.iter().zip(&labels) {
            if c.shape() != (n, n) {
                return Err(Error::Dimension("covariances differ in size".into()));
            }
            sums[l - 1] += c;
            counts[l - 1] += 1;
        }
        let class_means = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &k)| s / k as f64)
            .collect();
        Self::with_class_means(per_trial, labels, class_means, tol)
    }

    /// Builds the set around externally supplied class means.
    pub fn with_class_means(
        per_trial: Vec<Mat>,
        labels: Vec<usize>,
        class_means: Vec<Mat>,
        tol: RankTolerance,
    ) -> Result<Self> {
        let class_count = class_means.len();
        validate_labels(&labels, class_count)?;
        let n = per_trial[0].nrows();
        let mut composite = Mat::zeros(n, n);
        for m in &class_means {
            composite += m;
        }
        let whitener = linalg::whitening_transform(&composite, tol)?;
        let whitened_per_trial = per_trial
            .iter()
            .map(|c| linalg::symmetrize(&(whitener.transpose() * c * &whitener)))
            .collect();
        Ok(Self {
            per_trial,
            class_means,
            composite,
            whitener,
            whitened_per_trial,
            labels,
            class_count,
            tol,
        })
    }

    pub fn len(&self) -> usize {
        self.per_trial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_trial.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.composite.nrows()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }

    /// `P_c^T C̃_k P_c` for class id `k`.
    pub fn whitened_class_mean(&self, k: usize) -> Mat {
        linalg::symmetrize(&(self.whitener.transpose() * &self.class_means[k - 1] * &self.whitener))
    }

    /// `P_c^T C P_c` for an arbitrary covariance.
    pub fn whiten(&self, c: &Mat) -> Mat {
        linalg::symmetrize(&(self.whitener.transpose() * c * &self.whitener))
    }

    pub fn require_binary(&self) -> Result<()> {
        if self.class_count != 2 {
            return Err(Error::InvalidArgument(format!(
                "binary method requires exactly 2 classes, got {}",
                self.class_count
            )));
        }
        Ok(())
    }

    /// Binary set of classes `a` (relabeled 1) and `b` (relabeled 2).
    pub fn pair(&self, a: usize, b: usize) -> Result<Self> {
        let mut per_trial = Vec::new();
        let mut labels = Vec::new();
        for (c, &l) in self.per_trial.iter().zip(&self.labels) {
            if l == a || l == b {
                per_trial.push(c.clone());
                labels.push(if l == a { 1 } else { 2 });
            }
        }
        Self::from_trial_covariances(per_trial, labels, 2, self.tol)
    }

    /// Binary set of class `own` (relabeled 1) against all others (relabeled 2).
    pub fn one_vs_rest(&self, own: usize, mode: RestMode) -> Result<Self> {
        let labels: Vec<usize> = self
            .labels
            .iter()
            .map(|&l| if l == own { 1 } else { 2 })
            .collect();
        match mode {
            RestMode::TrialPool => {
                Self::from_trial_covariances(self.per_trial.clone(), labels, 2, self.tol)
            }
            RestMode::ClassMean => {
                let n = self.n_channels();
                let mut rest = Mat::zeros(n, n);
                for (k, m) in self.class_means.iter().enumerate() {
                    if k + 1 != own {
                        rest += m;
                    }
                }
                rest /= (self.class_count - 1) as f64;
                let means = vec![self.class_means[own - 1].clone(), rest];
                Self::with_class_means(self.per_trial.clone(), labels, means, self.tol)
            }
        }
    }

    /// Subset of trials by index, with class means and whitener recomputed.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let per_trial = indices.iter().map(|&i| self.per_trial[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_trial_covariances(per_trial, labels, self.class_count, self.tol)
    }
}

/// Spatial covariances of every trial plus class means, composite and whitener.
pub fn covariances(trials: &TrialSet, tol: RankTolerance) -> Result<CovarianceSet> {
    let per_trial = trials.trials.iter().map(trial_covariance).collect();
    CovarianceSet::from_trial_covariances(per_trial, trials.labels.clone(), trials.class_count, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Magnitude of the analog band-pass prototype at the prewarped frequency;
    /// the bilinear transform maps it exactly onto the digital response.
    fn analytic_magnitude(spec: &BandpassSpec, f: f64) -> f64 {
        let warp = |x: f64| 2.0 * spec.fs * (std::f64::consts::PI * x / spec.fs).tan();
        let (w1, w2, w) = (warp(spec.low_hz), warp(spec.high_hz), warp(f));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + x.powi(2 * spec.order as i32)).sqrt()
    }

    fn steady_state_ratio(freq: f64) -> (f64, f64) {
        let spec = BandpassSpec::motor_imagery(250.0);
        let n = 250 * 20;
        let x = Mat::from_fn(1, n, |_, t| (2.0 * std::f64::consts::PI * freq * t as f64 / 250.0).sin());
        let y = butterworth_bandpass(&x, &spec).unwrap();
        let tail: Vec<f64> = y.row(0).iter().skip(250 * 10).copied().collect();
        let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        (rms * std::f64::consts::SQRT_2, analytic_magnitude(&spec, freq))
    }

    #[test]
    fn passband_sinusoid_kept() {
        let (measured, analytic) = steady_state_ratio(20.0);
        assert!(measured >= 0.95, "{measured}");
        assert!((measured - analytic).abs() < 2e-3);
    }

    #[test]
    fn stopband_sinusoid_rejected() {
        let (measured, analytic) = steady_state_ratio(2.0);
        assert!(measured <= 0.1, "{measured}");
        assert!((measured - analytic).abs() < 2e-3);
    }

    #[test]
    fn digital_response_matches_analog_prototype() {
        let spec = BandpassSpec::motor_imagery(250.0);
        let f = design_bandpass(&spec).unwrap();
        assert_eq!(f.sections.len(), 5);
        for hz in [1.0, 5.0, 7.0, 12.0, 20.0, 31.0, 40.0, 80.0, 120.0] {
            let got = f.response(hz, 250.0).norm();
            let want = analytic_magnitude(&spec, hz);
            assert!((got - want).abs() < 1e-9, "{hz}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_in_zero_out_and_bad_corners() {
        let spec = BandpassSpec::motor_imagery(250.0);
        let y = butterworth_bandpass(&Mat::zeros(2, 100), &spec).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let bad = BandpassSpec { high_hz: 130.0, ..spec };
        assert!(butterworth_bandpass(&Mat::zeros(1, 100), &bad).is_err());
        let bad = BandpassSpec { low_hz: 0.0, ..spec };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn filter_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = BandpassSpec::motor_imagery(100.0);
        let x = Mat::from_fn(2, 400, |_, _| rng.random_range(-1.0..1.0));
        let y = Mat::from_fn(2, 400, |_, _| rng.random_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let lhs = butterworth_bandpass(&(&x * a + &y * b), &spec).unwrap();
        let rhs = butterworth_bandpass(&x, &spec).unwrap() * a + butterworth_bandpass(&y, &spec).unwrap() * b;
        assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn epoch_windows() {
        let x = Mat::from_fn(2, 1000, |r, c| (r * 1000 + c) as f64);
        let ts = extract_epochs(&x, &[(0, 1)], (0.0, 1.0), 100.0, 1, vec![]).unwrap();
        assert_eq!(ts.n_samples(), 100);

        // cue at 2 s, window 0.5..2.5 s after cue
        let fs = 250.0;
        let rec = Mat::from_fn(1, 2000, |_, c| c as f64);
        let ts = extract_epochs(&rec, &[(500, 1)], (0.5, 2.5), fs, 1, vec![]).unwrap();
        assert_eq!(ts.n_samples(), 500);
        // centered slice of samples 625..1125 -> mean 874.5
        assert!((ts.trials[0][(0, 0)] - (625.0 - 874.5)).abs() < 1e-9);

        let err = extract_epochs(&x, &[(0, 1), (950, 1)], (0.0, 1.0), 100.0, 1, vec![]).unwrap_err();
        assert_eq!(err, Error::OutOfBounds { events: vec![1] });
    }

    #[test]
    fn centering_leaves_tiny_row_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Mat::from_fn(3, 257, |_, _| 5.0 + rng.random_range(-1.0..1.0));
        let ts = TrialSet::new(vec![x], vec![1], 100.0, 1, vec![]).unwrap();
        for row in ts.trials[0].row_iter() {
            let mean = row.iter().sum::<f64>() / 257.0;
            let std = (row.iter().map(|v| v * v).sum::<f64>() / 256.0).sqrt();
            assert!(mean.abs() <= 1e-12 * std);
        }
    }

    #[test]
    fn hand_computed_covariance() {
        let x = Mat::from_row_slice(2, 2, &[1.0, -1.0, 2.0, -2.0]);
        let c = trial_covariance(&x);
        assert_eq!(c, Mat::from_row_slice(2, 2, &[2.0, 4.0, 4.0, 8.0]));
    }

    #[test]
    fn covariance_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let c = trial_covariance(&x);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for t in 0..5 {
                    s += x[(i, t)] * x[(j, t)];
                }
                assert_eq!(c[(i, j)], s / 4.0);
            }
        }
    }

    #[test]
    fn identical_classes_give_identical_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base: Vec<Mat> = (0..4).map(|_| Mat::from_fn(3, 50, |_, _| rng.random_range(-1.0..1.0))).collect();
        let mut trials = base.clone();
        trials.extend(base);
        let ts = TrialSet::new(trials, vec![1, 1, 1, 1, 2, 2, 2, 2], 100.0, 2, vec![]).unwrap();
        let cs = covariances(&ts, RankTolerance::default()).unwrap();
        assert_eq!(cs.class_means[0], cs.class_means[1]);
        let r1 = cs.whitened_class_mean(1);
        let r2 = cs.whitened_class_mean(2);
        assert!((r1 + r2 - Mat::identity(3, 3)).norm() < 1e-8);
        assert!((cs.whitener.transpose() * &cs.composite * &cs.whitener - Mat::identity(3, 3)).norm() < 1e-8);
    }

    #[test]
    fn rank_deficient_composite_rejected() {
        let x = Mat::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 2.0, -2.0, 0.0]);
        let ts = TrialSet::new(vec![x], vec![1], 10.0, 1, vec![]).unwrap();
        assert!(matches!(
            covariances(&ts, RankTolerance::default()),
            Err(Error::RankDeficient { deficient: 1, dim: 2 })
        ));
    }

    #[test]
    fn trialset_validation() {
        let t = Mat::zeros(2, 10);
        assert!(TrialSet::new(vec![t.clone(), t.clone()], vec![1, 1], 10.0, 2, vec![]).is_err());
        assert!(TrialSet::new(vec![t.clone(), Mat::zeros(3, 10)], vec![1, 2], 10.0, 2, vec![]).is_err());
        assert!(TrialSet::new(vec![t.clone(), t], vec![1, 3], 10.0, 2, vec![]).is_err());
    }
}
