//! Brute-force reference computations for tests.
//!
//! These deliberately avoid the algorithms used by the library paths they check.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::scatter::VecCovSamples;

/// Largest channel count accepted by [`oracle_scatter`].
pub const ORACLE_SCATTER_MAX_CHANNELS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// Extremizes `w^T A w / w^T B w` through the non-symmetric matrix `B^{-1} A`:
/// its eigenvalues come from a real Schur form and the vector from the null
/// space of `B^{-1} A - λ I` (smallest right singular vector). The vector is
/// scaled so `w^T B w = 1` with the largest-magnitude entry positive.
pub fn oracle_rayleigh(a: &Mat, b: &Mat, extremum: Extremum) -> Result<(f64, Vector)> {
    let n = a.nrows();
    if a.shape() != (n, n) || b.shape() != (n, n) || n == 0 {
        return Err(Error::Dimension(format!(
            "A is {}x{} and B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    linalg::check_finite(a)?;
    linalg::check_finite(b)?;
    let b_inv = b
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { eigenvalue: 0.0 })?;
    let m = &b_inv * a;
    let eigs = m.complex_eigenvalues();
    let pick = eigs.iter().map(|z| z.re).fold(None, |acc: Option<f64>, re| match (acc, extremum) {
        (None, _) => Some(re),
        (Some(x), Extremum::Max) => Some(x.max(re)),
        (Some(x), Extremum::Min) => Some(x.min(re)),
    });
    let lambda = pick.unwrap_or(0.0);
    let shifted = &m - Mat::identity(n, n) * lambda;
    // right singular vectors of `shifted` are the left ones of its transpose
    let (u, _) = linalg::thin_svd(&shifted.transpose());
    let mut w: Vec<f64> = u.column(n - 1).iter().copied().collect();
    let wbw = linalg::quad_form(b, &w);
    if wbw <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: wbw });
    }
    w.iter_mut().for_each(|x| *x /= wbw.sqrt());
    linalg::canonicalize_sign(&mut w);
    Ok((lambda, Vector::from_vec(w)))
}

pub fn oracle_rayleigh_max(a: &Mat, b: &Mat) -> Result<(f64, Vector)> {
    oracle_rayleigh(a, b, Extremum::Max)
}

/// Explicit `(S_b, S_w, S_t)` in `vec` coordinates by literal summation of
/// outer products. `S_b` weights each class term by its size.
pub fn oracle_scatter(v: &VecCovSamples) -> Result<(Mat, Mat, Mat)> {
    if v.n_channels > ORACLE_SCATTER_MAX_CHANNELS {
        return Err(Error::InvalidArgument(format!(
            "explicit scatter limited to {ORACLE_SCATTER_MAX_CHANNELS} channels, got {}",
            v.n_channels
        )));
    }
    let d = v.n_channels * v.n_channels;
    let total = v.len();
    let k = v.class_count();
    let mut class_mean = vec![vec![0.0; d]; k];
    let mut grand = vec![0.0; d];
    for i in 0..total {
        let c = v.labels[i] - 1;
        for p in 0..d {
            class_mean[c][p] += v.samples[(p, i)] / v.class_sizes[c] as f64;
            grand[p] += v.samples[(p, i)] / total as f64;
        }
    }
    let mut sb = Mat::zeros(d, d);
    let mut sw = Mat::zeros(d, d);
    let mut st = Mat::zeros(d, d);
    for c in 0..k {
        let nk = v.class_sizes[c] as f64;
        for p in 0..d {
            for q in 0..d {
                sb[(p, q)] += nk * (class_mean[c][p] - grand[p]) * (class_mean[c][q] - grand[q]);
            }
        }
    }
    for i in 0..total {
        let c = v.labels[i] - 1;
        for p in 0..d {
            let xp = v.samples[(p, i)];
            for q in 0..d {
                let xq = v.samples[(q, i)];
                sw[(p, q)] += (xp - class_mean[c][p]) * (xq - class_mean[c][q]);
                st[(p, q)] += (xp - grand[p]) * (xq - grand[q]);
            }
        }
    }
    Ok((sb, sw, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RankTolerance;
    use crate::preprocess::CovarianceSet;
    use crate::scatter::{scatter_matrices, vectorize_covariances};
    use crate::linalg::ScatterKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(n, n + 2, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + Mat::identity(n, n) * 0.1
    }

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        linalg::symmetrize(&a)
    }

    #[test]
    fn agrees_with_cholesky_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..7);
            let a = random_sym(n, &mut rng);
            let b = random_spd(n, &mut rng);
            let (val, w) = oracle_rayleigh_max(&a, &b).unwrap();
            let e = linalg::gen_sym_eig(&a, &b, RankTolerance::default()).unwrap();
            assert!((val - e.values[0]).abs() <= 1e-8 * e.values[0].abs().max(1.0));
            if (e.values[0] - e.values[1]).abs() > 1e-6 {
                let top: Vec<f64> = e.vectors.column(0).iter().copied().collect();
                let diff: f64 = top.iter().zip(w.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(diff < 1e-8 * top.iter().map(|x| x.abs()).fold(1.0, f64::max), "{diff}");
            }
            let (lo, _) = oracle_rayleigh(&a, &b, Extremum::Min).unwrap();
            assert!((lo - e.values[n - 1]).abs() <= 1e-8 * lo.abs().max(1.0));
        }
    }

    #[test]
    fn equal_matrices_give_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = random_spd(4, &mut rng);
        let (val, _) = oracle_rayleigh_max(&b, &b).unwrap();
        assert!((val - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_by_two_closed_form() {
        // det(A - λB) = 0 for A = [[2,1],[1,3]], B = diag(1,2):
        // 2λ² - 7λ + 5 = 0 -> λ = 2.5, 1
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let (val, w) = oracle_rayleigh_max(&a, &b).unwrap();
        assert!((val - 2.5).abs() < 1e-12);
        let (lo, _) = oracle_rayleigh(&a, &b, Extremum::Min).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        // (A - 2.5 B) w = 0 -> -0.5 w0 + w1 = 0
        assert!((w[1] - 0.5 * w[0]).abs() < 1e-12);
    }

    fn random_cov_set(n: usize, per_class: &[usize], seed: u64) -> CovarianceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut per_trial = Vec::new();
        let mut labels = Vec::new();
        for (k, &count) in per_class.iter().enumerate() {
            for _ in 0..count {
                per_trial.push(random_spd(n, &mut rng));
                labels.push(k + 1);
            }
        }
        CovarianceSet::from_trial_covariances(per_trial, labels, per_class.len(), RankTolerance::default()).unwrap()
    }

    #[test]
    fn total_is_within_plus_between() {
        let v = vectorize_covariances(&random_cov_set(4, &[5, 7, 3], 1));
        let (sb, sw, st) = oracle_scatter(&v).unwrap();
        assert!((&st - &sw - &sb).norm() <= 1e-12 * st.norm());
    }

    #[test]
    fn implicit_products_match() {
        for (n, seed) in [(3, 2), (5, 3), (8, 4)] {
            let v = vectorize_covariances(&random_cov_set(n, &[6, 9], seed));
            let (sb, sw, st) = oracle_scatter(&v).unwrap();
            let triple = scatter_matrices(&v, RankTolerance::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..4 {
                let x = Vector::from_fn(n * n, |_, _| rng.random_range(-1.0..1.0));
                for (kind, dense) in [(ScatterKind::Sb, &sb), (ScatterKind::Sw, &sw), (ScatterKind::St, &st)] {
                    let y = triple.apply(kind, &x).unwrap();
                    let z = dense * &x;
                    assert!((&y - &z).norm() <= 1e-9 * dense.norm() * x.norm(), "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn single_sample_classes_have_no_within_scatter() {
        let v = vectorize_covariances(&random_cov_set(3, &[1, 1, 1], 5));
        let (_, sw, _) = oracle_scatter(&v).unwrap();
        assert_eq!(sw.norm(), 0.0);
    }

    #[test]
    fn size_guard() {
        let v = vectorize_covariances(&random_cov_set(13, &[2, 2], 6));
        assert!(oracle_scatter(&v).is_err());
    }
}
