//! Scatter matrices of vectorized whitened covariances and the filters derived
//! from their between-class range.
//!
//! Scatters are kept as deviation factors `S = D D^T` in half-vectorized
//! coordinates; the `N_c² x N_c²` matrices are only formed by
//! [`ScatterTriple::materialize`].

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::{FilterBank, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{self, BasisKind, Mat, OrthoBasis, RankTolerance, ScatterKind, Vector};
use crate::preprocess::CovarianceSet;

/// Vectorized whitened covariances with class and grand means.
#[derive(Debug, Clone)]
pub struct VecCovSamples {
    pub n_channels: usize,
    /// Columns `r_i = vec(R_i)`.
    pub samples: Mat,
    /// Columns `r̃_k`.
    pub class_means: Mat,
    pub grand_mean: Vector,
    pub labels: Vec<usize>,
    pub class_sizes: Vec<usize>,
    pub whitener: Mat,
}

impl VecCovSamples {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn class_count(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn sample(&self, i: usize) -> Vector {
        self.samples.column(i).into_owned()
    }
}

/// `r_i = vec(P_c^T C_i P_c)` with class means and the sample-weighted grand mean.
pub fn vectorize_covariances(cov: &CovarianceSet) -> VecCovSamples {
    let n = cov.n_channels();
    let k = cov.class_count;
    let mut samples = Mat::zeros(n * n, cov.len());
    for (j, r) in cov.whitened_per_trial.iter().enumerate() {
        samples.column_mut(j).copy_from_slice(r.as_slice());
    }
    let class_sizes = cov.class_sizes();
    let mut class_means = Mat::zeros(n * n, k);
    for (j, &l) in cov.labels.iter().enumerate() {
        let mut c = class_means.column_mut(l - 1);
        c += samples.column(j);
    }
    for (c, &size) in class_sizes.iter().enumerate() {
        if size > 0 {
            class_means.column_mut(c).unscale_mut(size as f64);
        }
    }
    let grand_mean = samples.column_sum() / cov.len() as f64;
    VecCovSamples {
        n_channels: n,
        samples,
        class_means,
        grand_mean,
        labels: cov.labels.clone(),
        class_sizes,
        whitener: cov.whitener.clone(),
    }
}

/// Rank limits `(between, within, total)` for `total` samples in `classes`
/// classes of `n_channels`-channel covariances.
pub fn expected_ranks(total: usize, classes: usize, n_channels: usize) -> (usize, usize, usize) {
    let d = linalg::sym_dim(n_channels);
    (
        classes.saturating_sub(1).min(d),
        total.saturating_sub(classes).min(d),
        total.saturating_sub(1).min(d),
    )
}

/// One scatter matrix held as its deviation factor in half-vector coordinates.
#[derive(Debug, Clone)]
pub struct ScatterFactor {
    pub kind: ScatterKind,
    /// `D` with `S = T D D^T T^T`, `T` the half-vector embedding.
    pub deviations: Mat,
    /// Orthonormal range basis in half-vector coordinates.
    pub range_h: Mat,
    /// Nonzero eigenvalues of `S`, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl ScatterFactor {
    fn new(kind: ScatterKind, deviations: Mat, scale: f64, tol: RankTolerance) -> Self {
        let (range_h, sv) = linalg::range_of_deviations(&deviations, scale, tol);
        Self {
            kind,
            deviations,
            range_h,
            eigenvalues: sv.iter().map(|s| s * s).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.range_h.ncols()
    }
}

/// Between-, within- and total-class scatters with their ranks.
#[derive(Debug, Clone)]
pub struct ScatterTriple {
    pub n_channels: usize,
    pub sb: ScatterFactor,
    pub sw: ScatterFactor,
    pub st: ScatterFactor,
    pub semi_full_w: bool,
    pub semi_full_t: bool,
    pub whitener: Mat,
    pub tol: RankTolerance,
}

impl ScatterTriple {
    pub fn sym_dim(&self) -> usize {
        linalg::sym_dim(self.n_channels)
    }

    pub fn factor(&self, kind: ScatterKind) -> &ScatterFactor {
        match kind {
            ScatterKind::Sb => &self.sb,
            ScatterKind::Sw => &self.sw,
            ScatterKind::St => &self.st,
        }
    }

    /// `(rank_b, rank_w, rank_t)`.
    pub fn ranks(&self) -> (usize, usize, usize) {
        (self.sb.rank(), self.sw.rank(), self.st.rank())
    }

    /// Range basis in `R^{N_c²}`.
    pub fn range_basis(&self, kind: ScatterKind) -> Result<OrthoBasis> {
        Ok(OrthoBasis {
            columns: linalg::hvec_columns_to_vec(&self.factor(kind).range_h, self.n_channels)?,
            kind: BasisKind::Range,
            source: Some(kind),
        })
    }

    /// Null space intersected with the symmetric subspace, in half-vector
    /// coordinates. Empty (zero columns) when the scatter is semi-full.
    pub fn sym_null_h(&self, kind: ScatterKind) -> Result<Mat> {
        linalg::orthonormal_complement(&self.factor(kind).range_h, self.sym_dim())
    }

    /// Symmetric part of the null space, in `R^{N_c²}`.
    pub fn sym_null_basis(&self, kind: ScatterKind) -> Result<OrthoBasis> {
        Ok(OrthoBasis {
            columns: linalg::hvec_columns_to_vec(&self.sym_null_h(kind)?, self.n_channels)?,
            kind: BasisKind::Null,
            source: Some(kind),
        })
    }

    /// True when the symmetric part of the null space is `{0}`.
    pub fn is_semi_empty(&self, kind: ScatterKind) -> bool {
        self.factor(kind).rank() >= self.sym_dim()
    }

    /// `S x` for `x ∈ R^{N_c²}` without forming `S`.
    pub fn apply(&self, kind: ScatterKind, x: &Vector) -> Result<Vector> {
        let d = &self.factor(kind).deviations;
        let h = linalg::vec_to_hvec(x, self.n_channels)?;
        linalg::hvec_to_vec(&(d * (d.transpose() * h)), self.n_channels)
    }

    /// Dense `N_c² x N_c²` scatter matrix (diagnostics only).
    pub fn materialize(&self, kind: ScatterKind) -> Result<Mat> {
        let t = linalg::hvec_columns_to_vec(&self.factor(kind).deviations, self.n_channels)?;
        Ok(&t * t.transpose())
    }

    /// Relative residual `‖(S_t - S_w - S_b) X‖_F / ‖S_t X‖_F` over probe columns.
    pub fn identity_residual(&self, probes: &Mat) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for p in probes.column_iter() {
            let p = p.into_owned();
            let t = self.apply(ScatterKind::St, &p)?;
            let r = &t - self.apply(ScatterKind::Sw, &p)? - self.apply(ScatterKind::Sb, &p)?;
            num += r.norm_squared();
            den += t.norm_squared();
        }
        Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
    }
}

struct HalfSamples {
    samples: Mat,
    class_means: Mat,
    grand_mean: Vector,
}

fn half_samples(v: &VecCovSamples) -> Result<HalfSamples> {
    let n = v.n_channels;
    let to_h = |m: &Mat| -> Result<Mat> {
        let mut out = Mat::zeros(linalg::sym_dim(n), m.ncols());
        for (j, c) in m.column_iter().enumerate() {
            out.column_mut(j).copy_from(&linalg::vec_to_hvec(&c.into_owned(), n)?);
        }
        Ok(out)
    };
    Ok(HalfSamples {
        samples: to_h(&v.samples)?,
        class_means: to_h(&v.class_means)?,
        grand_mean: linalg::vec_to_hvec(&v.grand_mean, n)?,
    })
}

fn between_deviations(v: &VecCovSamples, h: &HalfSamples) -> Mat {
    let mut d = Mat::zeros(h.samples.nrows(), v.class_count());
    for k in 0..v.class_count() {
        let w = (v.class_sizes[k] as f64).sqrt();
        d.set_column(k, &((h.class_means.column(k) - &h.grand_mean) * w));
    }
    d
}

/// Builds the three scatters and detects their ranks at `tol`.
pub fn scatter_matrices(v: &VecCovSamples, tol: RankTolerance) -> Result<ScatterTriple> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("scatter matrices need at least 2 samples".into()));
    }
    let h = half_samples(v)?;
    let scale = h.samples.norm();
    let mut dw = h.samples.clone();
    let mut dt = h.samples.clone();
    for (j, &l) in v.labels.iter().enumerate() {
        let mut c = dw.column_mut(j);
        c -= h.class_means.column(l - 1);
        let mut c = dt.column_mut(j);
        c -= &h.grand_mean;
    }
    let db = between_deviations(v, &h);
    let (sb, (sw, st)) = rayon::join(
        || ScatterFactor::new(ScatterKind::Sb, db, scale, tol),
        || {
            rayon::join(
                || ScatterFactor::new(ScatterKind::Sw, dw, scale, tol),
                || ScatterFactor::new(ScatterKind::St, dt, scale, tol),
            )
        },
    );
    let d = linalg::sym_dim(v.n_channels);
    Ok(ScatterTriple {
        n_channels: v.n_channels,
        semi_full_w: sw.rank() == d,
        semi_full_t: st.rank() == d,
        sb,
        sw,
        st,
        whitener: v.whitener.clone(),
        tol,
    })
}

/// Range of the between-class scatter alone (the part filter training needs).
pub fn between_class_range(v: &VecCovSamples, tol: RankTolerance) -> Result<ScatterFactor> {
    let h = half_samples(v)?;
    let scale = h.samples.norm();
    Ok(ScatterFactor::new(ScatterKind::Sb, between_deviations(v, &h), scale, tol))
}

/// Per-filter normalized band-power differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaVector {
    pub entries: Vec<f64>,
}

/// How filters are picked from the eigenvectors of one `S_b` direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// `m` eigenvectors with the largest `|λ|`.
    #[default]
    LargestAbs,
    /// `m` from each end of the spectrum.
    PerTail,
}

fn select(values: &[f64], m: usize, mode: SelectionMode) -> Vec<usize> {
    let n = values.len();
    match mode {
        SelectionMode::PerTail => (0..m).chain(n - m..n).collect(),
        SelectionMode::LargestAbs => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
            idx.truncate(m);
            idx
        }
    }
}

/// Whitened-space filters from one range direction `v` (`R^{N_c²}`).
fn direction_filters(v: &Vector, n: usize, m: usize, mode: SelectionMode) -> Result<(Mat, Vec<f64>, DaVector)> {
    let a = linalg::symmetrize(&linalg::unvec(v, n)?);
    let eig = linalg::sym_eig(&a)?;
    let idx = select(&eig.values, m, mode);
    let u = Mat::from_columns(&idx.iter().map(|&i| eig.vectors.column(i)).collect::<Vec<_>>());
    let scores = idx.iter().map(|&i| eig.values[i]).collect();
    Ok((u, scores, DaVector { entries: eig.values }))
}

fn check_selection(m: usize, n: usize, mode: SelectionMode) -> Result<()> {
    let max = match mode {
        SelectionMode::PerTail => n / 2,
        SelectionMode::LargestAbs => n,
    };
    if m == 0 || m > max {
        return Err(Error::InvalidArgument(format!("m = {m} invalid for {n} channels")));
    }
    Ok(())
}

fn degeneracy_check(v: &VecCovSamples) -> Result<()> {
    let diff = (v.class_means.column(0) - v.class_means.column(1)).norm();
    if diff < 1e-12 * (v.n_channels as f64).sqrt() {
        return Err(Error::DegenerateClasses { norm: diff });
    }
    Ok(())
}

/// Range directions of `S_b` in `R^{N_c²}`; with two classes the single
/// direction is oriented so that `v^T (r̃_1 - r̃) > 0`.
fn oriented_directions(v: &VecCovSamples, sb: &ScatterFactor) -> Result<Vec<Vector>> {
    let expected = v.class_count().saturating_sub(1);
    if sb.rank() < expected {
        warn!(
            "between-class scatter has rank {} (expected {expected}); using detected rank",
            sb.rank()
        );
    }
    if sb.rank() == 0 {
        let norm = if v.class_count() >= 2 {
            (v.class_means.column(0) - v.class_means.column(1)).norm()
        } else {
            0.0
        };
        return Err(Error::DegenerateClasses { norm });
    }
    let basis = linalg::hvec_columns_to_vec(&sb.range_h, v.n_channels)?;
    let mut dirs: Vec<Vector> = basis.column_iter().map(|c| c.into_owned()).collect();
    if v.class_count() == 2 {
        let toward = v.class_means.column(0) - &v.grand_mean;
        if dirs[0].dot(&toward) < 0.0 {
            dirs[0].neg_mut();
        }
    }
    Ok(dirs)
}

fn assemble(
    directions: &[Vector],
    n: usize,
    m: usize,
    mode: SelectionMode,
    whitener: &Mat,
) -> Result<(FilterBank, Vec<DaVector>)> {
    let parts = directions
        .par_iter()
        .map(|d| direction_filters(d, n, m, mode))
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<_> = parts.iter().flat_map(|(u, _, _)| u.column_iter()).collect();
    let whitened = Mat::from_columns(&cols);
    let scores: Vec<f64> = parts.iter().flat_map(|(_, s, _)| s.iter().copied()).collect();
    let das = parts.into_iter().map(|(_, _, d)| d).collect();
    Ok((
        FilterBank {
            filters: whitener * &whitened,
            provenance: vec![Provenance::Scacsp; scores.len()],
            scores,
            whitener: whitener.clone(),
            whitened: Some(whitened),
        },
        das,
    ))
}

/// Binary scaCSP: the single `S_b` direction reshaped and eigendecomposed,
/// `m` filters from each end of `d_a`.
pub fn scacsp_binary_train(cov: &CovarianceSet, m: usize) -> Result<(FilterBank, DaVector)> {
    cov.require_binary()?;
    check_selection(m, cov.n_channels(), SelectionMode::PerTail)?;
    let v = vectorize_covariances(cov);
    degeneracy_check(&v)?;
    let sb = between_class_range(&v, cov.tol)?;
    let dirs = oriented_directions(&v, &sb)?;
    let (bank, mut das) = assemble(&dirs[..1], v.n_channels, m, SelectionMode::PerTail, &v.whitener)?;
    Ok((bank, das.remove(0)))
}

/// Multi-class scaCSP: `m` filters from each `S_b` range direction.
pub fn scacsp_multi_train(cov: &CovarianceSet, m: usize, mode: SelectionMode) -> Result<(FilterBank, Vec<DaVector>)> {
    if cov.class_count < 2 {
        return Err(Error::InvalidArgument("at least 2 classes are required".into()));
    }
    check_selection(m, cov.n_channels(), mode)?;
    let v = vectorize_covariances(cov);
    if cov.class_count == 2 {
        degeneracy_check(&v)?;
    }
    let sb = between_class_range(&v, cov.tol)?;
    let dirs = oriented_directions(&v, &sb)?;
    assemble(&dirs, v.n_channels, m, mode, &v.whitener)
}

/// Columns `u ⊗ u` for each whitened-space filter `u`.
pub fn feature_projection(whitened_filters: &Mat) -> Mat {
    let n = whitened_filters.nrows();
    let mut v = Mat::zeros(n * n, whitened_filters.ncols());
    for (j, u) in whitened_filters.column_iter().enumerate() {
        let u = u.into_owned();
        v.set_column(j, &linalg::kron_vec(&u, &u));
    }
    v
}

/// `f = V_a^T r`.
pub fn scacsp_features(v_a: &Mat, r: &Vector) -> Result<Vec<f64>> {
    if v_a.nrows() != r.len() {
        return Err(Error::Dimension(format!(
            "projection has {} rows but sample has length {}",
            v_a.nrows(),
            r.len()
        )));
    }
    Ok((v_a.transpose() * r).iter().copied().collect())
}

/// `P^T x = vec(P_c^T unvec(x) P_c)` for `P = P_c ⊗ P_c`.
pub fn kron_whitener_t_apply(pc: &Mat, x: &Vector) -> Result<Vector> {
    let xm = linalg::unvec(x, pc.nrows())?;
    Ok(linalg::vec(&(pc.transpose() * xm * pc)))
}

/// `P y = vec(P_c unvec(y) P_c^T)`.
pub fn kron_whitener_apply(pc: &Mat, y: &Vector) -> Result<Vector> {
    let ym = linalg::unvec(y, pc.nrows())?;
    Ok(linalg::vec(&(pc * ym * pc.transpose())))
}

/// `(C ⊗ C) y = vec(C unvec(y) C)` for symmetric `C`.
pub fn kron_cov_apply(c: &Mat, y: &Vector) -> Result<Vector> {
    let ym = linalg::unvec(y, c.nrows())?;
    Ok(linalg::vec(&(c * ym * c)))
}

/// Between-class deviation factor `D_B` of the un-whitened vectorized
/// covariances, `S_B = D_B D_B^T` in `R^{N_c²}`.
pub fn unwhitened_between_factor(cov: &CovarianceSet) -> Mat {
    let n = cov.n_channels();
    let total = cov.len() as f64;
    let sizes = cov.class_sizes();
    let mut grand = Mat::zeros(n, n);
    for (k, m) in cov.class_means.iter().enumerate() {
        grand += m * (sizes[k] as f64 / total);
    }
    let mut d = Mat::zeros(n * n, cov.class_count);
    for (k, m) in cov.class_means.iter().enumerate() {
        let dev = (m - &grand) * (sizes[k] as f64).sqrt();
        d.column_mut(k).copy_from_slice(dev.as_slice());
    }
    d
}

/// scaCSP from un-whitened covariances: `S_B` is whitened with the Kronecker
/// factor `P = P_c ⊗ P_c`, applied through its structure.
pub fn scacsp_unwhitened_train(cov: &CovarianceSet, m: usize, mode: SelectionMode) -> Result<(FilterBank, Vec<DaVector>)> {
    if cov.class_count < 2 {
        return Err(Error::InvalidArgument("at least 2 classes are required".into()));
    }
    check_selection(m, cov.n_channels(), mode)?;
    let n = cov.n_channels();
    let pc = linalg::whitening_transform(&cov.composite, cov.tol)?;
    let db = unwhitened_between_factor(cov);
    let mut whitened_db = Mat::zeros(n * n, db.ncols());
    for (k, c) in db.column_iter().enumerate() {
        whitened_db.set_column(k, &kron_whitener_t_apply(&pc, &c.into_owned())?);
    }
    let mut h = Mat::zeros(linalg::sym_dim(n), db.ncols());
    for (k, c) in whitened_db.column_iter().enumerate() {
        h.set_column(k, &linalg::vec_to_hvec(&c.into_owned(), n)?);
    }
    let mut scale = 0.0;
    for c in &cov.per_trial {
        scale += cov.whiten(c).norm_squared();
    }
    let (range_h, _) = linalg::range_of_deviations(&h, scale.sqrt(), cov.tol);
    if range_h.ncols() == 0 {
        return Err(Error::DegenerateClasses { norm: db.norm() });
    }
    let basis = linalg::hvec_columns_to_vec(&range_h, n)?;
    let mut dirs: Vec<Vector> = basis.column_iter().map(|c| c.into_owned()).collect();
    if cov.class_count == 2 && dirs[0].dot(&whitened_db.column(0)) < 0.0 {
        dirs[0].neg_mut();
    }
    assemble(&dirs, n, m, mode, &pc)
}
