//! Dense symmetric linear-algebra kernels with fixed ordering conventions.
//!
//! Every eigendecomposition in the crate goes through [`sym_eig`], which sorts
//! eigenvalues non-increasingly, canonicalizes eigenvector signs (largest
//! magnitude entry positive) and breaks ties deterministically. Downstream
//! filter banks are therefore reproducible across runs.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

/// Relative threshold below which a singular value or eigenvalue counts as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance(f64);

impl RankTolerance {
    pub fn new(relative: f64) -> Result<Self> {
        if relative > 0.0 && relative.is_finite() {
            Ok(Self(relative))
        } else {
            Err(Error::InvalidArgument(format!(
                "rank tolerance must be positive and finite, got {relative}"
            )))
        }
    }

    pub fn relative(self) -> f64 {
        self.0
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self(1e-10)
    }
}

/// Eigendecomposition of a symmetric matrix; `vectors` column `j` pairs with `values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(values) V^T`.
    pub fn reconstruct(&self) -> Mat {
        let scaled = scale_columns(&self.vectors, &self.values);
        &scaled * self.vectors.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    Range,
    Null,
}

/// Which scatter matrix a subspace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScatterKind {
    Sb,
    Sw,
    St,
}

/// One of the six range/null subspaces of the scatter matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subspace {
    #[serde(rename = "Sb_range")]
    SbRange,
    #[serde(rename = "Sb_null")]
    SbNull,
    #[serde(rename = "Sw_range")]
    SwRange,
    #[serde(rename = "Sw_null")]
    SwNull,
    #[serde(rename = "St_range")]
    StRange,
    #[serde(rename = "St_null")]
    StNull,
}

impl Subspace {
    pub const ALL: [Subspace; 6] = [
        Subspace::SbRange,
        Subspace::SbNull,
        Subspace::SwRange,
        Subspace::SwNull,
        Subspace::StRange,
        Subspace::StNull,
    ];

    pub fn new(scatter: ScatterKind, kind: BasisKind) -> Self {
        match (scatter, kind) {
            (ScatterKind::Sb, BasisKind::Range) => Subspace::SbRange,
            (ScatterKind::Sb, BasisKind::Null) => Subspace::SbNull,
            (ScatterKind::Sw, BasisKind::Range) => Subspace::SwRange,
            (ScatterKind::Sw, BasisKind::Null) => Subspace::SwNull,
            (ScatterKind::St, BasisKind::Range) => Subspace::StRange,
            (ScatterKind::St, BasisKind::Null) => Subspace::StNull,
        }
    }

    pub fn scatter(self) -> ScatterKind {
        match self {
            Subspace::SbRange | Subspace::SbNull => ScatterKind::Sb,
            Subspace::SwRange | Subspace::SwNull => ScatterKind::Sw,
            Subspace::StRange | Subspace::StNull => ScatterKind::St,
        }
    }

    pub fn kind(self) -> BasisKind {
        match self {
            Subspace::SbRange | Subspace::SwRange | Subspace::StRange => BasisKind::Range,
            _ => BasisKind::Null,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subspace::SbRange => "Sb_range",
            Subspace::SbNull => "Sb_null",
            Subspace::SwRange => "Sw_range",
            Subspace::SwNull => "Sw_null",
            Subspace::StRange => "St_range",
            Subspace::StNull => "St_null",
        }
    }
}

impl std::fmt::Display for Subspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Subspace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subspace::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown subspace '{s}'")))
    }
}

/// Matrix with orthonormal columns spanning a range or null space.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    pub columns: Mat,
    pub kind: BasisKind,
    pub source: Option<ScatterKind>,
}

impl OrthoBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Orthogonal projection `U U^T x` onto the span.
    pub fn project(&self, x: &Vector) -> Vector {
        if self.dim() == 0 {
            return Vector::zeros(x.len());
        }
        &self.columns * (self.columns.transpose() * x)
    }
}

pub fn frobenius(a: &Mat) -> f64 {
    a.norm()
}

pub fn check_finite(a: &Mat) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_square(a: &Mat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Multiplies column `j` of `m` by `s[j]`.
pub fn scale_columns(m: &Mat, s: &[f64]) -> Mat {
    let mut out = m.clone();
    for (j, &sj) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(sj);
    }
    out
}

/// Flips the sign of `v` so its largest-magnitude entry is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0f64;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Sorts eigenpairs non-increasing with canonical signs; equal eigenvalues
/// (within a relative 1e-12) are ordered lexicographically by eigenvector.
fn order_eigenpairs(values: &[f64], vectors: &Mat) -> SymEig {
    let n = values.len();
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c: Vec<f64> = vectors.column(j).iter().copied().collect();
            canonicalize_sign(&mut c);
            c
        })
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tie = TIE_TOL * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[idx[end - 1]] - values[idx[end]]).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            idx[start..end].sort_by(|&i, &j| lexicographic_desc(&cols[i], &cols[j]));
        }
        start = end;
    }

    let sorted_values = idx.iter().map(|&i| values[i]).collect();
    let mut out = Mat::zeros(vectors.nrows(), n);
    for (dst, &src) in idx.iter().enumerate() {
        let col = std::mem::take(&mut cols[src]);
        out.column_mut(dst).copy_from_slice(&col);
    }
    SymEig {
        values: sorted_values,
        vectors: out,
    }
}

/// Eigendecomposition of a symmetric matrix, symmetrized internally first.
pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    check_square(a, "matrix")?;
    check_finite(a)?;
    let norm = frobenius(a);
    let asym = (a - a.transpose()).norm();
    if asym > SYMMETRY_TOL * norm {
        return Err(Error::NotSymmetric {
            asymmetry: asym / norm,
        });
    }
    if a.nrows() == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(a));
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Ok(order_eigenpairs(&values, &eig.eigenvectors))
}

/// Solves `A w = λ B w` for symmetric `A` and symmetric positive-definite `B`
/// by Cholesky reduction. Columns are normalized so `w^T B w = 1`.
pub fn gen_sym_eig(a: &Mat, b: &Mat, tol: RankTolerance) -> Result<SymEig> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let b_eig = sym_eig(b)?;
    let max = b_eig.values.first().copied().unwrap_or(0.0);
    let min = b_eig.values.last().copied().unwrap_or(0.0);
    if max <= 0.0 || min <= tol.relative() * max {
        return Err(Error::NotPositiveDefinite { eigenvalue: min });
    }
    let chol = Cholesky::new(symmetrize(b)).ok_or(Error::NotPositiveDefinite { eigenvalue: min })?;
    let l = chol.l();
    let a = symmetrize(a);
    check_finite(&a)?;
    let x = l
        .solve_lower_triangular(&a)
        .ok_or(Error::NotPositiveDefinite { eigenvalue: min })?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite { eigenvalue: min })?;
    let reduced = sym_eig(&symmetrize(&c))?;
    let mut w = l
        .tr_solve_lower_triangular(&reduced.vectors)
        .ok_or(Error::NotPositiveDefinite { eigenvalue: min })?;
    for mut col in w.column_iter_mut() {
        let mut v: Vec<f64> = col.iter().copied().collect();
        canonicalize_sign(&mut v);
        col.copy_from_slice(&v);
    }
    Ok(SymEig {
        values: reduced.values,
        vectors: w,
    })
}

/// `P = U Λ^{-1/2}` from `C = U Λ U^T`, so that `P^T C P = I`.
pub fn whitening_transform(c: &Mat, tol: RankTolerance) -> Result<Mat> {
    let eig = sym_eig(c)?;
    let n = eig.dim();
    let max = eig.values.first().copied().unwrap_or(0.0);
    let threshold = tol.relative() * max;
    let deficient = eig.values.iter().filter(|&&v| v <= threshold).count();
    if n == 0 || max <= 0.0 || deficient > 0 {
        return Err(Error::RankDeficient {
            deficient: if max <= 0.0 { n } else { deficient },
            dim: n,
        });
    }
    let inv_sqrt: Vec<f64> = eig.values.iter().map(|v| 1.0 / v.sqrt()).collect();
    Ok(scale_columns(&eig.vectors, &inv_sqrt))
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for an `n x n` matrix.
pub fn unvec(v: &Vector, n: usize) -> Result<Mat> {
    if v.len() != n * n {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be reshaped to {n}x{n}",
            v.len()
        )));
    }
    Ok(Mat::from_column_slice(n, n, v.as_slice()))
}

/// Inverse of [`vec`] inferring `n` from the length.
pub fn unvec_square(v: &Vector) -> Result<Mat> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() {
        return Err(Error::Dimension(format!(
            "length {} is not a perfect square",
            v.len()
        )));
    }
    unvec(v, n)
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Dimension of the symmetric-matrix subspace of the vectorized space.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Half-vectorization with off-diagonal entries scaled by √2. This is an
/// isometry from symmetric matrices (Frobenius) onto `R^{n(n+1)/2}`.
pub fn hvec(m: &Mat) -> Vector {
    let n = m.nrows();
    let mut h = Vector::zeros(sym_dim(n));
    let mut k = 0;
    for j in 0..n {
        h[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            h[k] = std::f64::consts::SQRT_2 * m[(i, j)];
            k += 1;
        }
    }
    h
}

/// Symmetric matrix from its scaled half-vectorization.
pub fn unhvec(h: &Vector, n: usize) -> Result<Mat> {
    if h.len() != sym_dim(n) {
        return Err(Error::Dimension(format!(
            "half-vector of length {} does not match n = {n}",
            h.len()
        )));
    }
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = h[k];
        k += 1;
        for i in j + 1..n {
            let x = h[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    Ok(m)
}

/// Embedding `T h = vec(unhvec(h))` of the half-vector space into `R^{n²}`.
pub fn hvec_to_vec(h: &Vector, n: usize) -> Result<Vector> {
    Ok(vec(&unhvec(h, n)?))
}

/// Adjoint of [`hvec_to_vec`]: keeps only the symmetric part of `unvec(v)`.
pub fn vec_to_hvec(v: &Vector, n: usize) -> Result<Vector> {
    let m = unvec(v, n)?;
    Ok(hvec(&symmetrize(&m)))
}

/// Maps each column of `h` (half-vector coordinates) into `R^{n²}`.
pub fn hvec_columns_to_vec(h: &Mat, n: usize) -> Result<Mat> {
    let mut out = Mat::zeros(n * n, h.ncols());
    for (j, col) in h.column_iter().enumerate() {
        let v = hvec_to_vec(&col.into_owned(), n)?;
        out.column_mut(j).copy_from(&v);
    }
    Ok(out)
}

/// Thin SVD: left singular vectors (`rows x min(rows, cols)`) and the singular
/// values, in the backend's order.
pub fn thin_svd(a: &Mat) -> (Mat, Vec<f64>) {
    let (r, c) = a.shape();
    let k = r.min(c);
    if k == 0 {
        return (Mat::zeros(r, 0), Vec::new());
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)]);
    let svd = fm.thin_svd().expect("SVD of a finite matrix converges");
    let u = svd.U();
    let s = svd.S().column_vector();
    (Mat::from_fn(r, k, |i, j| u[(i, j)]), (0..k).map(|i| s[i]).collect())
}

/// Orthonormal basis of the column space of `deviations`, rank counted as the
/// number of singular values above `tol * max(σ_max, scale)`.
///
/// `scale` guards against pure round-off residue being promoted to rank: pass
/// the Frobenius norm of the uncentered data the deviations came from.
pub fn range_of_deviations(
    deviations: &Mat,
    scale: f64,
    tol: RankTolerance,
) -> (Mat, Vec<f64>) {
    let rows = deviations.nrows();
    if deviations.ncols() == 0 || rows == 0 {
        return (Mat::zeros(rows, 0), Vec::new());
    }
    let (u, sv) = thin_svd(deviations);
    let sigma_max = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let threshold = tol.relative() * sigma_max.max(scale);
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > threshold).collect();
    idx.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let mut basis = Mat::zeros(rows, idx.len());
    let mut kept = Vec::with_capacity(idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        let mut c: Vec<f64> = u.column(src).iter().copied().collect();
        canonicalize_sign(&mut c);
        basis.column_mut(dst).copy_from_slice(&c);
        kept.push(sv[src]);
    }
    (basis, kept)
}

/// Range basis and rank of the centered sample columns `samples - center`.
/// The null space is represented implicitly as `I - U U^T`.
pub fn range_null_bases(
    samples: &Mat,
    center: &Vector,
    tol: RankTolerance,
) -> Result<(OrthoBasis, usize)> {
    if samples.ncols() == 0 {
        return Err(Error::InvalidArgument("at least one sample column is required".into()));
    }
    if center.len() != samples.nrows() {
        return Err(Error::Dimension(format!(
            "center has length {} but samples have {} rows",
            center.len(),
            samples.nrows()
        )));
    }
    let mut dev = samples.clone();
    for mut col in dev.column_iter_mut() {
        col -= center;
    }
    let (columns, kept) = range_of_deviations(&dev, samples.norm(), tol);
    let rank = kept.len();
    Ok((
        OrthoBasis {
            columns,
            kind: BasisKind::Range,
            source: None,
        },
        rank,
    ))
}

/// Orthonormal basis of the orthogonal complement of the orthonormal columns
/// `u` inside `R^dim`.
pub fn orthonormal_complement(u: &Mat, dim: usize) -> Result<Mat> {
    if u.nrows() != dim {
        return Err(Error::Dimension(format!(
            "basis has {} rows, expected {dim}",
            u.nrows()
        )));
    }
    let k = dim.saturating_sub(u.ncols());
    if k == 0 {
        return Ok(Mat::zeros(dim, 0));
    }
    let proj = Mat::identity(dim, dim) - u * u.transpose();
    let eig = sym_eig(&symmetrize(&proj))?;
    Ok(eig.vectors.columns(0, k).into_owned())
}

/// Orthonormalizes the columns of `a` (thin QR).
pub fn orthonormalize(a: &Mat) -> Mat {
    a.clone().qr().q()
}

/// Principal angles (radians, ascending) between the column spans of `a` and `b`.
///
/// Computed from the sines `σ((I - Q_a Q_a^T) Q_b)` so that tiny angles keep
/// full relative precision.
pub fn principal_angles(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension("subspaces live in different spaces".into()));
    }
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let (_, sv) = thin_svd(&residual);
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).asin()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Absolute cosine between two vectors.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).abs()
    }
}

/// For each column of `a`, the index of the column of `b` with maximal
/// absolute cosine and that cosine.
pub fn match_columns(a: &Mat, b: &Mat) -> Vec<(usize, f64)> {
    a.column_iter()
        .map(|ca| {
            let ca: Vec<f64> = ca.iter().copied().collect();
            b.column_iter()
                .enumerate()
                .map(|(j, cb)| {
                    let cb: Vec<f64> = cb.iter().copied().collect();
                    (j, abs_cosine(&ca, &cb))
                })
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
        })
        .collect()
}

/// Quadratic form `w^T C w`.
pub fn quad_form(c: &Mat, w: &[f64]) -> f64 {
    let n = w.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += c[(i, j)] * w[i];
        }
        acc += col * w[j];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&a)
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + Mat::identity(n, n) * 0.5
    }

    #[test]
    fn identity_eig_is_identity() {
        let e = sym_eig(&Mat::identity(3, 3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.vectors, Mat::identity(3, 3));
    }

    #[test]
    fn diagonal_eig_sorted() {
        let e = sym_eig(&Mat::from_diagonal(&Vector::from_vec(vec![1.0, 4.0, 2.0]))).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
        assert!((e.values[2] - 1.0).abs() < 1e-14);
        assert!((e.vectors[(1, 0)] - 1.0).abs() < 1e-14);
        assert!((e.vectors[(2, 1)] - 1.0).abs() < 1e-14);
        assert!((e.vectors[(0, 2)] - 1.0).abs() < 1e-14);
    }

    // Roots of the characteristic polynomial of a 2x2 block, solved in closed form.
    fn eig2_closed_form(a: &Mat) -> (f64, f64) {
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    // Cubic characteristic-polynomial roots via the trigonometric method.
    fn eig3_closed_form(a: &Mat) -> [f64; 3] {
        let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let q = (a[(0, 0)] + a[(1, 1)] + a[(2, 2)]) / 3.0;
        let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (a - Mat::identity(3, 3) * q) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    }

    #[test]
    fn block_diagonal_matches_characteristic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let b2 = random_sym(2, &mut rng);
            let b3 = random_sym(3, &mut rng);
            let b1 = random_sym(1, &mut rng);
            let mut a = Mat::zeros(6, 6);
            a.view_mut((0, 0), (2, 2)).copy_from(&b2);
            a.view_mut((2, 2), (3, 3)).copy_from(&b3);
            a.view_mut((5, 5), (1, 1)).copy_from(&b1);
            let (x, y) = eig2_closed_form(&b2);
            let mut expected = vec![x, y, b1[(0, 0)]];
            expected.extend(eig3_closed_form(&b3));
            expected.sort_by(|p, q| q.total_cmp(p));
            let e = sym_eig(&a).unwrap();
            for (got, want) in e.values.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
            let err = (e.reconstruct() - &a).norm();
            assert!(err <= 1e-8 * a.norm().max(1.0));
        }
    }

    #[test]
    fn gen_eig_identity_b() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        let e = gen_sym_eig(&a, &Mat::identity(2, 2), RankTolerance::default()).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gen_eig_rejects_indefinite() {
        let b = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let err = gen_sym_eig(&Mat::identity(2, 2), &b, RankTolerance::default()).unwrap_err();
        match err {
            Error::NotPositiveDefinite { eigenvalue } => assert_eq!(eigenvalue, -1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gen_eig_ratio_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c1 = random_spd(5, &mut rng);
            let c2 = random_spd(5, &mut rng);
            let c = &c1 + &c2;
            let e = gen_sym_eig(&c1, &c, RankTolerance::default()).unwrap();
            assert!(e.values.iter().all(|&v| v > 0.0 && v < 1.0));
            // direct inverse-multiply route
            let m = c.clone().try_inverse().unwrap() * &c1;
            let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            for (x, y) in e.values.iter().zip(&ev) {
                assert!((x - y).abs() < 1e-10);
            }
            for j in 0..5 {
                let w = e.vectors.column(j);
                assert!(((w.transpose() * &c * w)[(0, 0)] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn whitening_of_diagonal() {
        let c = Mat::from_diagonal(&Vector::from_vec(vec![4.0, 1.0]));
        let p = whitening_transform(&c, RankTolerance::default()).unwrap();
        let expected = Mat::from_diagonal(&Vector::from_vec(vec![0.5, 1.0]));
        assert!((p - expected).norm() < 1e-14);
        assert_eq!(
            whitening_transform(&Mat::identity(3, 3), RankTolerance::default()).unwrap(),
            Mat::identity(3, 3)
        );
    }

    #[test]
    fn whitening_random_spd_and_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_spd(8, &mut rng);
        let p = whitening_transform(&c, RankTolerance::default()).unwrap();
        let w = p.transpose() * &c * &p;
        assert!((&w - Mat::identity(8, 8)).norm() < 1e-8);
        let p2 = whitening_transform(&symmetrize(&w), RankTolerance::default()).unwrap();
        let w2 = p2.transpose() * &w * &p2;
        assert!((w2 - Mat::identity(8, 8)).norm() < 1e-8);
    }

    #[test]
    fn whitening_rank_error_reports_count() {
        let c = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(
            whitening_transform(&c, RankTolerance::default()).unwrap_err(),
            Error::RankDeficient { deficient: 2, dim: 3 }
        );
    }

    #[test]
    fn vec_is_column_stacking() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let a = Vector::from_vec(vec![1.0, 2.0]);
        let outer = &a * a.transpose();
        assert_eq!(vec(&outer).as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(kron_vec(&a, &a), vec(&outer));
        assert!(unvec(&Vector::zeros(5), 2).is_err());
        assert!(unvec_square(&Vector::zeros(5)).is_err());
    }

    #[test]
    fn hvec_is_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sym(5, &mut rng);
        let b = random_sym(5, &mut rng);
        let ip_full = vec(&a).dot(&vec(&b));
        let ip_half = hvec(&a).dot(&hvec(&b));
        assert!((ip_full - ip_half).abs() < 1e-13);
        assert!((unhvec(&hvec(&a), 5).unwrap() - &a).norm() < 1e-15);
        let v = vec(&a);
        assert!((vec_to_hvec(&v, 5).unwrap() - hvec(&a)).norm() < 1e-14);
    }

    #[test]
    fn identical_columns_have_rank_zero() {
        let col = Vector::from_vec(vec![0.1, 0.7, 1.3]);
        let samples = Mat::from_columns(&[col.clone(), col.clone(), col.clone()]);
        let mean = samples.column_mean();
        let (basis, rank) = range_null_bases(&samples, &mean, RankTolerance::default()).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(basis.dim(), 0);
    }

    #[test]
    fn constructed_rank_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..6 {
            let base = Mat::from_fn(12, k, |_, _| rng.random_range(-1.0..1.0));
            let mix = Mat::from_fn(k, 9, |_, _| rng.random_range(-1.0..1.0));
            let samples = if k < 9 { &base * &mix } else { base.clone() };
            let (basis, rank) =
                range_null_bases(&samples, &Vector::zeros(12), RankTolerance::default()).unwrap();
            assert_eq!(rank, k);
            let gram = basis.columns.transpose() * &basis.columns;
            assert!((gram - Mat::identity(k, k)).norm() < 1e-10);
        }
    }

    #[test]
    fn principal_angles_precise_for_equal_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = Mat::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let mix = Mat::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let b = &a * mix;
        let angles = principal_angles(&a, &b).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-12));
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = orthonormalize(&Mat::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0)));
        let q = orthonormal_complement(&u, 7).unwrap();
        assert_eq!(q.ncols(), 4);
        assert!((q.transpose() * &q - Mat::identity(4, 4)).norm() < 1e-10);
        assert!((u.transpose() * &q).norm() < 1e-10);
    }
}
