//! Extra filters from scatter subspaces, null-space reduction and the
//! filter-subspace x component-subspace accuracy grid.

use std::collections::BTreeSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::{FilterBank, Provenance};
use crate::error::{Error, Result};
use crate::eval;
use crate::lda;
use crate::linalg::{self, BasisKind, Mat, ScatterKind, Subspace, Vector};
use crate::preprocess::CovarianceSet;
use crate::scatter::{self, ScatterTriple};
use crate::serde_mat;

const DUPLICATE_COS: f64 = 1.0 - 1e-6;

/// Non-empty set of scatter subspaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSelector(BTreeSet<Subspace>);

impl SubspaceSelector {
    pub fn new(items: impl IntoIterator<Item = Subspace>) -> Result<Self> {
        let set: BTreeSet<Subspace> = items.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidArgument("subspace selector is empty".into()));
        }
        Ok(Self(set))
    }

    pub fn single(s: Subspace) -> Self {
        Self(BTreeSet::from([s]))
    }

    pub fn iter(&self) -> impl Iterator<Item = Subspace> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, s: Subspace) -> bool {
        self.0.contains(&s)
    }
}

impl Default for SubspaceSelector {
    fn default() -> Self {
        Self::single(Subspace::SwRange)
    }
}

impl std::str::FromStr for SubspaceSelector {
    type Err = Error;

    /// Comma- or plus-separated labels, e.g. `Sb_null+Sw_range`.
    fn from_str(s: &str) -> Result<Self> {
        Self::new(
            s.split([',', '+'])
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<Result<Vec<Subspace>>>()?,
        )
    }
}

impl std::fmt::Display for SubspaceSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let labels: Vec<&str> = self.iter().map(Subspace::label).collect();
        f.write_str(&labels.join("+"))
    }
}

/// Orthonormal basis of a subspace in half-vector coordinates; null spaces are
/// restricted to symmetric directions.
pub fn subspace_basis_h(scatter: &ScatterTriple, s: Subspace) -> Result<Mat> {
    match s.kind() {
        BasisKind::Range => Ok(scatter.factor(s.scatter()).range_h.clone()),
        BasisKind::Null => scatter.sym_null_h(s.scatter()),
    }
}

/// Pools eigenpairs of every basis vector of the selected subspaces and keeps
/// the `count` with the largest `|λ|`, skipping near-duplicates. Scores are `|λ|`.
pub fn extra_filters(scatter: &ScatterTriple, selector: &SubspaceSelector, count: usize) -> Result<FilterBank> {
    if count == 0 {
        return Err(Error::InvalidArgument("extra filter count must be positive".into()));
    }
    let n = scatter.n_channels;
    let mut pool: Vec<(Vector, f64, Subspace)> = Vec::new();
    let mut empty = Vec::new();
    for s in selector.iter() {
        let basis = subspace_basis_h(scatter, s)?;
        if basis.ncols() == 0 {
            empty.push(s.label());
            continue;
        }
        let parts = basis
            .column_iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|h| linalg::sym_eig(&linalg::symmetrize(&linalg::unhvec(&h.into_owned(), n)?)))
            .collect::<Result<Vec<_>>>()?;
        for eig in parts {
            for (j, &l) in eig.values.iter().enumerate() {
                pool.push((eig.vectors.column(j).into_owned(), l.abs(), s));
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::SemiEmpty(format!("no basis vectors in {}", empty.join(", "))));
    }
    pool.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut chosen: Vec<(Vector, f64, Subspace)> = Vec::with_capacity(count);
    for cand in pool {
        if chosen.len() == count {
            break;
        }
        let dup = chosen
            .iter()
            .any(|c| linalg::abs_cosine(c.0.as_slice(), cand.0.as_slice()) > DUPLICATE_COS);
        if !dup {
            chosen.push(cand);
        }
    }
    if chosen.len() < count {
        warn!("only {} distinct extra filters available (requested {count})", chosen.len());
    }
    let whitened = Mat::from_columns(&chosen.iter().map(|c| c.0.clone()).collect::<Vec<_>>());
    Ok(FilterBank {
        filters: &scatter.whitener * &whitened,
        scores: chosen.iter().map(|c| c.1).collect(),
        provenance: chosen.iter().map(|c| Provenance::Extra(c.2)).collect(),
        whitener: scatter.whitener.clone(),
        whitened: Some(whitened),
    })
}

/// Appends `extra` after `base`, dropping extra filters that duplicate a base
/// filter in the whitened space.
pub fn augment(base: &FilterBank, extra: &FilterBank) -> Result<FilterBank> {
    let (Some(bw), Some(ew)) = (&base.whitened, &extra.whitened) else {
        return Err(Error::InvalidArgument("augmentation needs whitened-space filters".into()));
    };
    let keep: Vec<usize> = (0..extra.len())
        .filter(|&j| {
            let e: Vec<f64> = ew.column(j).iter().copied().collect();
            !bw.column_iter()
                .any(|b| linalg::abs_cosine(b.as_slice(), &e) > DUPLICATE_COS)
        })
        .collect();
    let pick = |m: &Mat| Mat::from_columns(&keep.iter().map(|&j| m.column(j)).collect::<Vec<_>>());
    let kept = FilterBank {
        filters: if keep.is_empty() { Mat::zeros(extra.n_channels(), 0) } else { pick(&extra.filters) },
        scores: keep.iter().map(|&j| extra.scores[j]).collect(),
        provenance: keep.iter().map(|&j| extra.provenance[j]).collect(),
        whitener: extra.whitener.clone(),
        whitened: Some(if keep.is_empty() { Mat::zeros(ew.nrows(), 0) } else { pick(ew) }),
    };
    Ok(base.concat(&kept))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NsrMode {
    /// Remove total-scatter null components.
    #[default]
    Cnsr,
    /// Remove between-class null components.
    Bnsr,
    None,
}

impl std::str::FromStr for NsrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnsr" => Ok(NsrMode::Cnsr),
            "bnsr" => Ok(NsrMode::Bnsr),
            "none" => Ok(NsrMode::None),
            _ => Err(Error::InvalidArgument(format!("unknown NSR mode '{s}'"))),
        }
    }
}

/// Null-space reduction `r ↦ r - Q Q^T r`, `Q` the symmetric part of the target
/// null space. Stored through the target range basis `U`:
/// `r - Q Q^T r = r - sym(r) + U U^T r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsrProjector {
    pub mode: NsrMode,
    pub n_channels: usize,
    /// Range basis of the target scatter in `R^{N_c²}`.
    #[serde(with = "serde_mat")]
    pub range_basis: Mat,
    pub applicable: bool,
}

impl NsrProjector {
    pub fn identity(n_channels: usize) -> Self {
        Self {
            mode: NsrMode::None,
            n_channels,
            range_basis: Mat::zeros(n_channels * n_channels, 0),
            applicable: true,
        }
    }

    /// Dimension of the removed (symmetric) null space.
    pub fn null_dim(&self) -> usize {
        match self.mode {
            NsrMode::None => 0,
            _ => linalg::sym_dim(self.n_channels) - self.range_basis.ncols(),
        }
    }

    /// Applies the reduction regardless of applicability.
    pub fn apply(&self, r: &Vector) -> Result<Vector> {
        if r.len() != self.n_channels * self.n_channels {
            return Err(Error::Dimension(format!(
                "sample has length {} but the projector acts on {}",
                r.len(),
                self.n_channels * self.n_channels
            )));
        }
        if self.mode == NsrMode::None {
            return Ok(r.clone());
        }
        let rm = linalg::unvec(r, self.n_channels)?;
        let antisym = (&rm - rm.transpose()) * 0.5;
        let kept = &self.range_basis * (self.range_basis.transpose() * r);
        Ok(linalg::vec(&antisym) + kept)
    }

    /// Reduction for feature computation; errors when the projector is flagged
    /// inapplicable.
    pub fn reduce(&self, r: &Vector) -> Result<Vector> {
        if !self.applicable {
            return Err(Error::InapplicableProjector {
                fallback: match self.mode {
                    NsrMode::Cnsr => "BNSR",
                    _ => "no reduction",
                },
            });
        }
        self.apply(r)
    }
}

/// Projector for `mode` built from training scatters. Inapplicable (with a
/// warning) when the target null space is semi-empty.
pub fn nsr_projector(scatter: &ScatterTriple, mode: NsrMode) -> Result<NsrProjector> {
    let kind = match mode {
        NsrMode::None => return Ok(NsrProjector::identity(scatter.n_channels)),
        NsrMode::Cnsr => ScatterKind::St,
        NsrMode::Bnsr => ScatterKind::Sb,
    };
    let applicable = !scatter.is_semi_empty(kind);
    if !applicable {
        warn!("{mode:?}: null space of {kind:?} is semi-empty; reduction not applicable");
    }
    Ok(NsrProjector {
        mode,
        n_channels: scatter.n_channels,
        range_basis: scatter.range_basis(kind)?.columns,
        applicable,
    })
}

/// `f = V^T (I - Q Q^T) r`.
pub fn reduce_features(proj: &NsrProjector, v: &Mat, r: &Vector) -> Result<Vec<f64>> {
    let reduced = proj.reduce(r)?;
    scatter::scacsp_features(v, &reduced)
}

/// Train and test accuracy of one (filter subspace, component subspace) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub filter_source: Subspace,
    /// `None` means the unprojected samples.
    pub component: Option<Subspace>,
    /// `None` when either subspace is semi-empty.
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalGrid {
    pub filters_per_source: usize,
    pub cells: Vec<GridCell>,
}

impl EmpiricalGrid {
    pub fn cell(&self, filter_source: Subspace, component: Option<Subspace>) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.filter_source == filter_source && c.component == component)
    }

    /// Mean test accuracy of a filter source over its present cells.
    pub fn mean_test_accuracy(&self, filter_source: Subspace) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.filter_source == filter_source)
            .filter_map(|c| c.test_accuracy)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Column order of the component axis.
    pub fn components() -> Vec<Option<Subspace>> {
        std::iter::once(None).chain(Subspace::ALL.into_iter().map(Some)).collect()
    }
}

fn project_components(basis_vec: &Mat, samples: &[Vector]) -> Vec<Vector> {
    samples
        .iter()
        .map(|r| basis_vec * (basis_vec.transpose() * r))
        .collect()
}

fn classify(v: &Mat, train: &[Vector], train_labels: &[usize], test: &[Vector], test_labels: &[usize], classes: usize) -> Result<(f64, f64)> {
    let feats = |xs: &[Vector]| -> Vec<Vec<f64>> { xs.iter().map(|r| (v.transpose() * r).iter().copied().collect()).collect() };
    let ftr = feats(train);
    let model = lda::lda_train(&ftr, train_labels, classes, None)?;
    let predict = |fs: &[Vec<f64>]| -> Result<Vec<usize>> { fs.iter().map(|f| Ok(model.predict(f)?.0)).collect() };
    let train_acc = eval::accuracy(&predict(&ftr)?, train_labels)?;
    let test_acc = eval::accuracy(&predict(&feats(test))?, test_labels)?;
    Ok((train_acc, test_acc))
}

/// Accuracy over every filter subspace x component subspace pair: filters
/// from [`extra_filters`] (`2m(N_Ω-1)` per source), samples projected onto the
/// component subspace, raw linear features, LDA.
pub fn empirical_grid(train: &CovarianceSet, test_covs: &[Mat], test_labels: &[usize], m: usize) -> Result<EmpiricalGrid> {
    if test_covs.len() != test_labels.len() || test_covs.is_empty() {
        return Err(Error::Dimension("test covariances and labels must be non-empty and aligned".into()));
    }
    let classes = train.class_count;
    let count = 2 * m * (classes - 1);
    let v = scatter::vectorize_covariances(train);
    let scatters = scatter::scatter_matrices(&v, train.tol)?;
    let n = train.n_channels();
    let train_r: Vec<Vector> = (0..v.len()).map(|i| v.sample(i)).collect();
    let test_r: Vec<Vector> = test_covs.iter().map(|c| linalg::vec(&train.whiten(c))).collect();

    let mut bases = Vec::new();
    for s in Subspace::ALL {
        bases.push(linalg::hvec_columns_to_vec(&subspace_basis_h(&scatters, s)?, n)?);
    }
    let mut projected: Vec<Option<(Vec<Vector>, Vec<Vector>)>> = vec![Some((train_r.clone(), test_r.clone()))];
    for b in &bases {
        projected.push((b.ncols() > 0).then(|| (project_components(b, &train_r), project_components(b, &test_r))));
    }

    let sources: Vec<(Subspace, Option<Mat>)> = Subspace::ALL
        .par_iter()
        .map(|&s| match extra_filters(&scatters, &SubspaceSelector::single(s), count) {
            Ok(bank) => Ok((s, bank.whitened.map(|w| scatter::feature_projection(&w)))),
            Err(Error::SemiEmpty(_)) => Ok((s, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let components = EmpiricalGrid::components();
    let jobs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..components.len()).map(move |j| (i, j)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (source, proj) = &sources[i];
            let mut cell = GridCell {
                filter_source: *source,
                component: components[j],
                train_accuracy: None,
                test_accuracy: None,
            };
            if let (Some(v_a), Some((tr, te))) = (proj, &projected[j]) {
                let (a, b) = classify(v_a, tr, &train.labels, te, test_labels, classes)?;
                cell.train_accuracy = Some(a);
                cell.test_accuracy = Some(b);
            }
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalGrid {
        filters_per_source: count,
        cells,
    })
}
