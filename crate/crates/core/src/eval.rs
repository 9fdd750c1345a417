//! Accuracy, stratified fold assignment and grid cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::RegGrid;
use crate::error::{Error, Result};

/// Fraction of predictions equal to the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Confusion counts, `[true - 1][predicted - 1]`.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], class_count: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; class_count]; class_count];
    for (&p, &l) in predictions.iter().zip(labels) {
        if (1..=class_count).contains(&p) && (1..=class_count).contains(&l) {
            m[l - 1][p - 1] += 1;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 0,
            stratified: true,
        }
    }
}

impl CvPlan {
    pub fn new(folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InfeasibleFolds(format!("need at least 2 folds, got {folds}")));
        }
        Ok(Self {
            folds,
            seed,
            stratified: true,
        })
    }

    /// Fold index per trial. Each class (or the whole set when not stratified)
    /// is shuffled with a ChaCha8 stream seeded by `seed`, then dealt round-robin,
    /// the dealing position carrying over between classes.
    pub fn assign(&self, labels: &[usize]) -> Result<Vec<usize>> {
        if self.folds < 2 {
            return Err(Error::InfeasibleFolds(format!("need at least 2 folds, got {}", self.folds)));
        }
        if labels.len() < self.folds {
            return Err(Error::InfeasibleFolds(format!(
                "{} trials cannot fill {} folds",
                labels.len(),
                self.folds
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut fold = vec![0usize; labels.len()];
        let groups: Vec<Vec<usize>> = if self.stratified {
            let max = labels.iter().copied().max().unwrap_or(0);
            (1..=max)
                .map(|k| (0..labels.len()).filter(|&i| labels[i] == k).collect::<Vec<_>>())
                .filter(|g| !g.is_empty())
                .collect()
        } else {
            vec![(0..labels.len()).collect()]
        };
        if self.stratified {
            for g in &groups {
                if g.len() < self.folds {
                    return Err(Error::InfeasibleFolds(format!(
                        "class {} has {} trials, fewer than {} folds",
                        labels[g[0]],
                        g.len(),
                        self.folds
                    )));
                }
            }
        }
        let mut next = 0usize;
        for mut g in groups {
            g.shuffle(&mut rng);
            for i in g {
                fold[i] = next % self.folds;
                next += 1;
            }
        }
        Ok(fold)
    }

    /// `(train, test)` index lists per fold.
    pub fn splits(&self, labels: &[usize]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let fold = self.assign(labels)?;
        Ok((0..self.folds)
            .map(|f| {
                let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
                let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
                (train, test)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
}

/// Grid points ordered by `(alpha, beta)`; `beta` is pinned to 0 when unused.
pub fn grid_points(grid: &RegGrid, uses_alpha: bool, uses_beta: bool) -> Vec<GridPoint> {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.is_empty() {
            v.push(0.0);
        }
        v
    };
    let alphas = if uses_alpha { sorted(&grid.alphas) } else { vec![0.0] };
    let betas = if uses_beta { sorted(&grid.betas) } else { vec![0.0] };
    alphas
        .iter()
        .flat_map(|&alpha| betas.iter().map(move |&beta| GridPoint { alpha, beta }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub alpha: f64,
    pub beta: f64,
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub alpha: f64,
    pub beta: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub rows: Vec<CvRow>,
    pub summaries: Vec<CvSummary>,
    pub best: GridPoint,
    pub best_accuracy: f64,
    pub best_fold_accuracies: Vec<f64>,
}

/// Scores every `(point, fold)` with `evaluate(point, train, test)` and picks
/// the point with the highest mean accuracy; ties go to the earliest point,
/// which for [`grid_points`] order means smallest `alpha`, then smallest `beta`.
pub fn cross_validate<F>(labels: &[usize], plan: &CvPlan, points: &[GridPoint], evaluate: F) -> Result<CvReport>
where
    F: Fn(&GridPoint, &[usize], &[usize]) -> Result<f64> + Sync,
{
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let splits = plan.splits(labels)?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..splits.len()).map(move |f| (p, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, f)| evaluate(&points[p], &splits[f].0, &splits[f].1))
        .collect::<Result<_>>()?;

    let folds = splits.len();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut summaries = Vec::with_capacity(points.len());
    let mut best = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for (p, point) in points.iter().enumerate() {
        let fold_acc = &scores[p * folds..(p + 1) * folds];
        for (f, &a) in fold_acc.iter().enumerate() {
            rows.push(CvRow {
                alpha: point.alpha,
                beta: point.beta,
                fold: f,
                accuracy: a,
            });
        }
        let mean = fold_acc.iter().sum::<f64>() / folds as f64;
        if mean > best_mean {
            best_mean = mean;
            best = p;
        }
        summaries.push(CvSummary {
            alpha: point.alpha,
            beta: point.beta,
            mean_accuracy: mean,
        });
    }
    Ok(CvReport {
        rows,
        summaries,
        best: points[best],
        best_accuracy: best_mean,
        best_fold_accuracies: scores[best * folds..(best + 1) * folds].to_vec(),
    })
}
