//! Common spatial pattern filters for multichannel time-series classification:
//! classical and regularized CSP, one-versus-rest and pair-wise multi-class CSP,
//! scatter-based CSP over vectorized covariances with subspace extensions,
//! LDA, cross-validation and a seeded synthetic data generator.

pub mod csp;
pub mod error;
pub mod eval;
pub mod lda;
pub mod linalg;
pub mod multiclass;
pub mod oracle;
pub mod pipeline;
pub mod preprocess;
pub mod scatter;
pub mod serde_mat;
pub mod subspace;
pub mod synth;

pub use csp::{FilterBank, Provenance, RegGrid};
pub use error::{Error, Result};
pub use eval::{CvPlan, CvReport, GridPoint};
pub use lda::LdaModel;
pub use linalg::{Mat, OrthoBasis, RankTolerance, ScatterKind, Subspace, SymEig, Vector};
pub use multiclass::{OvrModel, PwModel};
pub use pipeline::{Method, PipelineConfig, PipelineModel};
pub use preprocess::{BandpassSpec, CovarianceSet, RestMode, TrialSet};
pub use scatter::{DaVector, ScatterTriple, SelectionMode, VecCovSamples};
pub use subspace::{EmpiricalGrid, NsrMode, NsrProjector, SubspaceSelector};
pub use synth::SynthSpec;
