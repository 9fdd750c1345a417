//! SCA1 trial files, dataset manifests and atomic file output.
//!
//! A trial file is the 4 magic bytes `SCA1`, then `n_channels` and `n_samples`
//! as little-endian `u32`, then `n_channels * n_samples` little-endian `f64`
//! in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scacsp_core::{Mat, TrialSet};

use crate::error::{missing, CliError, CliResult, Context};

pub const MAGIC: &[u8; 4] = b"SCA1";

pub fn encode_trial(x: &Mat) -> Vec<u8> {
    let (r, c) = x.shape();
    let mut out = Vec::with_capacity(12 + 8 * r * c);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(r as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    for i in 0..r {
        for j in 0..c {
            out.extend_from_slice(&x[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_trial(bytes: &[u8], path: &Path) -> CliResult<Mat> {
    let bad = |msg: &str| CliError::Data(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("not an SCA1 trial file (bad magic)"));
    }
    let r = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = r
        .checked_mul(c)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| bad("header dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "{r}x{c} header needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(r * c);
    for chunk in bytes[12..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(Mat::from_row_slice(r, c, &values))
}

pub fn read_trial(path: &Path) -> CliResult<Mat> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_trial(&bytes, path)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Parses JSON, reporting the field path of any schema violation.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        CliError::Data(format!("{}: at '{at}': {}", path.display(), e.inner()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Train,
    Test,
}

impl std::str::FromStr for Session {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "train" => Ok(Session::Train),
            "test" => Ok(Session::Test),
            _ => Err(CliError::Usage(format!("unknown session '{s}' (train or test)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    /// Relative to the manifest's directory unless absolute.
    pub file: PathBuf,
    pub label: String,
    pub session: Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub fs_hz: f64,
    pub channel_names: Vec<String>,
    pub trials: Vec<TrialEntry>,
    pub label_map: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.label_map.len()
    }

    pub fn validate(&self, origin: &Path) -> CliResult<()> {
        let bad = |msg: String| CliError::Data(format!("{}: {msg}", origin.display()));
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return Err(bad(format!("fs_hz must be positive, got {}", self.fs_hz)));
        }
        let mut ids: Vec<usize> = self.label_map.values().copied().collect();
        ids.sort_unstable();
        if ids.is_empty() || ids.iter().enumerate().any(|(i, &id)| id != i + 1) {
            return Err(bad(format!("label_map ids must be contiguous from 1, got {ids:?}")));
        }
        for (i, t) in self.trials.iter().enumerate() {
            if !self.label_map.contains_key(&t.label) {
                return Err(bad(format!("trials[{i}].label '{}' is not in label_map", t.label)));
            }
        }
        Ok(())
    }

    /// Class label string for a class id.
    pub fn label_of(&self, id: usize) -> Option<&str> {
        self.label_map.iter().find(|(_, &v)| v == id).map(|(k, _)| k.as_str())
    }
}

/// Trials of one or more sessions with their manifest entries.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub manifest: DatasetManifest,
    pub entries: Vec<TrialEntry>,
    pub trials: TrialSet,
}

pub fn read_manifest(path: &Path) -> CliResult<DatasetManifest> {
    if !path.exists() {
        return Err(missing(path));
    }
    let manifest: DatasetManifest = read_json(path)?;
    manifest.validate(path)?;
    Ok(manifest)
}

/// Loads the trials of the given sessions (all when `sessions` is empty),
/// without filtering or windowing.
pub fn ingest(path: &Path, sessions: &[Session]) -> CliResult<Loaded> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries: Vec<TrialEntry> = manifest
        .trials
        .iter()
        .filter(|t| sessions.is_empty() || sessions.contains(&t.session))
        .cloned()
        .collect();
    if entries.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no trials for session(s) {sessions:?}",
            path.display()
        )));
    }
    let n = manifest.channel_names.len();
    let mut trials = Vec::with_capacity(entries.len());
    for e in &entries {
        let file = if e.file.is_absolute() { e.file.clone() } else { base.join(&e.file) };
        if !file.exists() {
            return Err(missing(&file));
        }
        let x = read_trial(&file)?;
        if x.nrows() != n {
            return Err(CliError::Data(format!(
                "{}: {} channels but manifest lists {n}",
                file.display(),
                x.nrows()
            )));
        }
        if let Some(first) = trials.first().map(|t: &Mat| t.ncols()) {
            if x.ncols() != first {
                return Err(CliError::Data(format!(
                    "{}: {} samples but earlier trials have {first}",
                    file.display(),
                    x.ncols()
                )));
            }
        }
        trials.push(x);
    }
    let labels = entries.iter().map(|e| manifest.label_map[&e.label]).collect();
    let trials = TrialSet::new(
        trials,
        labels,
        manifest.fs_hz,
        manifest.class_count(),
        manifest.channel_names.clone(),
    )
    .context(format!("{}", path.display()))?;
    Ok(Loaded {
        manifest,
        entries,
        trials,
    })
}

/// Writes every trial as `<stem>_NNNNN.sca` next to the manifest and the
/// manifest itself. `sessions[i]` tags trial `i`.
pub fn write_dataset(
    manifest_path: &Path,
    name: &str,
    trials: &TrialSet,
    sessions: &[Session],
) -> CliResult<DatasetManifest> {
    let dir = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = manifest_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let label_map: BTreeMap<String, usize> = (1..=trials.class_count).map(|k| (format!("class{k}"), k)).collect();
    let mut entries = Vec::with_capacity(trials.len());
    for (i, x) in trials.trials.iter().enumerate() {
        let file = PathBuf::from(format!("{stem}_{i:05}.sca"));
        write_atomic(&dir.join(&file), &encode_trial(x))?;
        entries.push(TrialEntry {
            file,
            label: format!("class{}", trials.labels[i]),
            session: sessions[i],
        });
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        fs_hz: trials.fs,
        channel_names: trials.channel_names.clone(),
        trials: entries,
        label_map,
    };
    write_json(manifest_path, &manifest)?;
    Ok(manifest)
}
