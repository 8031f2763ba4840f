//! On-disk dataset layout: one `<stem>.samples.csv` plus `<stem>.meta.json`
//! pair per trial, flat in one directory.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::trial::{parse_trial, write_samples, TrialError, TrialRecording};

/// Version of the on-disk trial layout (sample columns and metadata keys).
pub const DATA_SCHEMA_VERSION: u32 = 1;
pub const SAMPLES_SUFFIX: &str = ".samples.csv";
pub const META_SUFFIX: &str = ".meta.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Trial {
        path: PathBuf,
        #[source]
        source: TrialError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: no trials found (expected *{META_SUFFIX} files)", .0.display())]
    Empty(PathBuf),
    #[error("{}: metadata has no matching {SAMPLES_SUFFIX}", .0.display())]
    MissingSamples(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrialFiles {
    pub samples: PathBuf,
    pub meta: PathBuf,
}

impl TrialFiles {
    pub fn stem(&self) -> String {
        let name = self.meta.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        name.strip_suffix(META_SUFFIX).unwrap_or(name).to_string()
    }
}

pub fn trial_stem(trial: &TrialRecording) -> String {
    format!("{}_{}", trial.participant_id, trial.incident)
}

/// All trials in `dir`, sorted by file name.
pub fn list_trials(dir: &Path) -> Result<Vec<TrialFiles>, DatasetError> {
    let io_err = |source| DatasetError::Io { path: dir.to_path_buf(), source };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(META_SUFFIX) {
            let samples = dir.join(format!("{stem}{SAMPLES_SUFFIX}"));
            if !samples.is_file() {
                return Err(DatasetError::MissingSamples(path));
            }
            out.push(TrialFiles { samples, meta: path });
        }
    }
    if out.is_empty() {
        return Err(DatasetError::Empty(dir.to_path_buf()));
    }
    out.sort();
    Ok(out)
}

pub fn load_trial(files: &TrialFiles) -> Result<TrialRecording, DatasetError> {
    let meta =
        fs::read_to_string(&files.meta).map_err(|source| DatasetError::Io { path: files.meta.clone(), source })?;
    let stream =
        fs::File::open(&files.samples).map_err(|source| DatasetError::Io { path: files.samples.clone(), source })?;
    parse_trial(std::io::BufReader::new(stream), &meta)
        .map_err(|source| DatasetError::Trial { path: files.samples.clone(), source })
}

pub fn load_dataset(dir: &Path) -> Result<Vec<TrialRecording>, DatasetError> {
    list_trials(dir)?.iter().map(load_trial).collect()
}

pub fn save_trial(dir: &Path, trial: &TrialRecording) -> Result<TrialFiles, DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io { path: dir.to_path_buf(), source })?;
    let stem = trial_stem(trial);
    let files = TrialFiles {
        samples: dir.join(format!("{stem}{SAMPLES_SUFFIX}")),
        meta: dir.join(format!("{stem}{META_SUFFIX}")),
    };
    let file =
        fs::File::create(&files.samples).map_err(|source| DatasetError::Io { path: files.samples.clone(), source })?;
    write_samples(&trial.samples, BufWriter::new(file))
        .map_err(|source| DatasetError::Trial { path: files.samples.clone(), source })?;
    fs::write(&files.meta, trial.meta().to_json() + "\n")
        .map_err(|source| DatasetError::Io { path: files.meta.clone(), source })?;
    Ok(files)
}
