//! File formats, manifests, fixtures and the batch commands that tie the
//! library together.

pub mod commands;
pub mod fixtures;
pub mod io;
pub mod manifest;
pub mod palette;
pub mod stamp;
pub mod weights_file;

use std::path::PathBuf;

use crate::classes::ClassTable;
use crate::error::{Error, Result};

pub use commands::{
    cmd_eval, cmd_fixtures, cmd_fuse, cmd_synth, cmd_weights, EvalSource, EvalSummary, FuseOptions,
    RecordFailure, RunReport, SynthOptions, WeightsOptions,
};
pub use manifest::{FieldKind, Manifest, ManifestRecord};
pub use weights_file::WeightsFile;

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub classes: ClassTable,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub depth_scale: f64,
}

impl RunConfig {
    pub fn new(classes: ClassTable, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            classes,
            workers: 1,
            out_dir: out_dir.into(),
            depth_scale: io::DEFAULT_DEPTH_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Domain("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::Domain("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
