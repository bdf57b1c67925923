//! Whole-dataset synthesis: for every base image, `samples_per_base` replicas
//! are composited from randomly drawn source images and optionally augmented.

use rayon::prelude::*;

use super::augment::{augment, AugmentConfig};
use super::composite::{composite, CompositeConfig, Layer, DEFAULT_PERCENTILE};
use super::select::select_sources;
use crate::classes::ThingSet;
use crate::error::{Error, Result};
use crate::raster::{DepthMap, ImageBuffer, LabelMap};
use crate::rng::sample_rng;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Group size N, base included.
    pub n_images: usize,
    pub percentile: f64,
    pub things: ThingSet,
    pub samples_per_base: usize,
    pub seed: u64,
    pub include_base: bool,
    pub augment: AugmentConfig,
}

impl SynthConfig {
    pub fn new(things: ThingSet) -> Self {
        SynthConfig {
            n_images: 2,
            percentile: DEFAULT_PERCENTILE,
            things,
            samples_per_base: 4,
            seed: 0,
            include_base: true,
            augment: AugmentConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 {
            return Err(Error::Domain("n_images must be at least 1".into()));
        }
        if self.samples_per_base == 0 {
            return Err(Error::Domain("samples_per_base must be at least 1".into()));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::Domain(format!(
                "percentile must lie in (0, 1), got {}",
                self.percentile
            )));
        }
        if self.augment.enabled {
            self.augment.validate()?;
        }
        Ok(())
    }

    fn composite_config(&self) -> CompositeConfig {
        CompositeConfig {
            percentile: self.percentile,
            things: self.things.clone(),
            include_base: self.include_base,
        }
    }
}

/// A scene with the rasters compositing needs; `label` is the pseudo-label.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub label: LabelMap,
}

/// Random-access pool of samples, loaded on demand.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn id(&self, index: usize) -> &str;

    fn load(&self, index: usize) -> Result<SynthSample>;
}

impl SampleSource for [(String, SynthSample)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn id(&self, index: usize) -> &str {
        &self[index].0
    }

    fn load(&self, index: usize) -> Result<SynthSample> {
        Ok(self[index].1.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub id: String,
    pub base_index: usize,
    pub replica: usize,
    /// Pool indices of the group, base first.
    pub group: Vec<usize>,
    pub image: ImageBuffer,
    pub label: LabelMap,
}

#[derive(Debug)]
pub struct SynthFailure {
    pub id: String,
    pub error: Error,
}

/// Output id for replica `replica` of base `base_id`.
pub fn replica_id(base_id: &str, replica: usize) -> String {
    format!("{base_id}_r{replica:03}")
}

/// Produces one replica; all randomness comes from the
/// `(seed, base_index, replica)` stream.
pub fn synthesize_one<S: SampleSource + ?Sized>(
    pool: &S,
    base_index: usize,
    replica: usize,
    cfg: &SynthConfig,
) -> Result<SynthOutput> {
    let mut rng = sample_rng(cfg.seed, base_index, replica);
    let mut group = vec![base_index];
    group.extend(select_sources(
        pool.len(),
        base_index,
        cfg.n_images,
        &mut rng,
    )?);
    let samples: Vec<SynthSample> = group.iter().map(|&i| pool.load(i)).collect::<Result<_>>()?;
    let layers: Vec<Layer<'_>> = samples
        .iter()
        .map(|s| Layer {
            image: &s.image,
            depth: &s.depth,
            label: &s.label,
        })
        .collect();
    let comp = composite(&layers, &cfg.composite_config())?;
    let (image, label) = if cfg.augment.enabled {
        augment(&comp.image, &comp.label, &cfg.augment, &mut rng)?
    } else {
        (comp.image, comp.label)
    };
    Ok(SynthOutput {
        id: replica_id(pool.id(base_index), replica),
        base_index,
        replica,
        group,
        image,
        label,
    })
}

/// Synthesizes every replica of every base image on `workers` threads.
///
/// Results come back in (base, replica) order regardless of scheduling. A
/// failing replica is reported and the others proceed.
pub fn synthesize_dataset<S: SampleSource + ?Sized>(
    pool: &S,
    cfg: &SynthConfig,
    workers: usize,
) -> Result<Vec<Result<SynthOutput, SynthFailure>>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..pool.len())
        .flat_map(|b| (0..cfg.samples_per_base).map(move |r| (b, r)))
        .collect();
    let run = |&(b, r): &(usize, usize)| {
        synthesize_one(pool, b, r, cfg).map_err(|error| SynthFailure {
            id: replica_id(pool.id(b), r),
            error,
        })
    };
    crate::pipeline::with_workers(workers, || jobs.par_iter().map(run).collect())
}
