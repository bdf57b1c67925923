//! Pseudo-label fusion and depth-based sample synthesis for domain-adaptive
//! semantic segmentation.
//!
//! Two prediction branches, one trained with depth supervision and one with
//! unsupervised domain adaptation, are fused pixel by pixel with class-wise
//! weights derived from label frequencies ([`classweights`], [`fusion`]).
//! The fused pseudo-labels then drive depth-aware compositing of training
//! scenes ([`dbst`]). [`metrics`] scores predictions and [`pipeline`] holds
//! file formats and the batch commands behind the `segfuse` binary.
//!
//! ```
//! use segfuse::{ClassTable, ClassWeights, FusionConfig, LogitTensor, fuse_labels};
//!
//! let table = ClassTable::preset("synseq12")?;
//! let c = table.len();
//! let dep = LogitTensor::new(1, 1, c, (0..c).map(|i| i as f32).collect())?;
//! let uda = LogitTensor::new(1, 1, c, vec![0.0; c])?;
//! // all trust on the depth branch
//! let cfg = FusionConfig::new(6.0, ClassWeights::from_uda(vec![0.0; c]))?;
//! assert_eq!(fuse_labels(&dep, &uda, &cfg)?.get(0, 0), (c - 1) as u8);
//! # Ok::<(), segfuse::Error>(())
//! ```

pub mod classes;
pub mod classweights;
pub mod dbst;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod validate;

pub use classes::{ClassEntry, ClassTable, ThingSet, IGNORE_ID};
pub use classweights::{
    compute_frequencies, finalize_weights, uda_weights_raw, ClassWeights, FrequencyCounter,
    FrequencyStats, WeightMode, DEFAULT_DELTA,
};
pub use error::{Error, Result};
pub use fusion::{
    decide_labels, fuse, fuse_labels, softmax_t, FusionConfig, ScoreTensor, DEFAULT_TEMPERATURE,
};
pub use metrics::ConfusionMatrix;
pub use raster::{DepthMap, ImageBuffer, LabelMap, LogitTensor, SceneSample};
pub use validate::{validate_sample, ValidationReport, Violation};
