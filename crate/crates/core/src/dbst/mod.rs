//! Depth-based synthesis of self-training samples.

pub mod augment;
pub mod composite;
pub mod select;
pub mod synth;

pub use augment::{
    apply_augment, augment, AugmentConfig, AugmentParams, JitterConfig, JitterParams,
};
pub use composite::{
    candidate_depths, composite, depth_threshold, Composite, CompositeConfig, Layer,
    DEFAULT_PERCENTILE,
};
pub use select::select_sources;
pub use synth::{
    replica_id, synthesize_dataset, synthesize_one, SampleSource, SynthConfig, SynthFailure,
    SynthOutput, SynthSample,
};
