//! The guide under `book/src`, compiled here so its code blocks run as
//! doc-tests and stay in step with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/class_weights.md")]
pub mod class_weights {}

#[doc = include_str!("../../../book/src/fusion.md")]
pub mod fusion {}

#[doc = include_str!("../../../book/src/compositing.md")]
pub mod compositing {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
