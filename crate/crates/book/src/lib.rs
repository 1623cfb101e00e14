//! The guide in `book/`, compiled so its snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/signal-model.md")]
pub mod signal_model {}
#[doc = include_str!("../../../book/src/processing.md")]
pub mod processing {}
#[doc = include_str!("../../../book/src/cfar.md")]
pub mod cfar {}
#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}
