//! Comparison codecs: top-k truncation, scalar quantization, PCA, and
//! segment quantization of the raw probabilities without projections.

mod pca;
mod scalar;
mod topk;
mod vq_no_ae;

pub use pca::PcaCodec;
pub use scalar::ScalarQuantCodec;
pub use topk::{select_topk, topk_compress, topk_decompress, TopkArchive, TopkSelection};
pub use vq_no_ae::VqNoAeCodec;

/// Renormalisation floor used by codecs that do not carry their own.
pub const DEFAULT_EPSILON: f64 = 1e-8;
