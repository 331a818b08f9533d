//! The segmented vector-quantized linear autoencoder.

mod loss;
mod model;
mod topk_vq;
mod train;

pub use loss::{cache_loss_and_grads, CacheLoss, Gradients};
pub use model::{renormalize, CodeIndexMatrix, VqaeModel};
pub use topk_vq::{TopkVqCodec, TopkVqCodes};
pub use train::{fit, init_model, GradientMode, TrainConfig, TrainTrace};

pub use model::index_bits;
pub(crate) use model::renormalize_rows;
pub(crate) use train::{train, Trainable};
