//! Folding point-cloud autoencoder with hand-written reverse mode.
//!
//! All network code is generic over the float type: training runs in f32,
//! gradient verification in f64.

pub mod adam;
pub mod chamfer;
pub mod checkpoint;
pub mod model;
pub mod params;
pub mod train;

use std::fmt::Debug;

use num_traits::Float;

pub use adam::{adam_step, AdamState};
pub use chamfer::{chamfer, chamfer_grad_b, chamfer_indexed};
pub use checkpoint::Checkpoint;
pub use model::{
    batch_loss, decode, encode, encode_with, folding_grid, knn_indices, loss_and_gradients,
    reconstruct, Neighborhoods,
};
pub use params::{Architecture, Gradients, NetworkParams, Tensor};
pub use train::{to_f32, train, train_with, write_loss_csv, Preset, TrainConfig, TrainOptions, TrainOutcome};

pub trait Scalar: Float + Send + Sync + Debug + Default + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}
