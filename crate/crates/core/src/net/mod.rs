//! Pose interpreter network, its training loop, and checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod real;
pub mod train;

pub use model::{
    forward, forward_input, init_params, input_from_gray, input_from_mask, predict_file, predict_inputs, ForwardCache,
    Gradients, NetworkConfig, NetworkParams, Params, PosePrediction, Tensor,
};
pub use real::Real;
pub use train::{backward, evaluate, train, train_with_progress, LossConfig, TrainConfig, TrainingLog};
