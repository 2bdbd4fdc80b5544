//! From-scratch differentiable core: tensors, layer kernels, the U-Net,
//! the joint loss, the Nadam optimizer, gradient checking and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod nadam;
mod scalar;
mod tensor;
pub mod unet;

pub use checkpoint::{load_model, save_model, Checkpoint};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport, Objective};
pub use loss::{jaccard, joint_loss, soft_jaccard, JaccardMode, LossValue};
pub use nadam::{Nadam, NadamConfig};
pub use scalar::Scalar;
pub use tensor::Tensor4;
pub use unet::{Gradients, Mode, Param, ParamKind, Trace, UNetConfig, UNetModel};
