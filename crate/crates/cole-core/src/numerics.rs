//! Feature reduction, training losses, and the MLP surrogate.

pub mod loss;
pub mod mlp;
pub mod pca;

pub use loss::{loss_and_gradient, mse_loss, pairwise_hinge_loss, LossKind};
pub use mlp::{
    load_surrogate, save_surrogate, train_surrogate, MlpConfig, SurrogateModel, TrainConfig,
};
pub use pca::{pca_fit, pca_transform, PcaModel};
