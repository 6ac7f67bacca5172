//! Minimal differentiable core: tensors, a reverse-mode tape, dense and
//! normalisation layers, losses, optimizers and finite-difference checks.

pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Binding, Graph, Mat, NodeId};
pub use layers::{dense, dense_forward, Activation};
pub use loss::{mse_loss, softmax_cross_entropy};
pub use optim::{AdamState, Optimizer, OptimizerConfig, Sgd};
pub use tensor::{ParameterSet, Role, Tensor};
