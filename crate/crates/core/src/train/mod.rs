//! Training engine: block model, gradients, AdamW with annealing weight decay,
//! and the early-block freeze policy.

mod config;
mod engine;
mod model;
mod optim;

pub use config::{AdaptTargets, AwdSchedule, DecayReference, TrainConfig};
pub use engine::{apply_freeze_policy, loss_and_grad, train_loop, TrainOutcome};
pub use model::{
    argmax_columns, gelu, gelu_grad, Block, BlockModel, ForwardCache, GradEntry, Gradients, LayerId, LayerWeight,
    Linear, ModelDims, ParamGroup, ParamSlot,
};
pub use optim::{adamw_step, adamw_update, awd_coefficient, OptimizerState, BETA1, BETA2, EPS};
