//! Backdoor-adjusted interaction prediction and the training objective.

pub mod loss;
pub mod model;

pub use loss::{
    bce_mean_var, bce_sum_var, rec_loss, total_loss, total_loss_var, LossComponentVars, LossComponents, LossWeights,
};
pub use model::{backdoor_input, predict, selection_weights, PredictorParams, HIDDEN, K_IN, K_OUT};
