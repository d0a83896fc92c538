//! The three uncertainty producers. Each turns trained networks and a test
//! set into a [`PredictionSet`](crate::data::PredictionSet).

pub mod dropout;
pub mod ensemble;
pub mod evidential;

pub use dropout::{mc_dropout_predict, DropoutError, DropoutSpec, DEFAULT_DROPOUT_RATE, DEFAULT_MC_SAMPLES};
pub use ensemble::{
    aggregate_members, ensemble_predict, kfold_ensemble_predict, train_ensemble, EnsembleError, EnsembleSpec,
    MemberTraining, DEFAULT_K,
};
pub use evidential::{
    evidential_loss, evidential_loss_raw_gradient, evidential_nll, evidential_params, evidential_predict,
    evidential_regularizer, evidential_uncertainties, EvidentialError, EvidentialParams, UncertaintyChannel,
    UncertaintyOutput, DEFAULT_LAMBDA,
};
