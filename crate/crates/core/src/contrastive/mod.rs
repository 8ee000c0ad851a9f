//! Two-phase training: triplet-loss pretraining that pulls each user's days
//! together, then class-balanced supervised fine-tuning and user-level inference.

mod config;
mod finetune;
mod model;
mod pretrain;

pub use config::TrainConfig;
pub use finetune::{finetune, init_classifier, EpochLog, FinetuneOutcome, RowSampler};
pub use model::{
    finetune_fold, predict_user, pretrain_rows, InputMap, PretrainedFold, TrainedModel, CHECKPOINT_VERSION,
};
pub use pretrain::{
    embedding_separation, init_embedder, init_projection, pretrain, sample_triplets, separation_ratio,
    triplet_objective, triplet_objective_grad, PretrainOutcome, Triplet, TripletSampler,
};
