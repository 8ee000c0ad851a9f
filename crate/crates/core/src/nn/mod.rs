//! Dense networks with hand-written backpropagation, losses, Adam and
//! finite-difference gradient checking.

mod adam;
mod gradcheck;
mod loss;
mod net;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GRAD_CHECK_FLOOR};
pub use loss::{sigmoid, triplet_margin_loss, weighted_bce, TripletGrads};
pub use net::{flatten_grads, Activation, DenseNet, ForwardCache, Layer, LayerGrads, NetSnapshot};
pub use rng::{derive_seed, seeded, Rng};
