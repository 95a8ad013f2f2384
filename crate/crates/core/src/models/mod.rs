//! Concrete state-space models.

pub mod kalman;
pub mod logistic;
pub mod ou;
pub mod special;

pub use logistic::{GammaConvention, LogisticModel};
pub use ou::OuModel;
