//! Second-order recurrent network, end-of-string loss and RMSprop training.

mod model;
mod train;

pub use model::{encode, loss, sigmoid, SecondOrderRnn, Trace, INPUT_SIZE, RESPONSE_INDEX, STOP};
pub use train::{train, train_with, Control, RmsProp, TrainConfig, TrainOutcome};
