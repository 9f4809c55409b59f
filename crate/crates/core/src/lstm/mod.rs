//! LSTM regressor built from scratch: a single LSTM layer over a window of
//! feature rows, followed by a ReLU dense stack (15 → 31 → 22), trained with
//! backpropagation through time and Adam.

mod adam;
mod cell;
mod network;
mod params;
mod train;

pub use adam::{clip_by_norm, Adam};
pub use cell::{cell_forward, sigmoid, CellState, GateRecord};
pub use network::{forward, loss, loss_and_gradients, Sample, Tape};
pub use params::{init_params, DenseLayer, LstmParams, DENSE_HIDDEN, OUTPUTS, TENSOR_NAMES};
pub use train::{predict, predict_scaled, samples, train, TrainConfig};
