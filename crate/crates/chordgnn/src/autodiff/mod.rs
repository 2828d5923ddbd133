//! Dense f64 tensor core with reverse-mode differentiation: a tape of
//! executed ops, the recurrent layers, parameter storage, AdamW, and the
//! checkpoint format. Everything is 2-D (scalars are 1x1 matrices).

mod adamw;
mod checkpoint;
mod params;
mod rnn;
mod tape;


pub use adamw::{AdamW, OptimizerError};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use params::{Ctx, Param, ParamStore};
pub use rnn::{gru_layer, lstm_bidirectional_layer, GruParams, LstmParams};
pub use tape::{Tape, Tensor};
