//! Dense `f64` matrices, a reverse-mode tape, the LSTM cell, SGD and a
//! finite-difference gradient checker.

mod gradcheck;
mod lstm;
mod matrix;
mod optim;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use lstm::{LstmCellParams, LstmIds, LstmNodes, LstmState};
pub use matrix::{cross_entropy, masked_softmax, sigmoid, softmax, Matrix};
pub use optim::{sgd_step, Parameters};
pub use tape::{Gradients, NodeId, ParamGrads, ParamId, Tape};

use rand::Rng;

/// Overwrites `m` with draws from `U[-range, range]`.
pub fn fill_uniform<R: Rng + ?Sized>(m: &mut Matrix, range: f64, rng: &mut R) {
    for v in m.data_mut() {
        *v = if range > 0.0 {
            rng.gen_range(-range..=range)
        } else {
            0.0
        };
    }
}
