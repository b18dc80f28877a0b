use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{sigmoid, Matrix};
use super::tape::{NodeId, ParamId, Tape};
use crate::error::{Error, Result};

/// Weights of one LSTM cell with the four gates stacked in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    /// `4H x input`
    pub w_ih: Matrix,
    /// `4H x H`
    pub w_hh: Matrix,
    /// `4H x 1`
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Ids of an [`LstmCellParams`] inside a model's parameter ordering.
#[derive(Debug, Clone, Copy)]
pub struct LstmIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
}

impl LstmIds {
    /// Three consecutive ids starting at `first`.
    pub fn starting_at(first: usize) -> Self {
        LstmIds {
            w_ih: ParamId(first),
            w_hh: ParamId(first + 1),
            bias: ParamId(first + 2),
        }
    }
}

/// Hidden and cell state as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w_ih: Matrix::zeros(4 * hidden, input),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            bias: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, range: f64, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input, hidden);
        for m in [&mut cell.w_ih, &mut cell.w_hh, &mut cell.bias] {
            super::fill_uniform(m, range, rng);
        }
        cell
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if self.w_ih.rows() != 4 * h || self.w_hh.rows() != 4 * h || self.bias.shape() != (4 * h, 1)
        {
            return Err(Error::InvalidShape(format!(
                "inconsistent LSTM gates: w_ih {:?}, w_hh {:?}, bias {:?}",
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }

    /// One step without recording gradients.
    pub fn step(&self, input: &[f64], state: &LstmState) -> Result<LstmState> {
        let hidden = self.hidden();
        if state.h.len() != hidden || state.c.len() != hidden {
            return Err(Error::InvalidShape(format!(
                "state of size {}/{} for hidden size {hidden}",
                state.h.len(),
                state.c.len()
            )));
        }
        let from_input = self.w_ih.matvec(input)?;
        let from_hidden = self.w_hh.matvec(&state.h)?;
        let mut h = Vec::with_capacity(hidden);
        let mut c = Vec::with_capacity(hidden);
        for j in 0..hidden {
            let pre = |gate: usize| {
                let r = gate * hidden + j;
                from_input[r] + from_hidden[r] + self.bias.data()[r]
            };
            let i = sigmoid(pre(0));
            let f = sigmoid(pre(1));
            let g = pre(2).tanh();
            let o = sigmoid(pre(3));
            let cj = f * state.c[j] + i * g;
            c.push(cj);
            h.push(o * cj.tanh());
        }
        Ok(LstmState { h, c })
    }

    /// One step recorded on `tape`. `input` must be a column vector node.
    pub fn step_on_tape(
        &self,
        tape: &mut Tape,
        ids: LstmIds,
        input: NodeId,
        state: LstmNodes,
    ) -> Result<LstmNodes> {
        let hidden = self.hidden();
        let w_ih = tape.param(ids.w_ih, &self.w_ih);
        let w_hh = tape.param(ids.w_hh, &self.w_hh);
        let bias = tape.param(ids.bias, &self.bias);
        let xi = tape.matmul(w_ih, input)?;
        let hh = tape.matmul(w_hh, state.h)?;
        let pre = tape.add_n(&[xi, hh, bias])?;
        let i = tape.slice_rows(pre, 0, hidden)?;
        let f = tape.slice_rows(pre, hidden, hidden)?;
        let g = tape.slice_rows(pre, 2 * hidden, hidden)?;
        let o = tape.slice_rows(pre, 3 * hidden, hidden)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, state.c)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let squashed = tape.tanh(c);
        let h = tape.mul(o, squashed)?;
        Ok(LstmNodes { h, c })
    }

    pub fn zero_state_on_tape(&self, tape: &mut Tape) -> LstmNodes {
        let hidden = self.hidden();
        LstmNodes {
            h: tape.constant(Matrix::zeros(hidden, 1)),
            c: tape.constant(Matrix::zeros(hidden, 1)),
        }
    }
}
