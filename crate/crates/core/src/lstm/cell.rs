use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::params::LstmParams;

/// Hidden output `h` and cell state `c` after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord {
    /// `[h_{t-1}, x_t]`
    pub concat: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    /// Candidate values `tanh(W_c·[h, x] + b_c)`.
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gate(w: &Matrix, b: &[f64], z: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    w.iter_rows()
        .zip(b)
        .map(|(row, bias)| act(crate::matrix::dot(row, z) + bias))
        .collect()
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f·[h,x] + b_f)      i = σ(W_i·[h,x] + b_i)
/// c̃ = tanh(W_c·[h,x] + b_c)   C = f∘C_prev + i∘c̃
/// o = σ(W_o·[h,x] + b_o)      h = o∘tanh(C)
/// ```
pub fn cell_forward(p: &LstmParams, x: &[f64], prev: &CellState) -> Result<(CellState, GateRecord)> {
    if x.len() != p.input_size || prev.h.len() != p.hidden_size || prev.c.len() != p.hidden_size {
        return Err(Error::Dimension(format!(
            "cell expects input {} and hidden {}, got {} / {} / {}",
            p.input_size,
            p.hidden_size,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    if x.iter().chain(&prev.h).chain(&prev.c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cell input".into()));
    }
    Ok(step(p, x, prev))
}

pub(crate) fn step(p: &LstmParams, x: &[f64], prev: &CellState) -> (CellState, GateRecord) {
    let mut concat = Vec::with_capacity(prev.h.len() + x.len());
    concat.extend_from_slice(&prev.h);
    concat.extend_from_slice(x);

    let forget = gate(&p.w_f, &p.b_f, &concat, sigmoid);
    let input = gate(&p.w_i, &p.b_i, &concat, sigmoid);
    let candidate = gate(&p.w_c, &p.b_c, &concat, f64::tanh);
    let output = gate(&p.w_o, &p.b_o, &concat, sigmoid);

    let c: Vec<f64> = (0..p.hidden_size)
        .map(|j| forget[j] * prev.c[j] + input[j] * candidate[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();

    (
        CellState { h, c },
        GateRecord {
            concat,
            forget,
            input,
            candidate,
            output,
            c_prev: prev.c.clone(),
            tanh_c,
        },
    )
}
