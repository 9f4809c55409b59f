use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::dot;

use super::cell::{step, CellState, GateRecord};
use super::params::LstmParams;

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    pub steps: Vec<GateRecord>,
    /// Final hidden state `h_T`, the dense stack input.
    pub last_h: Vec<f64>,
    /// Post-ReLU activations of each dense layer; the last one is the output.
    pub dense_out: Vec<Vec<f64>>,
}

/// One training example: a window of feature rows and its target vector.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub window: Vec<&'a [f64]>,
    pub target: &'a [f64],
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn check_window<R: AsRef<[f64]>>(p: &LstmParams, window: &[R]) -> Result<()> {
    if window.is_empty() {
        return Err(Error::Dimension("empty window".into()));
    }
    if let Some(bad) = window.iter().find(|x| x.as_ref().len() != p.input_size) {
        return Err(Error::Dimension(format!(
            "window row has {} values, network expects {}",
            bad.as_ref().len(),
            p.input_size
        )));
    }
    Ok(())
}

/// Runs the cell across `window` from a zero state, then the dense stack on
/// `h_T`. Every output passes through a ReLU and is therefore `≥ 0`.
pub fn forward<R: AsRef<[f64]>>(p: &LstmParams, window: &[R]) -> Result<(Vec<f64>, Tape)> {
    check_window(p, window)?;
    Ok(forward_unchecked(p, window))
}

pub(crate) fn forward_unchecked<R: AsRef<[f64]>>(p: &LstmParams, window: &[R]) -> (Vec<f64>, Tape) {
    let mut state = CellState::zeros(p.hidden_size);
    let mut steps = Vec::with_capacity(window.len());
    for x in window {
        let (next, rec) = step(p, x.as_ref(), &state);
        steps.push(rec);
        state = next;
    }
    let mut dense_out = Vec::with_capacity(p.dense.len());
    let mut a = state.h.clone();
    for layer in &p.dense {
        a = layer
            .w
            .iter_rows()
            .zip(&layer.b)
            .map(|(row, b)| relu(dot(row, &a) + b))
            .collect();
        dense_out.push(a.clone());
    }
    (
        a,
        Tape {
            steps,
            last_h: state.h,
            dense_out,
        },
    )
}

/// Accumulates into `grads` the gradient of `Σ_k weight·(out_k - target_k)²`
/// for one sample, and returns that sum.
fn backward(p: &LstmParams, tape: &Tape, target: &[f64], weight: f64, grads: &mut LstmParams) -> f64 {
    let out = tape.dense_out.last().expect("dense stack is non-empty");
    let mut loss = 0.0;
    let mut delta: Vec<f64> = out
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let r = o - t;
            loss += weight * r * r;
            2.0 * weight * r
        })
        .collect();

    // Dense stack, last layer first. `delta` holds dL/d(post-activation).
    for k in (0..p.dense.len()).rev() {
        let layer = &p.dense[k];
        let act = &tape.dense_out[k];
        let input = if k == 0 { &tape.last_h } else { &tape.dense_out[k - 1] };
        // ReLU'(z) is 1 where the output is positive.
        for (d, a) in delta.iter_mut().zip(act) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
        let g = &mut grads.dense[k];
        for (r, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            g.b[r] += d;
            for (gw, x) in g.w.row_mut(r).iter_mut().zip(input) {
                *gw += d * x;
            }
        }
        delta = layer.w.mul_vec_transposed(&delta);
    }

    // Backpropagation through time.
    let hidden = p.hidden_size;
    let mut dh = delta;
    let mut dc = vec![0.0; hidden];
    let mut dz = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
    for rec in tape.steps.iter().rev() {
        for j in 0..hidden {
            let (f, i, g, o, tc) = (rec.forget[j], rec.input[j], rec.candidate[j], rec.output[j], rec.tanh_c[j]);
            let d_o = dh[j] * tc;
            let d_c = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[0][j] = d_c * rec.c_prev[j] * f * (1.0 - f);
            dz[1][j] = d_c * g * i * (1.0 - i);
            dz[2][j] = d_c * i * (1.0 - g * g);
            dz[3][j] = d_o * o * (1.0 - o);
            dc[j] = d_c * f;
        }
        let mut d_concat = vec![0.0; rec.concat.len()];
        let weights = [&p.w_f, &p.w_i, &p.w_c, &p.w_o];
        let (gw, gb) = grad_gates(grads);
        for g in 0..4 {
            for (j, d) in dz[g].iter().enumerate() {
                gb[g][j] += d;
                for (w, x) in gw[g].row_mut(j).iter_mut().zip(&rec.concat) {
                    *w += d * x;
                }
                for (dcat, w) in d_concat.iter_mut().zip(weights[g].row(j)) {
                    *dcat += d * w;
                }
            }
        }
        dh.copy_from_slice(&d_concat[..hidden]);
    }
    loss
}

fn grad_gates(g: &mut LstmParams) -> ([&mut crate::matrix::Matrix; 4], [&mut Vec<f64>; 4]) {
    (
        [&mut g.w_f, &mut g.w_i, &mut g.w_c, &mut g.w_o],
        [&mut g.b_f, &mut g.b_i, &mut g.b_c, &mut g.b_o],
    )
}

/// Mean squared error over every output of every sample, and its gradient
/// with respect to all parameters (full backpropagation through time).
///
/// Per-sample work runs in parallel; partial gradients are summed in sample
/// order so the result does not depend on the thread count.
pub fn loss_and_gradients(p: &LstmParams, batch: &[Sample<'_>]) -> Result<(f64, LstmParams)> {
    if batch.is_empty() {
        return Err(Error::Dimension("empty batch".into()));
    }
    let outputs = p.output_size();
    for s in batch {
        check_window(p, &s.window)?;
        if s.target.len() != outputs {
            return Err(Error::Dimension(format!(
                "target has {} values, network emits {outputs}",
                s.target.len()
            )));
        }
    }
    let weight = 1.0 / (batch.len() * outputs) as f64;
    let parts: Vec<(f64, LstmParams)> = batch
        .par_iter()
        .map(|s| {
            let (_, tape) = forward_unchecked(p, &s.window);
            let mut g = p.zeros_like();
            let loss = backward(p, &tape, s.target, weight, &mut g);
            (loss, g)
        })
        .collect();
    let mut parts = parts.into_iter();
    let (mut loss, mut grads) = parts.next().expect("batch is non-empty");
    for (l, g) in parts {
        loss += l;
        grads.add_assign(&g);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((loss, grads))
}

/// Mean squared error only.
pub fn loss(p: &LstmParams, batch: &[Sample<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Dimension("empty batch".into()));
    }
    let outputs = p.output_size();
    let mut total = 0.0;
    for s in batch {
        let (out, _) = forward(p, &s.window)?;
        if s.target.len() != outputs {
            return Err(Error::Dimension("target length".into()));
        }
        total += out.iter().zip(s.target).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
    }
    Ok(total / (batch.len() * outputs) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::cell::cell_forward;
    use crate::lstm::params::{init_params, OUTPUTS};

    fn window(len: usize, input: usize, shift: f64) -> Vec<Vec<f64>> {
        (0..len)
            .map(|t| (0..input).map(|j| ((t * 3 + j) as f64 * 0.7 + shift).sin()).collect())
            .collect()
    }

    #[test]
    fn outputs_non_negative() {
        for seed in 0..20 {
            let p = init_params(seed, 4, 5, OUTPUTS);
            let (out, _) = forward(&p, &window(6, 4, seed as f64)).unwrap();
            assert_eq!(out.len(), 22);
            assert!(out.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn zero_network_emits_relu_of_bias() {
        let mut p = LstmParams::zeros(3, 2, OUTPUTS);
        let bias: Vec<f64> = (0..22).map(|k| k as f64 - 10.0).collect();
        p.dense[2].b = bias.clone();
        let (out, _) = forward(&p, &window(5, 3, 0.0)).unwrap();
        let expect: Vec<f64> = bias.iter().map(|b| b.max(0.0)).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn single_step_matches_manual_composition() {
        let p = init_params(9, 3, 4, OUTPUTS);
        let x = vec![0.2, -0.4, 1.1];
        let (out, _) = forward(&p, &[x.clone()]).unwrap();
        let (state, _) = cell_forward(&p, &x, &CellState::zeros(4)).unwrap();
        let mut a = state.h;
        for l in &p.dense {
            a = l.w.mul_vec(&a).iter().zip(&l.b).map(|(z, b)| (z + b).max(0.0)).collect();
        }
        assert_eq!(out, a);
    }

    #[test]
    fn perfect_targets_give_zero_loss_and_gradient() {
        let p = init_params(5, 3, 4, OUTPUTS);
        let w = window(4, 3, 0.5);
        let (out, _) = forward(&p, &w).unwrap();
        let rows: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        let batch = [Sample { window: rows, target: &out }];
        let (l, g) = loss_and_gradients(&p, &batch).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn doubled_residual_quadruples_loss() {
        let p = init_params(5, 3, 4, OUTPUTS);
        let w = window(4, 3, 0.5);
        let (out, _) = forward(&p, &w).unwrap();
        let rows: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        let t1: Vec<f64> = out.iter().enumerate().map(|(k, o)| o + 0.1 + 0.01 * k as f64).collect();
        let t2: Vec<f64> = out.iter().zip(&t1).map(|(o, t)| o + 2.0 * (t - o)).collect();
        let l1 = loss(&p, &[Sample { window: rows.clone(), target: &t1 }]).unwrap();
        let l2 = loss(&p, &[Sample { window: rows, target: &t2 }]).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn batch_composition_does_not_change_outputs() {
        let p = init_params(11, 3, 4, OUTPUTS);
        let a = window(5, 3, 0.0);
        let (alone, _) = forward(&p, &a).unwrap();
        let b = window(5, 3, 2.0);
        let _ = forward(&p, &b).unwrap();
        let (again, _) = forward(&p, &a).unwrap();
        assert_eq!(alone, again);
    }

    #[test]
    fn dimension_errors() {
        let p = init_params(1, 3, 4, OUTPUTS);
        assert!(forward(&p, &Vec::<Vec<f64>>::new()).is_err());
        assert!(forward(&p, &[vec![1.0, 2.0]]).is_err());
        assert!(loss_and_gradients(&p, &[]).is_err());
    }
}
