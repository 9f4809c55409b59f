use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Widths of the ReLU layers between the LSTM and the output layer.
pub const DENSE_HIDDEN: [usize; 2] = [15, 31];
/// Outputs: same-day close plus 21 future closes.
pub const OUTPUTS: usize = 22;

/// Fully connected layer, `w` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Matrix::zeros(outputs, inputs),
            b: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.cols()
    }

    pub fn outputs(&self) -> usize {
        self.w.rows()
    }
}

/// All trainable state. Each gate matrix multiplies `[h_{t-1}, x_t]`, so its
/// shape is `hidden × (hidden + input)`.
///
/// The same type doubles as the gradient record and the Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_c: Matrix,
    pub b_c: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    /// `hidden → 15 → 31 → outputs`, ReLU after each.
    pub dense: Vec<DenseLayer>,
}

pub const TENSOR_NAMES: [&str; 14] = [
    "W_f", "b_f", "W_i", "b_i", "W_c", "b_c", "W_o", "b_o", "W_d1", "b_d1", "W_d2", "b_d2",
    "W_out", "b_out",
];

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize, outputs: usize) -> Self {
        let gate = || Matrix::zeros(hidden_size, hidden_size + input_size);
        let mut dense = Vec::new();
        let mut fan_in = hidden_size;
        for width in DENSE_HIDDEN.into_iter().chain([outputs]) {
            dense.push(DenseLayer::zeros(fan_in, width));
            fan_in = width;
        }
        Self {
            input_size,
            hidden_size,
            w_f: gate(),
            b_f: vec![0.0; hidden_size],
            w_i: gate(),
            b_i: vec![0.0; hidden_size],
            w_c: gate(),
            b_c: vec![0.0; hidden_size],
            w_o: gate(),
            b_o: vec![0.0; hidden_size],
            dense,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size, self.hidden_size, self.output_size())
    }

    pub fn output_size(&self) -> usize {
        self.dense.last().map_or(0, DenseLayer::outputs)
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.w_f.as_slice(),
            &self.b_f,
            self.w_i.as_slice(),
            &self.b_i,
            self.w_c.as_slice(),
            &self.b_c,
            self.w_o.as_slice(),
            &self.b_o,
        ];
        for d in &self.dense {
            v.push(d.w.as_slice());
            v.push(&d.b);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            self.w_f.as_mut_slice(),
            &mut self.b_f,
            self.w_i.as_mut_slice(),
            &mut self.b_i,
            self.w_c.as_mut_slice(),
            &mut self.b_c,
            self.w_o.as_mut_slice(),
            &mut self.b_o,
        ];
        for d in &mut self.dense {
            v.push(d.w.as_mut_slice());
            v.push(&mut d.b);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &LstmParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, n) = (self.hidden_size, self.input_size);
        for (name, w, b) in [
            ("W_f", &self.w_f, &self.b_f),
            ("W_i", &self.w_i, &self.b_i),
            ("W_c", &self.w_c, &self.b_c),
            ("W_o", &self.w_o, &self.b_o),
        ] {
            if w.rows() != h || w.cols() != h + n || b.len() != h {
                return Err(Error::Dimension(format!("{name} must be {h}x{}", h + n)));
            }
        }
        let mut fan_in = h;
        for (k, d) in self.dense.iter().enumerate() {
            if d.inputs() != fan_in || d.b.len() != d.outputs() {
                return Err(Error::Dimension(format!("dense layer {k} does not chain")));
            }
            fan_in = d.outputs();
        }
        if self.dense.len() != DENSE_HIDDEN.len() + 1 {
            return Err(Error::Dimension("expected three dense layers".into()));
        }
        Ok(())
    }
}

/// Deterministic initialization from `seed`:
/// gate weights `U(±1/√(hidden+input))`, forget bias 1, other gate biases 0,
/// dense weights He-normal, dense biases 0.
pub fn init_params(seed: u64, input_size: usize, hidden_size: usize, outputs: usize) -> LstmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = LstmParams::zeros(input_size, hidden_size, outputs);
    let bound = 1.0 / ((hidden_size + input_size) as f64).sqrt();
    for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
        for x in w.as_mut_slice() {
            *x = rng.random_range(-bound..bound);
        }
    }
    p.b_f.iter_mut().for_each(|b| *b = 1.0);
    for d in &mut p.dense {
        let he = Normal::new(0.0, (2.0 / d.inputs() as f64).sqrt()).expect("positive std");
        for x in d.w.as_mut_slice() {
            *x = he.sample(&mut rng);
        }
    }
    p
}

// --- JSON form: shape-annotated, row-major tensors named after the gate symbols.

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn matrix(m: &Matrix) -> Self {
        Tensor {
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    fn vector(v: &[f64]) -> Self {
        Tensor {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    fn into_matrix(self, name: &str) -> Result<Matrix> {
        match self.shape[..] {
            [r, c] if r * c == self.data.len() => Ok(Matrix::from_vec(r, c, self.data)),
            _ => Err(Error::Dimension(format!("{name}: bad matrix shape {:?}", self.shape))),
        }
    }

    fn into_vector(self, name: &str) -> Result<Vec<f64>> {
        match self.shape[..] {
            [n] if n == self.data.len() => Ok(self.data),
            _ => Err(Error::Dimension(format!("{name}: bad vector shape {:?}", self.shape))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    input_size: usize,
    hidden_size: usize,
    #[serde(rename = "W_f")]
    w_f: Tensor,
    b_f: Tensor,
    #[serde(rename = "W_i")]
    w_i: Tensor,
    b_i: Tensor,
    #[serde(rename = "W_c")]
    w_c: Tensor,
    b_c: Tensor,
    #[serde(rename = "W_o")]
    w_o: Tensor,
    b_o: Tensor,
    dense: Vec<DenseFile>,
}

#[derive(Serialize, Deserialize)]
struct DenseFile {
    #[serde(rename = "W")]
    w: Tensor,
    b: Tensor,
}

impl Serialize for LstmParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsFile {
            input_size: self.input_size,
            hidden_size: self.hidden_size,
            w_f: Tensor::matrix(&self.w_f),
            b_f: Tensor::vector(&self.b_f),
            w_i: Tensor::matrix(&self.w_i),
            b_i: Tensor::vector(&self.b_i),
            w_c: Tensor::matrix(&self.w_c),
            b_c: Tensor::vector(&self.b_c),
            w_o: Tensor::matrix(&self.w_o),
            b_o: Tensor::vector(&self.b_o),
            dense: self
                .dense
                .iter()
                .map(|d| DenseFile {
                    w: Tensor::matrix(&d.w),
                    b: Tensor::vector(&d.b),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LstmParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = ParamsFile::deserialize(d)?;
        let build = || -> Result<LstmParams> {
            let p = LstmParams {
                input_size: f.input_size,
                hidden_size: f.hidden_size,
                w_f: f.w_f.into_matrix("W_f")?,
                b_f: f.b_f.into_vector("b_f")?,
                w_i: f.w_i.into_matrix("W_i")?,
                b_i: f.b_i.into_vector("b_i")?,
                w_c: f.w_c.into_matrix("W_c")?,
                b_c: f.b_c.into_vector("b_c")?,
                w_o: f.w_o.into_matrix("W_o")?,
                b_o: f.b_o.into_vector("b_o")?,
                dense: f
                    .dense
                    .into_iter()
                    .enumerate()
                    .map(|(k, l)| {
                        Ok(DenseLayer {
                            w: l.w.into_matrix(&format!("dense[{k}].W"))?,
                            b: l.b.into_vector(&format!("dense[{k}].b"))?,
                        })
                    })
                    .collect::<Result<_>>()?,
            };
            p.check_shapes()?;
            Ok(p)
        };
        build().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_init_is_deterministic() {
        let a = init_params(42, 12, 7, OUTPUTS);
        let b = init_params(42, 12, 7, OUTPUTS);
        assert_eq!(a, b);
        let c = init_params(43, 12, 7, OUTPUTS);
        assert_ne!(a, c);
    }

    #[test]
    fn shapes() {
        let p = init_params(1, 12, 7, OUTPUTS);
        for w in [&p.w_f, &p.w_i, &p.w_c, &p.w_o] {
            assert_eq!((w.rows(), w.cols()), (7, 19));
        }
        let dims: Vec<(usize, usize)> = p.dense.iter().map(|d| (d.inputs(), d.outputs())).collect();
        assert_eq!(dims, vec![(7, 15), (15, 31), (31, 22)]);
        assert!(p.b_f.iter().all(|b| *b == 1.0));
        assert!(p.b_i.iter().chain(&p.b_c).chain(&p.b_o).all(|b| *b == 0.0));
        let bound = 1.0 / 19f64.sqrt();
        assert!(p.w_c.as_slice().iter().all(|w| w.abs() <= bound));
        assert!(p.all_finite());
        assert_eq!(p.tensors().len(), TENSOR_NAMES.len());
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let p = init_params(3, 2, 3, OUTPUTS);
        let text = serde_json::to_string(&p).unwrap();
        for key in ["\"W_f\"", "\"b_f\"", "\"W_o\"", "\"shape\":[3,5]", "\"dense\""] {
            assert!(text.contains(key), "{key}");
        }
        let back: LstmParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let broken = text.replacen("\"shape\":[3,5]", "\"shape\":[5,3]", 1);
        assert!(serde_json::from_str::<LstmParams>(&broken).is_err());
    }
}
