use crate::rng::Rng;
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector: for each layer the weight matrix
/// (inputs × outputs, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Layer inputs and pre-activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform(±1/√fan_in) initialisation.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Self {
        assert_eq!(params.len(), param_count(sizes), "parameter count");
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, &[f64], usize) {
        let offset: usize = self.sizes[..l + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let w = ArrayView2::from_shape((i, o), &self.params[offset..offset + i * o]).unwrap();
        let b = &self.params[offset + i * o..offset + i * o + o];
        (w, b, offset)
    }

    fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, MlpCache) {
        assert_eq!(x.ncols(), self.input_dim(), "input width");
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.num_layers()),
            outputs: Vec::with_capacity(self.num_layers()),
        };
        let mut h = x.to_owned();
        for l in 0..self.num_layers() {
            let (w, b, _) = self.layer(l);
            let mut z = h.dot(&w);
            for mut row in z.rows_mut() {
                for (v, bb) in row.iter_mut().zip(b) {
                    *v += bb;
                }
            }
            if l + 1 < self.num_layers() {
                z.mapv_inplace(f64::tanh);
            }
            cache.inputs.push(h);
            cache.outputs.push(z.clone());
            h = z;
        }
        (h, cache)
    }

    /// Gradient of Σ d_out ⊙ output with respect to the parameters and the input.
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<'_, f64>) -> (Vec<f64>, Array2<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = d_out.to_owned();
        for l in (0..self.num_layers()).rev() {
            if l + 1 < self.num_layers() {
                // tanh'(z) = 1 − tanh²
                delta.zip_mut_with(&cache.outputs[l], |d, y| *d *= 1.0 - y * y);
            }
            let (w, _, offset) = self.layer(l);
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let dw = cache.inputs[l].t().dot(&delta);
            for (g, v) in grad[offset..offset + i * o].iter_mut().zip(dw.iter()) {
                *g = *v;
            }
            let db = delta.sum_axis(Axis(0));
            for (g, v) in grad[offset + i * o..offset + i * o + o].iter_mut().zip(db.iter()) {
                *g = *v;
            }
            delta = delta.dot(&w.t());
        }
        (grad, delta)
    }
}
