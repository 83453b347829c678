use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Fully connected network with tanh hidden activations and a linear output
/// layer. Parameters are stored densely; gradients are mirror-shaped and
/// produced by hand-written backpropagation, which keeps them exact to the
/// arithmetic (the finite-difference tests hold to ~1e-7 relative).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

/// Layer inputs captured during a forward pass, consumed by backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// xs[l] is the input to layer l (post-activation of layer l-1).
    xs: Vec<DVector<f64>>,
    /// Output of the final linear layer.
    out: DVector<f64>,
}

impl MlpCache {
    pub fn out(&self) -> &DVector<f64> {
        &self.out
    }
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
}

impl MlpGrads {
    pub fn scale(&mut self, s: f64) {
        for m in &mut self.w {
            *m *= s;
        }
        for v in &mut self.b {
            *v *= s;
        }
    }
}

impl Mlp {
    /// Xavier-uniform initialization; the output layer is additionally
    /// scaled by `out_scale` (small values keep an untrained policy close
    /// to its distribution's center).
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R, out_scale: f64) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut w = Vec::new();
        let mut b = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let scale = if l == sizes.len() - 2 { out_scale } else { 1.0 };
            w.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                scale * rng.random_range(-limit..limit)
            }));
            b.push(DVector::zeros(fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            w,
            b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes nonempty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        self.forward_cached(x).out
    }

    pub fn forward_cached(&self, x: &DVector<f64>) -> MlpCache {
        assert_eq!(x.len(), self.sizes[0], "input dimension");
        let n_layers = self.w.len();
        let mut xs = Vec::with_capacity(n_layers);
        let mut a = x.clone();
        for l in 0..n_layers {
            xs.push(a.clone());
            let mut z = &self.w[l] * &a + &self.b[l];
            if l + 1 < n_layers {
                z.apply(|v| *v = v.tanh());
            }
            a = z;
        }
        MlpCache { xs, out: a }
    }

    /// Backpropagates d(loss)/d(output) through the cached pass,
    /// accumulating parameter gradients into `grads`.
    pub fn backward(&self, cache: &MlpCache, dout: &DVector<f64>, grads: &mut MlpGrads) {
        let n_layers = self.w.len();
        let mut dz = dout.clone();
        for l in (0..n_layers).rev() {
            // dz is the gradient at the pre-activation of layer l's output
            // (the output itself for the final linear layer).
            grads.w[l] += &dz * cache.xs[l].transpose();
            grads.b[l] += &dz;
            if l > 0 {
                let mut dx = self.w[l].transpose() * &dz;
                // xs[l] is tanh(z_{l-1}); dtanh = 1 - tanh^2.
                for (d, a) in dx.iter_mut().zip(cache.xs[l].iter()) {
                    *d *= 1.0 - a * a;
                }
                dz = dx;
            }
        }
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            w: self.w.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect(),
            b: self.b.iter().map(|v| DVector::zeros(v.len())).collect(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.iter().map(|m| m.len()).sum::<usize>() + self.b.iter().map(|v| v.len()).sum::<usize>()
    }

    /// Flattens parameters in a fixed order (per layer: weights
    /// column-major, then biases). Gradient structures flatten identically.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in 0..self.w.len() {
            out.extend(self.w[l].iter());
            out.extend(self.b[l].iter());
        }
    }

    pub fn unflatten_from(&mut self, data: &[f64]) -> usize {
        let mut k = 0;
        for l in 0..self.w.len() {
            for v in self.w[l].iter_mut() {
                *v = data[k];
                k += 1;
            }
            for v in self.b[l].iter_mut() {
                *v = data[k];
                k += 1;
            }
        }
        k
    }

    pub fn grads_flatten_into(grads: &MlpGrads, out: &mut Vec<f64>) {
        for l in 0..grads.w.len() {
            out.extend(grads.w[l].iter());
            out.extend(grads.b[l].iter());
        }
    }

    /// Applies `param += step` elementwise from a flat step vector;
    /// returns how many entries were consumed.
    pub fn apply_flat_step(&mut self, step: &[f64]) -> usize {
        let mut k = 0;
        for l in 0..self.w.len() {
            for v in self.w[l].iter_mut() {
                *v += step[k];
                k += 1;
            }
            for v in self.b[l].iter_mut() {
                *v += step[k];
                k += 1;
            }
        }
        k
    }

    pub fn zero_params(&mut self) {
        for m in &mut self.w {
            m.fill(0.0);
        }
        for v in &mut self.b {
            v.fill(0.0);
        }
    }
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update: fills `step_out` with the parameter increments for the
    /// given flat gradient.
    pub fn step(&mut self, lr: f64, grads: &[f64], step_out: &mut Vec<f64>) {
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        step_out.clear();
        step_out.reserve(grads.len());
        for i in 0..grads.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            step_out.push(-lr * mh / (vh.sqrt() + self.eps));
        }
    }
}
