//! Small feedforward networks with hand-rolled backprop and Adam.
//!
//! The per-bus surrogates are tiny (tens of neurons), so a dense,
//! allocation-light implementation beats pulling in a framework; it also
//! keeps training bit-reproducible from a seed.

use crate::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    /// Identity on hidden layers; mainly for analytic test cases.
    Linear,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Activation> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean over the batch of the squared-error sum across outputs.
    Mse,
    /// Softmax over the outputs, mean cross-entropy; targets are class ids.
    SoftmaxCrossEntropy,
}

/// Fully connected net: linear output layer, `activation` on hidden layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// Layer widths: input, hidden..., output.
    pub sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] × sizes[l]`.
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Gradient (or moment) storage with the same shapes as an [`Mlp`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Grads {
        Grads {
            weights: net
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

impl Mlp {
    /// He-style initialization scaled by fan-in; deterministic in `seed`.
    pub fn new_random(sizes: &[usize], activation: Activation, seed: u64) -> Mlp {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            weights.push(DenseMatrix::from_fn(fan_out, fan_in, |_, _| {
                rng.gen_range(-1.0..1.0) * scale
            }));
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass; output layer is linear.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let mut z = self.weights[l].matvec(&a);
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            if l + 1 < self.n_layers() {
                for zi in z.iter_mut() {
                    *zi = self.activation.apply(*zi);
                }
            }
            a = z;
        }
        a
    }

    /// Pre-activations per layer for one input; used by backprop.
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::new();
        for l in 0..self.n_layers() {
            let mut z = self.weights[l].matvec(acts.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            pre.push(z.clone());
            if l + 1 < self.n_layers() {
                for zi in z.iter_mut() {
                    *zi = self.activation.apply(*zi);
                }
            }
            acts.push(z);
        }
        (acts, pre)
    }

    /// Loss and parameter gradients for one mini-batch.
    /// For [`Loss::Mse`] each target is a vector of output width; for
    /// [`Loss::SoftmaxCrossEntropy`] each target is a one-hot class index
    /// encoded as a single-element slice.
    pub fn loss_and_grads(&self, xs: &[&[f64]], targets: &[&[f64]], loss: Loss) -> (f64, Grads) {
        assert_eq!(xs.len(), targets.len());
        let batch = xs.len() as f64;
        let mut grads = Grads::zeros_like(self);
        let mut total_loss = 0.0;
        for (x, t) in xs.iter().zip(targets) {
            let (acts, pre) = self.forward_trace(x);
            let out = acts.last().unwrap();
            // output-layer error signal dL/dz_out
            let mut delta: Vec<f64> = match loss {
                Loss::Mse => {
                    let mut d = Vec::with_capacity(out.len());
                    for (o, ti) in out.iter().zip(t.iter()) {
                        total_loss += (o - ti).powi(2) / batch;
                        d.push(2.0 * (o - ti) / batch);
                    }
                    d
                }
                Loss::SoftmaxCrossEntropy => {
                    let class = t[0] as usize;
                    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = out.iter().map(|o| (o - max).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    let p: Vec<f64> = exps.iter().map(|e| e / sum).collect();
                    total_loss += -(p[class].max(1e-300)).ln() / batch;
                    p.iter()
                        .enumerate()
                        .map(|(i, pi)| (pi - if i == class { 1.0 } else { 0.0 }) / batch)
                        .collect()
                }
            };
            for l in (0..self.n_layers()).rev() {
                let a_prev = &acts[l];
                for (i, &di) in delta.iter().enumerate() {
                    grads.biases[l][i] += di;
                    for (j, &aj) in a_prev.iter().enumerate() {
                        grads.weights[l].add_to(i, j, di * aj);
                    }
                }
                if l == 0 {
                    break;
                }
                // propagate through W and the previous layer's activation
                let mut prev = vec![0.0; self.sizes[l]];
                for (i, &di) in delta.iter().enumerate() {
                    let row = self.weights[l].row(i);
                    for (j, p) in prev.iter_mut().enumerate() {
                        *p += di * row[j];
                    }
                }
                for (j, p) in prev.iter_mut().enumerate() {
                    *p *= self.activation.derivative(pre[l - 1][j]);
                }
                delta = prev;
            }
        }
        (total_loss, grads)
    }
}

/// Adam optimizer with decoupled L2 applied to weights only.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads, weight_decay: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for l in 0..net.n_layers() {
            let rows = net.weights[l].rows();
            let cols = net.weights[l].cols();
            for i in 0..rows {
                for j in 0..cols {
                    let g = grads.weights[l].get(i, j) + weight_decay * net.weights[l].get(i, j);
                    let m = self.beta1 * self.m.weights[l].get(i, j) + (1.0 - self.beta1) * g;
                    let v = self.beta2 * self.v.weights[l].get(i, j) + (1.0 - self.beta2) * g * g;
                    self.m.weights[l].set(i, j, m);
                    self.v.weights[l].set(i, j, v);
                    let update = self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                    net.weights[l].add_to(i, j, -update);
                }
            }
            for i in 0..net.biases[l].len() {
                let g = grads.biases[l][i];
                let m = self.beta1 * self.m.biases[l][i] + (1.0 - self.beta1) * g;
                let v = self.beta2 * self.v.biases[l][i] + (1.0 - self.beta2) * g * g;
                self.m.biases[l][i] = m;
                self.v.biases[l][i] = v;
                net.biases[l][i] -= self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// Compare analytic gradients against central finite differences (h = 1e-5)
/// over every parameter; returns the max relative error.
pub fn gradient_check(net: &Mlp, xs: &[&[f64]], targets: &[&[f64]], loss: Loss) -> f64 {
    let h = 1e-5;
    let (_, analytic) = net.loss_and_grads(xs, targets, loss);
    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    let mut check = |a: f64, n: f64| {
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    };
    for l in 0..net.n_layers() {
        for i in 0..net.weights[l].rows() {
            for j in 0..net.weights[l].cols() {
                let orig = net.weights[l].get(i, j);
                probe.weights[l].set(i, j, orig + h);
                let (lp, _) = probe.loss_and_grads(xs, targets, loss);
                probe.weights[l].set(i, j, orig - h);
                let (lm, _) = probe.loss_and_grads(xs, targets, loss);
                probe.weights[l].set(i, j, orig);
                check(analytic.weights[l].get(i, j), (lp - lm) / (2.0 * h));
            }
        }
        for i in 0..net.biases[l].len() {
            let orig = net.biases[l][i];
            probe.biases[l][i] = orig + h;
            let (lp, _) = probe.loss_and_grads(xs, targets, loss);
            probe.biases[l][i] = orig - h;
            let (lm, _) = probe.loss_and_grads(xs, targets, loss);
            probe.biases[l][i] = orig;
            check(analytic.biases[l][i], (lp - lm) / (2.0 * h));
        }
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch<'a>(rows: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
        rows.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn linear_single_layer_gradient_is_exact() {
        // single linear layer + MSE is a quadratic: analytic and numeric
        // gradients agree to rounding
        let net = Mlp::new_random(&[3, 1], Activation::Linear, 7);
        let xs = vec![vec![0.3, -1.2, 0.8], vec![1.0, 0.5, -0.4]];
        let ts = vec![vec![0.7], vec![-0.2]];
        let err = gradient_check(&net, &batch(&xs), &batch(&ts), Loss::Mse);
        assert!(err < 1e-9, "max relative error {err}");
    }

    #[test]
    fn tanh_three_hidden_layers_check() {
        let net = Mlp::new_random(&[4, 8, 6, 5, 2], Activation::Tanh, 11);
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|k| (0..4).map(|j| ((k * 7 + j * 3) as f64 * 0.37).sin()).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..6)
            .map(|k| vec![(k as f64 * 0.21).cos(), (k as f64 * 0.11).sin()])
            .collect();
        let err = gradient_check(&net, &batch(&xs), &batch(&ts), Loss::Mse);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn relu_check_off_the_kinks() {
        let net = Mlp::new_random(&[3, 10, 10, 1], Activation::Relu, 23);
        // jitter inputs until no hidden pre-activation sits within 1e-3 of
        // zero, so finite differences never cross a kink
        let mut xs = Vec::new();
        let mut attempt = 0.0f64;
        while xs.len() < 5 {
            let x: Vec<f64> = (0..3).map(|j| (attempt + j as f64 * 1.71).sin() * 2.0).collect();
            attempt += 0.917;
            let mut clear = true;
            let mut a = x.clone();
            for l in 0..net.n_layers() - 1 {
                let mut z = net.weights[l].matvec(&a);
                for (zi, bi) in z.iter_mut().zip(&net.biases[l]) {
                    *zi += bi;
                }
                if z.iter().any(|zi| zi.abs() < 1e-3) {
                    clear = false;
                    break;
                }
                a = z.iter().map(|zi| zi.max(0.0)).collect();
            }
            if clear {
                xs.push(x);
            }
        }
        let ts: Vec<Vec<f64>> = (0..xs.len()).map(|k| vec![k as f64 * 0.4 - 1.0]).collect();
        let err = gradient_check(&net, &batch(&xs), &batch(&ts), Loss::Mse);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        let net = Mlp::new_random(&[4, 6, 3], Activation::Tanh, 31);
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|k| (0..4).map(|j| ((k + j) as f64 * 0.53).cos()).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..6).map(|k| vec![(k % 3) as f64]).collect();
        let err = gradient_check(&net, &batch(&xs), &batch(&ts), Loss::SoftmaxCrossEntropy);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn adam_fits_a_line() {
        // y = 2x − 1 learned by a 1-16-1 relu net
        let mut net = Mlp::new_random(&[1, 16, 1], Activation::Relu, 3);
        let mut opt = Adam::new(&net, 1e-2);
        let xs: Vec<Vec<f64>> = (0..64).map(|k| vec![k as f64 / 32.0 - 1.0]).collect();
        let ts: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0] - 1.0]).collect();
        let xref = batch(&xs);
        let tref = batch(&ts);
        let mut final_loss = f64::INFINITY;
        for _ in 0..2000 {
            let (loss, grads) = net.loss_and_grads(&xref, &tref, Loss::Mse);
            opt.step(&mut net, &grads, 0.0);
            final_loss = loss;
        }
        assert!(final_loss < 1e-4, "loss {final_loss}");
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        let a = Mlp::new_random(&[5, 9, 2], Activation::Relu, 99);
        let b = Mlp::new_random(&[5, 9, 2], Activation::Relu, 99);
        for l in 0..a.n_layers() {
            assert_eq!(a.weights[l].as_slice(), b.weights[l].as_slice());
        }
        let c = Mlp::new_random(&[5, 9, 2], Activation::Relu, 100);
        assert_ne!(a.weights[0].as_slice(), c.weights[0].as_slice());
    }
}
