//! Dense multilayer perceptron with ReLU hidden activations and a choice of
//! output heads. Parameters live in one flat buffer so that optimizers,
//! target-network averaging and checkpointing can treat every network alike.
//!
//! Batches are row-major: `batch` rows of `input_dim` features each.

use rand::Rng;

use crate::error::{check_dim, Error, Result};

/// Lower bound of the Gaussian head's log standard deviation.
pub const LOG_STD_MIN: f64 = -10.0;
/// Upper bound of the Gaussian head's log standard deviation.
pub const LOG_STD_MAX: f64 = 2.0;

/// Output transformation applied after the last affine layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Raw affine output.
    Identity,
    /// `lo + (tanh(z) + 1) / 2 * (hi - lo)` per output dimension.
    Tanh { lo: Vec<f64>, hi: Vec<f64> },
    /// Split into `(mean, log_std)` halves; `log_std` is squashed smoothly
    /// into `[LOG_STD_MIN, LOG_STD_MAX]`.
    Gaussian,
}

/// A feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
    head: Head,
}

/// Activations recorded by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    /// `acts[0]` is the input, `acts[l]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Raw output of the last affine layer (before the head).
    raw: Vec<f64>,
    output: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Which hidden units were active (positive), layer by layer. Useful for
    /// telling a ReLU kink apart from a gradient bug in finite-difference checks.
    pub fn active_units(&self) -> Vec<bool> {
        self.acts[1..].iter().flatten().map(|a| *a > 0.0).collect()
    }
}

/// Parameter and input gradients from [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Mlp {
    /// Builds a network `input -> hidden... -> out` with fan-in scaled
    /// uniform initialization. For a Gaussian head `out` is the action
    /// dimension and the last layer emits `2 * out` values.
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        out: usize,
        head: Head,
        rng: &mut R,
    ) -> Result<Self> {
        if input == 0 || out == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig(
                "network dimensions must be positive".into(),
            ));
        }
        if let Head::Tanh { lo, hi } = &head {
            check_dim("tanh head lower bounds", out, lo.len())?;
            check_dim("tanh head upper bounds", out, hi.len())?;
            if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                return Err(Error::InvalidConfig(
                    "tanh head range must satisfy lo < hi".into(),
                ));
            }
        }
        let last = if head == Head::Gaussian { 2 * out } else { out };
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(last);

        let total: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = Vec::with_capacity(total);
        let layers = dims.len() - 1;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l + 1 == layers {
                // small final layer keeps initial outputs near the head's centre
                bound *= 0.1;
            }
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self { dims, params, head })
    }

    /// Builds a network from explicit layer sizes and parameters.
    pub fn from_parts(dims: Vec<usize>, params: Vec<f64>, head: Head) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig(
                "network needs at least one layer".into(),
            ));
        }
        let total: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        check_dim("network parameters", total, params.len())?;
        let last = *dims.last().unwrap();
        match &head {
            Head::Gaussian if last % 2 != 0 => {
                return Err(Error::InvalidConfig(
                    "gaussian head needs an even output".into(),
                ))
            }
            Head::Tanh { lo, hi } => {
                check_dim("tanh head lower bounds", last, lo.len())?;
                check_dim("tanh head upper bounds", last, hi.len())?;
            }
            _ => {}
        }
        Ok(Self { dims, params, head })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Width of the forward output (for a Gaussian head, mean and log-std).
    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Order-sensitive FNV-1a digest of the parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset, fan_in, fan_out); weights are fan_out x fan_in, then bias
        let mut off = 0;
        self.dims.windows(2).map(move |w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    pub fn forward(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input, batch)?.output)
    }

    /// Forward pass that keeps the activations needed by [`Mlp::backward`].
    pub fn forward_cached(&self, input: &[f64], batch: usize) -> Result<Tape> {
        check_dim("network input", batch * self.input_dim(), input.len())?;
        let n_layers = self.dims.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        acts.push(input.to_vec());
        let mut raw = Vec::new();
        for (l, (off, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let x = acts.last().unwrap();
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let mut z = vec![0.0; batch * fan_out];
            for row in z.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b);
            }
            // z += x * w^T
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    fan_in,
                    fan_out,
                    1.0,
                    x.as_ptr(),
                    fan_in as isize,
                    1,
                    w.as_ptr(),
                    1,
                    fan_in as isize,
                    1.0,
                    z.as_mut_ptr(),
                    fan_out as isize,
                    1,
                );
            }
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                acts.push(z);
            } else {
                raw = z;
            }
        }
        let output = self.apply_head(&raw);
        Ok(Tape {
            batch,
            acts,
            raw,
            output,
        })
    }

    fn apply_head(&self, raw: &[f64]) -> Vec<f64> {
        let width = self.output_dim();
        match &self.head {
            Head::Identity => raw.to_vec(),
            Head::Tanh { lo, hi } => raw
                .chunks_exact(width)
                .flat_map(|row| {
                    row.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(z, (l, h))| l + 0.5 * (z.tanh() + 1.0) * (h - l))
                })
                .collect(),
            Head::Gaussian => {
                let d = width / 2;
                let mut out = raw.to_vec();
                for row in out.chunks_exact_mut(width) {
                    for s in &mut row[d..] {
                        *s = squash_log_std(*s);
                    }
                }
                out
            }
        }
    }

    /// Reverse-mode gradients of `sum(upstream * output)` with respect to
    /// parameters and inputs.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<Gradients> {
        self.backward_impl(tape, upstream, true)
    }

    /// Gradient of `sum(upstream * output)` with respect to the input only.
    pub fn input_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        Ok(self.backward_impl(tape, upstream, false)?.input)
    }

    fn backward_impl(&self, tape: &Tape, upstream: &[f64], want_params: bool) -> Result<Gradients> {
        let batch = tape.batch;
        let width = self.output_dim();
        check_dim("upstream gradient", batch * width, upstream.len())?;

        // gradient w.r.t. the raw affine output
        let mut delta: Vec<f64> = match &self.head {
            Head::Identity => upstream.to_vec(),
            Head::Tanh { lo, hi } => {
                let mut d = upstream.to_vec();
                for (row, zrow) in d.chunks_exact_mut(width).zip(tape.raw.chunks_exact(width)) {
                    for j in 0..width {
                        let t = zrow[j].tanh();
                        row[j] *= 0.5 * (1.0 - t * t) * (hi[j] - lo[j]);
                    }
                }
                d
            }
            Head::Gaussian => {
                let half = width / 2;
                let mut d = upstream.to_vec();
                for (row, zrow) in d.chunks_exact_mut(width).zip(tape.raw.chunks_exact(width)) {
                    for j in half..width {
                        let t = zrow[j].tanh();
                        row[j] *= 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - t * t);
                    }
                }
                d
            }
        };

        let mut grads = if want_params {
            vec![0.0; self.params.len()]
        } else {
            Vec::new()
        };
        let layers: Vec<_> = self.layer_offsets().collect();
        let mut input_grad = Vec::new();
        for (l, &(off, fan_in, fan_out)) in layers.iter().enumerate().rev() {
            let x = &tape.acts[l];
            if want_params {
                let (gw, gb) =
                    grads[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                // dW = delta^T * x
                unsafe {
                    matrixmultiply::dgemm(
                        fan_out,
                        batch,
                        fan_in,
                        1.0,
                        delta.as_ptr(),
                        1,
                        fan_out as isize,
                        x.as_ptr(),
                        fan_in as isize,
                        1,
                        0.0,
                        gw.as_mut_ptr(),
                        fan_in as isize,
                        1,
                    );
                }
                for row in delta.chunks_exact(fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            // dx = delta * W
            let w = &self.params[off..off + fan_in * fan_out];
            let mut dx = vec![0.0; batch * fan_in];
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    fan_out,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    fan_out as isize,
                    1,
                    w.as_ptr(),
                    fan_in as isize,
                    1,
                    0.0,
                    dx.as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            if l > 0 {
                // through the ReLU that produced x
                for (g, a) in dx.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = dx;
            } else {
                input_grad = dx;
            }
        }
        Ok(Gradients {
            params: grads,
            input: input_grad,
        })
    }
}

/// Smooth map from a raw activation into `[LOG_STD_MIN, LOG_STD_MAX]`.
pub fn squash_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_final_layer_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(3, &[8, 8], 2, Head::Identity, &mut rng).unwrap();
        let dims = net.dims().to_vec();
        let last_len = dims[dims.len() - 2] * dims[dims.len() - 1] + dims[dims.len() - 1];
        let n = net.num_params();
        for p in &mut net.params_mut()[n - last_len..] {
            *p = 0.0;
        }
        let out = net.forward(&[0.3, -2.0, 5.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_two_two_one() {
        // x -> relu(W1 x + b1) -> w2 . h + b2
        let dims = vec![2, 2, 1];
        let params = vec![
            1.0, -1.0, // W1 row 0
            0.5, 2.0, // W1 row 1
            0.1, -0.2, // b1
            3.0, -1.0, // W2
            0.25, // b2
        ];
        let net = Mlp::from_parts(dims, params, Head::Identity).unwrap();
        let x = [0.4, 0.3];
        // h0 = relu(0.4 - 0.3 + 0.1) = 0.2 ; h1 = relu(0.2 + 0.6 - 0.2) = 0.6
        // y = 3*0.2 - 0.6 + 0.25 = 0.25
        let y = net.forward(&x, 1).unwrap();
        assert!((y[0] - 0.25).abs() < 1e-12);
        let x = [-1.0, 0.5];
        // h0 = relu(-1 - 0.5 + 0.1) = 0 ; h1 = relu(-0.5 + 1.0 - 0.2) = 0.3
        // y = -0.3 + 0.25 = -0.05
        let y = net.forward(&x, 1).unwrap();
        assert!((y[0] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn tanh_head_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lo = vec![-0.5, 2.0];
        let hi = vec![0.25, 3.0];
        let net = Mlp::new(
            4,
            &[16, 16],
            2,
            Head::Tanh {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            &mut rng,
        )
        .unwrap();
        // scale up the weights so that the head saturates on some inputs
        let mut net = net;
        for p in net.params_mut() {
            *p *= 20.0;
        }
        let input: Vec<f64> = (0..4 * 10_000)
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        let out = net.forward(&input, 10_000).unwrap();
        for row in out.chunks_exact(2) {
            for j in 0..2 {
                assert!(row[j] >= lo[j] && row[j] <= hi[j], "{} outside", row[j]);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(5, &[8], 3, Head::Gaussian, &mut rng).unwrap();
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let tape = net.forward_cached(&x, 2).unwrap();
        let g = net.backward(&tape, &vec![0.0; 12]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_matches_least_squares_gradient() {
        // single affine layer, loss = 0.5 * sum (w.x + b - y)^2
        let net = Mlp::from_parts(vec![3, 1], vec![0.5, -1.0, 2.0, 0.3], Head::Identity).unwrap();
        let xs = [1.0, 2.0, -1.0, 0.5, 0.0, 4.0];
        let ys = [1.0, -2.0];
        let tape = net.forward_cached(&xs, 2).unwrap();
        let resid: Vec<f64> = tape.output().iter().zip(ys).map(|(p, y)| p - y).collect();
        let g = net.backward(&tape, &resid).unwrap();
        // closed form: dW = sum_i r_i x_i, db = sum_i r_i
        let r0 = 0.5 * 1.0 - 2.0 - 2.0 + 0.3 - 1.0;
        let r1 = 0.5 * 0.5 + 0.0 + 8.0 + 0.3 + 2.0;
        let expected = [
            r0 * 1.0 + r1 * 0.5,
            r0 * 2.0 + r1 * 0.0,
            r0 * -1.0 + r1 * 4.0,
            r0 + r1,
        ];
        for (a, e) in g.params.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(3, &[4], 1, Head::Identity, &mut rng).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0], 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
