//! Layer parameters and the item-encoder building blocks: 1-D convolution,
//! batch normalization, ReLU, strided and global max pooling.
//!
//! The numeric kernels live on the [`Tape`](crate::tape::Tape); this module
//! owns parameter containers, initialization, the short-item padding rule,
//! and the batch-mode plumbing for batch normalization.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Forward-pass mode. Train mode uses batch statistics in batch
/// normalization and updates running statistics; eval mode uses the stored
/// running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Weights of one 1-D convolution: `kernels` is `[C_out, C_in, k]`, `bias`
/// is `[C_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl Conv1dParams {
    /// Glorot-uniform kernels in `[-sqrt(6/(fan_in+fan_out)), +...]` with
    /// `fan = channels * kernel width`; zero bias. Deterministic per rng
    /// state.
    pub fn init(c_in: usize, c_out: usize, k: usize, rng: &mut ChaCha20Rng) -> Self {
        let fan_in = (c_in * k) as f32;
        let fan_out = (c_out * k) as f32;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let data: Vec<f32> = (0..c_out * c_in * k)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Conv1dParams {
            kernels: Tensor::new(vec![c_out, c_in, k], data).expect("kernel shape"),
            bias: Tensor::zeros(vec![c_out]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_width(&self) -> usize {
        self.kernels.shape()[2]
    }
}

/// Per-channel batch-norm parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f32,
    pub momentum: f32,
}

impl BatchNormParams {
    /// gamma = 1, beta = 0, running stats (0, 1).
    pub fn init(channels: usize, epsilon: f32, momentum: f32) -> Self {
        BatchNormParams {
            gamma: Tensor::filled(vec![channels], 1.0),
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::filled(vec![channels], 1.0),
            epsilon,
            momentum,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Exponential moving average: `running = momentum * running +
    /// (1 - momentum) * batch`.
    pub fn update_running(&mut self, batch_mean: &[f32], batch_var: &[f32]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(batch_mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(batch_var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }
}

/// Tape handles for one batch-norm layer's learnable parameters.
#[derive(Debug, Clone, Copy)]
pub struct BatchNormVars {
    pub gamma: Var,
    pub beta: Var,
}

pub fn bind_batchnorm(tape: &mut Tape, p: &BatchNormParams) -> BatchNormVars {
    BatchNormVars {
        gamma: tape.leaf(p.gamma.clone()),
        beta: tape.leaf(p.beta.clone()),
    }
}

/// Tape handles for one convolution's learnable parameters.
#[derive(Debug, Clone, Copy)]
pub struct Conv1dVars {
    pub kernels: Var,
    pub bias: Var,
}

pub fn bind_conv1d(tape: &mut Tape, p: &Conv1dParams) -> Conv1dVars {
    Conv1dVars {
        kernels: tape.leaf(p.kernels.clone()),
        bias: tape.leaf(p.bias.clone()),
    }
}

/// Applies batch normalization to a batch of `[C, L_i]` maps.
///
/// In train mode the maps are normalized jointly, per channel over all
/// positions of the whole batch, and `params`'s running statistics are
/// updated in place. In eval mode each map is normalized independently with
/// the stored running statistics.
pub fn batchnorm(
    tape: &mut Tape,
    xs: &[Var],
    vars: BatchNormVars,
    params: &mut BatchNormParams,
    mode: Mode,
) -> Result<Vec<Var>> {
    let (outs, stats) = batchnorm_with_stats(tape, xs, vars, params, mode)?;
    if let Some((mean, var)) = stats {
        params.update_running(&mean, &var);
    }
    Ok(outs)
}

/// Like [`batchnorm`] but leaves `params` untouched, returning the batch
/// statistics (train mode) for the caller to apply.
pub fn batchnorm_with_stats(
    tape: &mut Tape,
    xs: &[Var],
    vars: BatchNormVars,
    params: &BatchNormParams,
    mode: Mode,
) -> Result<(Vec<Var>, Option<(Vec<f32>, Vec<f32>)>)> {
    if xs.is_empty() {
        return Err(Error::Contract("batchnorm: empty batch".into()));
    }
    match mode {
        Mode::Train => {
            let lens: Vec<usize> = xs.iter().map(|&x| tape.value(x).shape()[1]).collect();
            let cat = tape.concat_cols(xs)?;
            let (normed, mean, var) =
                tape.batchnorm_train(cat, vars.gamma, vars.beta, params.epsilon)?;
            let mut outs = Vec::with_capacity(xs.len());
            let mut offset = 0usize;
            for &l in &lens {
                outs.push(tape.slice_cols(normed, offset, l)?);
                offset += l;
            }
            Ok((outs, Some((mean, var))))
        }
        Mode::Eval => {
            let mut outs = Vec::with_capacity(xs.len());
            for &x in xs {
                outs.push(tape.batchnorm_eval(
                    x,
                    vars.gamma,
                    vars.beta,
                    params.running_mean.data(),
                    params.running_var.data(),
                    params.epsilon,
                )?);
            }
            Ok((outs, None))
        }
    }
}

/// Shortest item length the two-convolution pipeline can encode: after the
/// first convolution (width `k1`) and a size-2/stride-2 max pool, the second
/// convolution (width `k2`) still needs `k2` positions.
pub fn min_viable_item_len(k1: usize, k2: usize) -> usize {
    k1 - 1 + 2 * k2
}

/// Right-pads a `[d, L]` item matrix with zero columns up to `min_len`.
/// Matrices already long enough are returned unchanged.
pub fn pad_item_columns(mat: &Tensor, min_len: usize) -> Tensor {
    let (d, l) = (mat.shape()[0], mat.shape()[1]);
    if l >= min_len {
        return mat.clone();
    }
    let mut out = vec![0.0f32; d * min_len];
    for r in 0..d {
        out[r * min_len..r * min_len + l].copy_from_slice(&mat.data()[r * l..(r + 1) * l]);
    }
    Tensor::new(vec![d, min_len], out).expect("padded shape")
}

/// Seeded rng for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Conv1dParams::init(4, 3, 2, &mut init_rng(11));
        let b = Conv1dParams::init(4, 3, 2, &mut init_rng(11));
        assert_eq!(a, b);
        let c = Conv1dParams::init(4, 3, 2, &mut init_rng(12));
        assert_ne!(a, c);
    }

    #[test]
    fn init_gamma_is_ones_and_bias_zero() {
        let bn = BatchNormParams::init(5, 1e-5, 0.9);
        assert!(bn.gamma.data().iter().all(|&v| v == 1.0));
        assert!(bn.beta.data().iter().all(|&v| v == 0.0));
        assert!(bn.running_var.data().iter().all(|&v| v == 1.0));

        let conv = Conv1dParams::init(3, 2, 3, &mut init_rng(0));
        assert!(conv.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_kernel_mean_is_near_zero() {
        // 10^4 uniform draws on [-a, a]: |sample mean| <= 3 * (a/sqrt(3)) / 100.
        let p = Conv1dParams::init(10, 10, 100, &mut init_rng(42));
        assert_eq!(p.kernels.len(), 10_000);
        let a = (6.0f64 / (1000.0 + 1000.0)).sqrt();
        let mean: f64 = p.kernels.data().iter().map(|&v| v as f64).sum::<f64>() / 10_000.0;
        let bound = 3.0 * (a / 3.0f64.sqrt()) / 100.0;
        assert!(mean.abs() <= bound, "mean {mean}, bound {bound}");
    }

    #[test]
    fn padding_extends_short_items_with_zero_columns() {
        let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = pad_item_columns(&m, 4);
        assert_eq!(p.shape(), &[2, 4]);
        assert_eq!(p.data(), &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0]);
        // Long enough already: unchanged.
        assert_eq!(pad_item_columns(&m, 2), m);
    }

    #[test]
    fn min_viable_len_feeds_second_conv_exactly() {
        // k1 = k2 = 3: len 8 -> conv1 gives 6 -> pool gives 3 -> conv2 gives 1.
        assert_eq!(min_viable_item_len(3, 3), 8);
        assert_eq!(min_viable_item_len(1, 1), 2);
    }

    #[test]
    fn batchnorm_train_updates_running_stats() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(&[vec![1.0, 3.0]]).unwrap());
        let mut p = BatchNormParams::init(1, 1e-5, 0.9);
        let vars = bind_batchnorm(&mut tape, &p);
        batchnorm(&mut tape, &[x], vars, &mut p, Mode::Train).unwrap();
        // running = 0.9 * prior + 0.1 * batch; batch mean 2, var 1.
        assert!((p.running_mean.data()[0] - 0.2).abs() < 1e-6);
        assert!((p.running_var.data()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn batchnorm_train_joint_stats_split_back() {
        // Two single-channel maps normalized jointly: positions {1,3,5,7}
        // have mean 4, biased var 5.
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 3.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[vec![5.0, 7.0]]).unwrap());
        let mut p = BatchNormParams::init(1, 0.0, 0.9);
        let vars = bind_batchnorm(&mut tape, &p);
        let outs = batchnorm(&mut tape, &[a, b], vars, &mut p, Mode::Train).unwrap();
        let inv = 1.0 / 5.0f32.sqrt();
        let got_a = tape.value(outs[0]).data().to_vec();
        let got_b = tape.value(outs[1]).data().to_vec();
        assert!((got_a[0] - (1.0 - 4.0) * inv).abs() < 1e-6);
        assert!((got_b[1] - (7.0 - 4.0) * inv).abs() < 1e-6);
    }

    #[test]
    fn batchnorm_train_mean_zero_var_one_per_channel() {
        // Before gamma/beta (gamma=1, beta=0) the normalized batch has
        // mean ~0 and variance ~1 per channel.
        let mut tape = Tape::new();
        let x = tape.leaf(
            Tensor::from_rows(&[
                vec![0.4, -1.2, 3.3, 0.7, -0.1],
                vec![10.0, 12.0, 9.5, 11.1, 10.4],
            ])
            .unwrap(),
        );
        let mut p = BatchNormParams::init(2, 0.0, 0.9);
        let vars = bind_batchnorm(&mut tape, &p);
        let outs = batchnorm(&mut tape, &[x], vars, &mut p, Mode::Train).unwrap();
        let t = tape.value(outs[0]);
        for ch in 0..2 {
            let row = t.row(ch);
            let mean: f32 = row.iter().sum::<f32>() / row.len() as f32;
            let var: f32 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>()
                / row.len() as f32;
            assert!(mean.abs() < 1e-4, "channel {ch} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "channel {ch} var {var}");
        }
    }

    proptest! {
        #[test]
        fn conv_output_length_is_l_minus_k_plus_1(l in 1usize..40, k in 1usize..6) {
            prop_assume!(l >= k);
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::filled(vec![2, l], 0.5));
            let p = Conv1dParams::init(2, 3, k, &mut init_rng(9));
            let vars = bind_conv1d(&mut tape, &p);
            let y = tape.conv1d(x, vars.kernels, vars.bias).unwrap();
            prop_assert_eq!(tape.value(y).shape(), &[3, l - k + 1]);
        }

        #[test]
        fn global_maxpool_is_permutation_invariant(mut vals in proptest::collection::vec(-10.0f32..10.0, 2..20), seed in 0u64..1000) {
            let mut tape = Tape::new();
            let x1 = tape.leaf(Tensor::new(vec![1, vals.len()], vals.clone()).unwrap());
            let y1 = tape.global_maxpool(x1).unwrap();
            let y1 = tape.value(y1).clone();

            use rand::seq::SliceRandom;
            vals.shuffle(&mut init_rng(seed));
            let x2 = tape.leaf(Tensor::new(vec![1, vals.len()], vals).unwrap());
            let y2 = tape.global_maxpool(x2).unwrap();
            prop_assert_eq!(&y1, tape.value(y2));
        }

        #[test]
        fn relu_is_idempotent(vals in proptest::collection::vec(-10.0f32..10.0, 1..30)) {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(vec![vals.len()], vals).unwrap());
            let r1 = tape.relu(x);
            let r2 = tape.relu(r1);
            prop_assert_eq!(tape.value(r1), tape.value(r2));
        }
    }
}
