//! Seeded initialization and RIFW persistence of the network parameters.
//!
//! Initialization draws every convolution and first-MLP weight uniformly
//! from [-s, s], s = sqrt(6 / (fan_in + fan_out)), off the pinned SplitMix64
//! stream in declaration order (stage-1 blocks, MLP, stage-2 blocks; within
//! a block conv3, conv5, fuse). Biases are zero, batch-norm statistics are
//! the identity, and the final MLP layer is zeroed entirely so the learned
//! 3x3 transform starts at the identity. Zeroed tensors consume no draws.

use std::path::Path;

use crate::augment::RngStream;
use crate::error::{Error, Result};
use crate::io::rifw::{self, Tensor};

use super::{
    CcbParams, Conv1dParams, CtfNetParams, DenseParams, MLP_HIDDEN, STAGE1_CHANNELS,
    STAGE2_CHANNELS,
};

fn glorot_uniform(rng: &mut RngStream, len: usize, fan_in: usize, fan_out: usize) -> Vec<f32> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| (-s + 2.0 * s * rng.next_f64()) as f32).collect()
}

fn init_conv(rng: &mut RngStream, k: usize, cin: usize, cout: usize) -> Conv1dParams {
    Conv1dParams {
        kernel_size: k,
        in_channels: cin,
        out_channels: cout,
        weights: glorot_uniform(rng, k * cin * cout, k * cin, k * cout),
        bias: vec![0.0; cout],
    }
}

fn init_ccb(rng: &mut RngStream, cin: usize, cout: usize) -> CcbParams {
    let mid = cout / 2;
    CcbParams {
        conv3: init_conv(rng, 3, cin, mid),
        conv5: init_conv(rng, 5, cin, mid),
        fuse: init_conv(rng, 1, 2 * mid, cout),
        bn_gamma: vec![1.0; cout],
        bn_beta: vec![0.0; cout],
        bn_mean: vec![0.0; cout],
        bn_var: vec![1.0; cout],
    }
}

/// Reproducible random parameters for the given seed.
pub fn init_weights(seed: u64) -> CtfNetParams {
    let mut rng = RngStream::new(seed);
    let stage1 = STAGE1_CHANNELS
        .windows(2)
        .map(|w| init_ccb(&mut rng, w[0], w[1]))
        .collect();
    let dim1 = STAGE1_CHANNELS[STAGE1_CHANNELS.len() - 1];
    let mlp0 = DenseParams {
        in_dim: dim1,
        out_dim: MLP_HIDDEN,
        weights: glorot_uniform(&mut rng, dim1 * MLP_HIDDEN, dim1, MLP_HIDDEN),
        bias: vec![0.0; MLP_HIDDEN],
    };
    let mlp1 = DenseParams::zeros(MLP_HIDDEN, 9);
    let stage2 = STAGE2_CHANNELS
        .windows(2)
        .map(|w| init_ccb(&mut rng, w[0], w[1]))
        .collect();
    CtfNetParams { stage1, mlp: [mlp0, mlp1], stage2 }
}

fn conv_tensors(prefix: &str, p: &Conv1dParams) -> [Tensor; 2] {
    [
        Tensor::new(
            format!("{prefix}.w"),
            vec![p.kernel_size as u32, p.in_channels as u32, p.out_channels as u32],
            p.weights.clone(),
        ),
        Tensor::new(format!("{prefix}.b"), vec![p.out_channels as u32], p.bias.clone()),
    ]
}

fn ccb_tensors(prefix: &str, p: &CcbParams, out: &mut Vec<Tensor>) {
    out.extend(conv_tensors(&format!("{prefix}.conv3"), &p.conv3));
    out.extend(conv_tensors(&format!("{prefix}.conv5"), &p.conv5));
    out.extend(conv_tensors(&format!("{prefix}.fuse"), &p.fuse));
    let c = p.out_channels() as u32;
    out.push(Tensor::new(format!("{prefix}.bn.gamma"), vec![c], p.bn_gamma.clone()));
    out.push(Tensor::new(format!("{prefix}.bn.beta"), vec![c], p.bn_beta.clone()));
    out.push(Tensor::new(format!("{prefix}.bn.mean"), vec![c], p.bn_mean.clone()));
    out.push(Tensor::new(format!("{prefix}.bn.var"), vec![c], p.bn_var.clone()));
}

fn dense_tensors(prefix: &str, p: &DenseParams, out: &mut Vec<Tensor>) {
    out.push(Tensor::new(
        format!("{prefix}.w"),
        vec![p.in_dim as u32, p.out_dim as u32],
        p.weights.clone(),
    ));
    out.push(Tensor::new(format!("{prefix}.b"), vec![p.out_dim as u32], p.bias.clone()));
}

fn params_to_tensors(p: &CtfNetParams) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(10 * (p.stage1.len() + p.stage2.len()) + 4);
    for (i, ccb) in p.stage1.iter().enumerate() {
        ccb_tensors(&format!("s1.ccb{i}"), ccb, &mut out);
    }
    dense_tensors("mlp.0", &p.mlp[0], &mut out);
    dense_tensors("mlp.1", &p.mlp[1], &mut out);
    for (i, ccb) in p.stage2.iter().enumerate() {
        ccb_tensors(&format!("s2.ccb{i}"), ccb, &mut out);
    }
    out
}

pub fn save_weights(p: &CtfNetParams, path: &Path) -> Result<()> {
    rifw::write(&params_to_tensors(p), path)
}

struct TensorMap {
    tensors: std::collections::HashMap<String, Tensor>,
}

impl TensorMap {
    fn take(&mut self, name: &str, dims: &[u32]) -> Result<Vec<f32>> {
        let t = self
            .tensors
            .remove(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if t.dims != dims {
            return Err(Error::Shape(format!(
                "tensor {name} has dims {:?}, expected {:?}",
                t.dims, dims
            )));
        }
        Ok(t.data)
    }

    fn conv(&mut self, prefix: &str, k: usize, cin: usize, cout: usize) -> Result<Conv1dParams> {
        Ok(Conv1dParams {
            kernel_size: k,
            in_channels: cin,
            out_channels: cout,
            weights: self.take(&format!("{prefix}.w"), &[k as u32, cin as u32, cout as u32])?,
            bias: self.take(&format!("{prefix}.b"), &[cout as u32])?,
        })
    }

    fn ccb(&mut self, prefix: &str, cin: usize, cout: usize) -> Result<CcbParams> {
        let mid = cout / 2;
        let c = cout as u32;
        Ok(CcbParams {
            conv3: self.conv(&format!("{prefix}.conv3"), 3, cin, mid)?,
            conv5: self.conv(&format!("{prefix}.conv5"), 5, cin, mid)?,
            fuse: self.conv(&format!("{prefix}.fuse"), 1, 2 * mid, cout)?,
            bn_gamma: self.take(&format!("{prefix}.bn.gamma"), &[c])?,
            bn_beta: self.take(&format!("{prefix}.bn.beta"), &[c])?,
            bn_mean: self.take(&format!("{prefix}.bn.mean"), &[c])?,
            bn_var: self.take(&format!("{prefix}.bn.var"), &[c])?,
        })
    }

    fn dense(&mut self, prefix: &str, din: usize, dout: usize) -> Result<DenseParams> {
        Ok(DenseParams {
            in_dim: din,
            out_dim: dout,
            weights: self.take(&format!("{prefix}.w"), &[din as u32, dout as u32])?,
            bias: self.take(&format!("{prefix}.b"), &[dout as u32])?,
        })
    }
}

pub fn load_weights(path: &Path) -> Result<CtfNetParams> {
    let tensors = rifw::read(path)?;
    let mut map = TensorMap {
        tensors: tensors.into_iter().map(|t| (t.name.clone(), t)).collect(),
    };
    let mut stage1 = Vec::new();
    for (i, w) in STAGE1_CHANNELS.windows(2).enumerate() {
        stage1.push(map.ccb(&format!("s1.ccb{i}"), w[0], w[1])?);
    }
    let dim1 = STAGE1_CHANNELS[STAGE1_CHANNELS.len() - 1];
    let mlp0 = map.dense("mlp.0", dim1, MLP_HIDDEN)?;
    let mlp1 = map.dense("mlp.1", MLP_HIDDEN, 9)?;
    let mut stage2 = Vec::new();
    for (i, w) in STAGE2_CHANNELS.windows(2).enumerate() {
        stage2.push(map.ccb(&format!("s2.ccb{i}"), w[0], w[1])?);
    }
    Ok(CtfNetParams { stage1, mlp: [mlp0, mlp1], stage2 })
}
