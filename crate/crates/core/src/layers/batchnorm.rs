use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated by the caller.
    Train,
    /// Running statistics; sequences are processed independently.
    Infer,
}

/// Per-feature batch normalization over sequence inputs. In train mode the
/// statistics pool every frame of every sequence in the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache {
    mode: Mode,
    /// Normalized input before scale/shift, one matrix per sequence.
    xhat: Vec<Matrix>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    frames: usize,
}

#[derive(Clone, Debug)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub input: Vec<Matrix>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, batch: &[&Matrix], mode: Mode) -> Result<(Vec<Matrix>, BatchNormCache)> {
        let d = self.dim();
        if let Some(bad) = batch.iter().find(|x| x.cols() != d) {
            return Err(Error::Shape {
                op: "batch_norm",
                left: bad.shape(),
                right: (bad.rows(), d),
            });
        }
        let frames: usize = batch.iter().map(|x| x.rows()).sum();
        let (mean, var) = match mode {
            Mode::Train => {
                if frames < 2 {
                    return Err(Error::InsufficientStatistics { frames });
                }
                batch_moments(batch, d, frames)
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();

        let mut outputs = Vec::with_capacity(batch.len());
        let mut xhats = Vec::with_capacity(batch.len());
        for x in batch {
            let mut xhat = Matrix::zeros(x.rows(), d);
            let mut y = Matrix::zeros(x.rows(), d);
            for r in 0..x.rows() {
                let (src, nh, out) = (x.row(r), xhat.row_mut(r), y.row_mut(r));
                for c in 0..d {
                    nh[c] = (src[c] - mean[c]) * inv_std[c];
                }
                for c in 0..d {
                    out[c] = self.gamma[c] * nh[c] + self.beta[c];
                }
            }
            outputs.push(y);
            xhats.push(xhat);
        }
        let cache = BatchNormCache {
            mode,
            xhat: xhats,
            inv_std,
            batch_mean: mean,
            batch_var: var,
            frames,
        };
        Ok((outputs, cache))
    }

    pub fn backward(&self, cache: &BatchNormCache, grad_out: &[Matrix]) -> Result<BatchNormGrads> {
        let d = self.dim();
        if grad_out.len() != cache.xhat.len()
            || grad_out.iter().zip(&cache.xhat).any(|(g, x)| g.shape() != x.shape())
        {
            return Err(Error::Shape {
                op: "batch_norm_backward",
                left: (grad_out.len(), d),
                right: (cache.xhat.len(), d),
            });
        }
        let mut g_gamma = vec![0.0; d];
        let mut g_beta = vec![0.0; d];
        for (g, xh) in grad_out.iter().zip(&cache.xhat) {
            for r in 0..g.rows() {
                for ((c, gv), xv) in g.row(r).iter().enumerate().zip(xh.row(r)) {
                    g_beta[c] += gv;
                    g_gamma[c] += gv * xv;
                }
            }
        }

        let input = match cache.mode {
            Mode::Infer => grad_out
                .iter()
                .map(|g| {
                    let mut gx = g.clone();
                    for r in 0..gx.rows() {
                        for (c, v) in gx.row_mut(r).iter_mut().enumerate() {
                            *v *= self.gamma[c] * cache.inv_std[c];
                        }
                    }
                    gx
                })
                .collect(),
            Mode::Train => {
                // dx = inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat)), dxhat = γ·dy
                let n = cache.frames as f64;
                let sum_dxhat: Vec<f64> = (0..d).map(|c| self.gamma[c] * g_beta[c]).collect();
                let sum_dxhat_xhat: Vec<f64> = (0..d).map(|c| self.gamma[c] * g_gamma[c]).collect();
                grad_out
                    .iter()
                    .zip(&cache.xhat)
                    .map(|(g, xh)| {
                        let mut gx = Matrix::zeros(g.rows(), d);
                        for r in 0..g.rows() {
                            let (gr, xr) = (g.row(r), xh.row(r));
                            for (c, out) in gx.row_mut(r).iter_mut().enumerate() {
                                let dxhat = self.gamma[c] * gr[c];
                                *out = cache.inv_std[c] / n
                                    * (n * dxhat - sum_dxhat[c] - xr[c] * sum_dxhat_xhat[c]);
                            }
                        }
                        gx
                    })
                    .collect()
            }
        };
        Ok(BatchNormGrads {
            gamma: g_gamma,
            beta: g_beta,
            input,
        })
    }

    /// Folds train-mode batch statistics into the running estimates. The
    /// running variance uses the unbiased (N−1) batch estimate.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let n = cache.frames as f64;
        let m = self.momentum;
        for c in 0..self.dim() {
            self.running_mean[c] = (1.0 - m) * self.running_mean[c] + m * cache.batch_mean[c];
            let unbiased = cache.batch_var[c] * n / (n - 1.0);
            self.running_var[c] = (1.0 - m) * self.running_var[c] + m * unbiased;
        }
    }
}

fn batch_moments(batch: &[&Matrix], d: usize, frames: usize) -> (Vec<f64>, Vec<f64>) {
    let inv_n = 1.0 / frames as f64;
    let mut mean = vec![0.0; d];
    for x in batch {
        for r in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut var = vec![0.0; d];
    for x in batch {
        for r in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    var.iter_mut().for_each(|s| *s *= inv_n);
    (mean, var)
}
