use std::sync::atomic::{AtomicU64, Ordering};

use super::arch::ModelConfig;
use crate::error::{Error, Result};
use crate::exec;
use crate::layers::{
    relu_mask_in_place, stats_pool, stats_pool_backward, BatchNorm, BatchNormCache, CrossedTimeDelayLayer, Dense,
    Mode, TimeDelayUnit,
};
use crate::numcore::{Matrix, Rng};

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Sequences processed per chunk by the inference helpers, bounding the
/// activation memory held at once.
const INFER_CHUNK: usize = 32;

/// One time-delay layer with its input normalization: `BN → TD units → ReLU`.
/// A stage fed by a single sequence has one norm shared by all units; a
/// stage fed by several branches has one norm per branch.
#[derive(Clone, Debug, PartialEq)]
pub struct TdStage {
    pub norms: Vec<BatchNorm>,
    pub layer: CrossedTimeDelayLayer,
}

impl TdStage {
    fn input_branch(&self, unit: usize) -> usize {
        if self.norms.len() == 1 {
            0
        } else {
            unit
        }
    }
}

/// Assembled network. Parameters are ordered by topology: per time-delay
/// stage the norm scale/shift pairs then unit weights/biases, then each
/// fully connected layer's weights and bias.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    seed: u64,
    stages: Vec<TdStage>,
    dense: Vec<Dense>,
    class_labels: Vec<String>,
    stamp: u64,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.seed == other.seed
            && self.stages == other.stages
            && self.dense == other.dense
            && self.class_labels == other.class_labels
    }
}

pub struct ParamBlock<'a> {
    pub name: String,
    pub values: &'a [f64],
}

pub struct ParamBlockMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

/// Gradient for every parameter block, aligned with
/// [`Model::param_blocks`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().flatten().all(|&g| g == 0.0)
    }
}

#[derive(Clone, Debug)]
struct StageCache {
    bn: Vec<BatchNormCache>,
    /// `[input branch][sequence]`
    normed: Vec<Vec<Matrix>>,
    /// `[unit][sequence]`
    pre: Vec<Vec<Matrix>>,
    /// `[unit][sequence]`
    out: Vec<Vec<Matrix>>,
}

/// Activations retained by [`Model::forward_batch`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    stamp: u64,
    mode: Mode,
    batch: usize,
    stages: Vec<StageCache>,
    pooled: Vec<Vec<f64>>,
    /// `[layer][sequence]`
    dense_in: Vec<Vec<Vec<f64>>>,
    /// `[layer][sequence]`
    dense_pre: Vec<Vec<Vec<f64>>>,
}

impl ForwardCache {
    /// Pooled (sp/sc) activation of every sequence.
    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.pooled
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output lengths of every branch after each time-delay stage, for the
    /// first sequence of the batch.
    pub fn branch_lengths(&self) -> Vec<Vec<usize>> {
        self.stages
            .iter()
            .map(|s| s.out.iter().map(|u| u[0].rows()).collect())
            .collect()
    }
}

fn glorot(rng: &mut Rng, values: &mut [f64], fan_in: usize, fan_out: usize) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    values.iter_mut().for_each(|w| *w = rng.uniform_range(-bound, bound));
}

impl Model {
    /// Builds the network with weights drawn uniformly in
    /// `±√(6 / (fan_in + fan_out))`, zero biases, and identity norms.
    pub fn build(config: ModelConfig, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut stages = Vec::new();
        let mut in_dims = vec![config.input_dim];
        for (contexts, width) in config.time_delay_layers() {
            let norms = in_dims.iter().map(|&d| BatchNorm::new(d)).collect();
            let units = contexts
                .iter()
                .enumerate()
                .map(|(u, &ctx)| {
                    let d = in_dims[if in_dims.len() == 1 { 0 } else { u }];
                    let mut unit = TimeDelayUnit::zeros(ctx, d, width);
                    glorot(&mut rng, unit.weights.as_mut_slice(), ctx.span() * d, width);
                    unit
                })
                .collect();
            stages.push(TdStage {
                norms,
                layer: CrossedTimeDelayLayer::new(units).expect("validated config has units"),
            });
            in_dims = vec![width; contexts.len()];
        }
        let mut dense = Vec::new();
        let mut fan_in = config.embedding_dim();
        for out in config.dense_widths() {
            let mut fc = Dense::zeros(fan_in, out);
            glorot(&mut rng, fc.weights.as_mut_slice(), fan_in, out);
            dense.push(fc);
            fan_in = out;
        }
        Self {
            config,
            seed,
            stages,
            dense,
            class_labels: Vec::new(),
            stamp: fresh_stamp(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stages(&self) -> &[TdStage] {
        &self.stages
    }

    pub fn dense_layers(&self) -> &[Dense] {
        &self.dense
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Optional class names (index = class id), persisted with the model.
    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn set_class_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if !labels.is_empty() && labels.len() != self.config.num_classes {
            return Err(Error::validation(
                "class_labels",
                format!("{} labels for {} classes", labels.len(), self.config.num_classes),
            ));
        }
        self.class_labels = labels;
        Ok(())
    }

    pub fn param_blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = Vec::new();
        for (si, st) in self.stages.iter().enumerate() {
            for (b, bn) in st.norms.iter().enumerate() {
                out.push(ParamBlock { name: format!("td{si}.bn{b}.gamma"), values: &bn.gamma });
                out.push(ParamBlock { name: format!("td{si}.bn{b}.beta"), values: &bn.beta });
            }
            for (u, unit) in st.layer.units.iter().enumerate() {
                out.push(ParamBlock {
                    name: format!("td{si}.unit{u}.weights"),
                    values: unit.weights.as_slice(),
                });
                out.push(ParamBlock { name: format!("td{si}.unit{u}.bias"), values: &unit.bias });
            }
        }
        for (l, fc) in self.dense.iter().enumerate() {
            out.push(ParamBlock { name: format!("fc{l}.weights"), values: fc.weights.as_slice() });
            out.push(ParamBlock { name: format!("fc{l}.bias"), values: &fc.bias });
        }
        out
    }

    /// Mutable parameter views. Invalidates outstanding forward caches.
    pub fn param_blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        self.stamp = fresh_stamp();
        let mut out = Vec::new();
        for (si, st) in self.stages.iter_mut().enumerate() {
            for (b, bn) in st.norms.iter_mut().enumerate() {
                out.push(ParamBlockMut { name: format!("td{si}.bn{b}.gamma"), values: &mut bn.gamma });
                out.push(ParamBlockMut { name: format!("td{si}.bn{b}.beta"), values: &mut bn.beta });
            }
            for (u, unit) in st.layer.units.iter_mut().enumerate() {
                out.push(ParamBlockMut {
                    name: format!("td{si}.unit{u}.weights"),
                    values: unit.weights.as_mut_slice(),
                });
                out.push(ParamBlockMut { name: format!("td{si}.unit{u}.bias"), values: &mut unit.bias });
            }
        }
        for (l, fc) in self.dense.iter_mut().enumerate() {
            out.push(ParamBlockMut { name: format!("fc{l}.weights"), values: fc.weights.as_mut_slice() });
            out.push(ParamBlockMut { name: format!("fc{l}.bias"), values: &mut fc.bias });
        }
        out
    }

    /// Non-trainable normalization state (running mean and variance).
    pub(crate) fn state_blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.stamp = fresh_stamp();
        let mut out = Vec::new();
        for st in &mut self.stages {
            for bn in &mut st.norms {
                out.push(&mut bn.running_mean);
                out.push(&mut bn.running_var);
            }
        }
        out
    }

    pub(crate) fn state_blocks(&self) -> Vec<&[f64]> {
        self.stages
            .iter()
            .flat_map(|st| st.norms.iter())
            .flat_map(|bn| [bn.running_mean.as_slice(), bn.running_var.as_slice()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.values.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_blocks().iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(Error::Shape {
                op: "set_flat_params",
                left: (flat.len(), 1),
                right: (n, 1),
            });
        }
        let mut off = 0;
        for block in self.param_blocks_mut() {
            let len = block.values.len();
            block.values.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    /// Batched forward pass returning logits per sequence.
    ///
    /// In train mode normalization statistics pool the whole batch; call
    /// [`Model::update_running_stats`] afterwards to fold them in.
    pub fn forward_batch(&self, batch: &[&Matrix], mode: Mode) -> Result<(Vec<Vec<f64>>, ForwardCache)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("forward over an empty batch".into()));
        }
        let d = self.config.input_dim;
        if let Some(x) = batch.iter().find(|x| x.cols() != d) {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape(),
                right: (x.rows(), d),
            });
        }
        let n = batch.len();

        let mut caches: Vec<StageCache> = Vec::with_capacity(self.stages.len());
        for (si, stage) in self.stages.iter().enumerate() {
            let mut bn_caches = Vec::with_capacity(stage.norms.len());
            let mut normed = Vec::with_capacity(stage.norms.len());
            for (b, bn) in stage.norms.iter().enumerate() {
                let refs: Vec<&Matrix> = match caches.last() {
                    None => batch.to_vec(),
                    Some(prev) => prev.out[b].iter().collect(),
                };
                let (y, c) = bn.forward(&refs, mode)?;
                normed.push(y);
                bn_caches.push(c);
            }
            let units = &stage.layer.units;
            let pre_flat = exec::try_map_indexed(units.len() * n, |i| {
                let (u, s) = (i / n, i % n);
                units[u]
                    .forward(&normed[stage.input_branch(u)][s])
                    .map_err(|e| with_layer(e, si))
            })?;
            let mut pre: Vec<Vec<Matrix>> = Vec::with_capacity(units.len());
            let mut it = pre_flat.into_iter();
            for _ in 0..units.len() {
                pre.push(it.by_ref().take(n).collect());
            }
            let out = pre
                .iter()
                .map(|per_seq| per_seq.iter().map(crate::layers::relu).collect())
                .collect();
            caches.push(StageCache {
                bn: bn_caches,
                normed,
                pre,
                out,
            });
        }

        let last = &caches.last().expect("at least one time-delay stage").out;
        let pooled: Vec<Vec<f64>> = exec::try_map_indexed(n, |s| {
            let mut v = Vec::with_capacity(self.config.embedding_dim());
            for branch in last {
                v.extend(stats_pool(&branch[s])?);
            }
            Ok::<_, Error>(v)
        })?;

        let per_seq = exec::try_map_indexed(n, |s| {
            let mut ins = Vec::with_capacity(self.dense.len());
            let mut pres = Vec::with_capacity(self.dense.len());
            let mut h = pooled[s].clone();
            for (l, fc) in self.dense.iter().enumerate() {
                let z = fc.forward(&h)?;
                ins.push(std::mem::replace(&mut h, z.clone()));
                if l + 1 < self.dense.len() {
                    h.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                pres.push(z);
            }
            Ok::<_, Error>((ins, pres, h))
        })?;
        let mut dense_in = vec![Vec::with_capacity(n); self.dense.len()];
        let mut dense_pre = vec![Vec::with_capacity(n); self.dense.len()];
        let mut logits = Vec::with_capacity(n);
        for (ins, pres, out) in per_seq {
            for (l, (i, p)) in ins.into_iter().zip(pres).enumerate() {
                dense_in[l].push(i);
                dense_pre[l].push(p);
            }
            logits.push(out);
        }

        let cache = ForwardCache {
            stamp: self.stamp,
            mode,
            batch: n,
            stages: caches,
            pooled,
            dense_in,
            dense_pre,
        };
        Ok((logits, cache))
    }

    /// Single-sequence forward pass.
    pub fn forward(&self, x: &Matrix, mode: Mode) -> Result<(Vec<f64>, ForwardCache)> {
        let (mut logits, cache) = self.forward_batch(&[x], mode)?;
        Ok((logits.pop().expect("one sequence"), cache))
    }

    /// Gradients of `Σ_s grad_logits[s] · logits[s]` with respect to every
    /// parameter, accumulated over the batch in sequence order.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[Vec<f64>]) -> Result<Gradients> {
        if cache.stamp != self.stamp {
            return Err(Error::Cache(
                "parameters changed since the forward pass (or cache belongs to another model)".into(),
            ));
        }
        if cache.stages.len() != self.stages.len() || cache.dense_in.len() != self.dense.len() {
            return Err(Error::Cache("layer structure differs".into()));
        }
        let n = cache.batch;
        let c = self.config.num_classes;
        if grad_logits.len() != n || grad_logits.iter().any(|g| g.len() != c) {
            return Err(Error::Shape {
                op: "backward",
                left: (grad_logits.len(), grad_logits.first().map_or(0, Vec::len)),
                right: (n, c),
            });
        }

        // Fully connected layers, last to first.
        let mut dense_grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(self.dense.len());
        let mut g: Vec<Vec<f64>> = grad_logits.to_vec();
        for l in (0..self.dense.len()).rev() {
            let fc = &self.dense[l];
            let relu_after = l + 1 < self.dense.len();
            let per_seq = exec::try_map_indexed(n, |s| {
                let mut gp = g[s].clone();
                if relu_after {
                    relu_mask_in_place(&cache.dense_pre[l][s], &mut gp);
                }
                fc.backward(&cache.dense_in[l][s], &gp)
            })?;
            let mut gw = Matrix::zeros(fc.out_dim(), fc.in_dim());
            let mut gb = vec![0.0; fc.out_dim()];
            g = Vec::with_capacity(n);
            for grads in per_seq {
                add_into(gw.as_mut_slice(), grads.weights.as_slice());
                add_into(&mut gb, &grads.bias);
                g.push(grads.input);
            }
            dense_grads.push((gw, gb));
        }
        dense_grads.reverse();

        // Statistics pooling back to the last stage's branch outputs.
        let last = &cache.stages.last().expect("stages").out;
        let widths: Vec<usize> = last.iter().map(|b| b[0].cols()).collect();
        let per_seq = exec::try_map_indexed(n, |s| {
            let mut off = 0;
            let mut outs = Vec::with_capacity(last.len());
            for (b, branch) in last.iter().enumerate() {
                let len = 2 * widths[b];
                outs.push(stats_pool_backward(
                    &branch[s],
                    &cache.pooled[s][off..off + len],
                    &g[s][off..off + len],
                )?);
                off += len;
            }
            Ok::<_, Error>(outs)
        })?;
        let mut g_out: Vec<Vec<Matrix>> = (0..last.len()).map(|_| Vec::with_capacity(n)).collect();
        for outs in per_seq {
            for (b, m) in outs.into_iter().enumerate() {
                g_out[b].push(m);
            }
        }

        // Time-delay stages, last to first.
        let mut stage_grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.stages.len());
        for si in (0..self.stages.len()).rev() {
            let stage = &self.stages[si];
            let sc = &cache.stages[si];
            let units = &stage.layer.units;
            let per = exec::try_map_indexed(units.len() * n, |i| {
                let (u, s) = (i / n, i % n);
                let mut gp = g_out[u][s].clone();
                relu_mask_in_place(sc.pre[u][s].as_slice(), gp.as_mut_slice());
                units[u].backward(&sc.normed[stage.input_branch(u)][s], &gp)
            })?;
            let mut unit_w: Vec<Matrix> = units.iter().map(|u| Matrix::zeros(u.weights.rows(), u.weights.cols())).collect();
            let mut unit_b: Vec<Vec<f64>> = units.iter().map(|u| vec![0.0; u.out_dim]).collect();
            let mut g_normed: Vec<Vec<Matrix>> = sc
                .normed
                .iter()
                .map(|per_seq| per_seq.iter().map(|x| Matrix::zeros(x.rows(), x.cols())).collect())
                .collect();
            for (i, tg) in per.into_iter().enumerate() {
                let (u, s) = (i / n, i % n);
                add_into(unit_w[u].as_mut_slice(), tg.weights.as_slice());
                add_into(&mut unit_b[u], &tg.bias);
                add_into(g_normed[stage.input_branch(u)][s].as_mut_slice(), tg.input.as_slice());
            }

            let mut blocks = Vec::new();
            let mut g_in = Vec::with_capacity(stage.norms.len());
            for (b, bn) in stage.norms.iter().enumerate() {
                let bg = bn.backward(&sc.bn[b], &g_normed[b])?;
                blocks.push(bg.gamma);
                blocks.push(bg.beta);
                g_in.push(bg.input);
            }
            for (w, b) in unit_w.into_iter().zip(unit_b) {
                blocks.push(w.into_vec());
                blocks.push(b);
            }
            stage_grads.push(blocks);
            g_out = g_in;
        }
        stage_grads.reverse();

        let mut blocks: Vec<Vec<f64>> = stage_grads.into_iter().flatten().collect();
        for (w, b) in dense_grads {
            blocks.push(w.into_vec());
            blocks.push(b);
        }
        Ok(Gradients { blocks })
    }

    /// Folds the train-mode batch statistics of `cache` into the running
    /// normalization estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) -> Result<()> {
        if cache.stamp != self.stamp {
            return Err(Error::Cache("running-stat update from a stale cache".into()));
        }
        for (st, sc) in self.stages.iter_mut().zip(&cache.stages) {
            for (bn, c) in st.norms.iter_mut().zip(&sc.bn) {
                bn.update_running(c);
            }
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// The sp/sc activation for `x`, normalization in inference mode.
    pub fn embed(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (_, cache) = self.forward(x, Mode::Infer)?;
        Ok(cache.pooled.into_iter().next().expect("one sequence"))
    }

    pub fn embed_batch(&self, xs: &[&Matrix]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(INFER_CHUNK) {
            let (_, cache) = self.forward_batch(chunk, Mode::Infer)?;
            out.extend(cache.pooled);
        }
        Ok(out)
    }

    /// Inference-mode logits for every sequence.
    pub fn logits_batch(&self, xs: &[&Matrix]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(INFER_CHUNK) {
            out.extend(self.forward_batch(chunk, Mode::Infer)?.0);
        }
        Ok(out)
    }
}

fn with_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::SequenceTooShort { len, span, .. } => Error::SequenceTooShort {
            len,
            span,
            layer: Some(layer),
        },
        other => other,
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Reassembles a model from its parts; used by the file reader.
pub(crate) fn assemble(
    config: ModelConfig,
    seed: u64,
    params: &[f64],
    state: &[f64],
    class_labels: Vec<String>,
) -> Result<Model> {
    let mut m = Model::build(config, seed);
    m.set_flat_params(params)?;
    let expected: usize = m.state_blocks().iter().map(|b| b.len()).sum();
    if state.len() != expected {
        return Err(Error::Shape {
            op: "normalization state",
            left: (state.len(), 1),
            right: (expected, 1),
        });
    }
    let mut off = 0;
    for block in m.state_blocks_mut() {
        let len = block.len();
        block.copy_from_slice(&state[off..off + len]);
        off += len;
    }
    m.set_class_labels(class_labels)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::softmax_ce;
    use crate::model::{Architecture, PAPER_WIDTH};
    use crate::numcore::finite_diff_check;

    fn random_seq(rng: &mut Rng, t: usize, d: usize) -> Matrix {
        Matrix::from_fn(t, d, |_, _| rng.normal())
    }

    fn tiny_ctdnn() -> Model {
        Model::build(ModelConfig::new(Architecture::ctdnn(2), 3, 2).unwrap(), 11)
    }

    fn batch_loss(model: &Model, xs: &[&Matrix], labels: &[usize], mode: Mode) -> (f64, Vec<Vec<f64>>) {
        let (logits, _) = model.forward_batch(xs, mode).unwrap();
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        let mut grads = Vec::new();
        for (z, &y) in logits.iter().zip(labels) {
            let (l, g) = softmax_ce(z, y).unwrap();
            loss += l * scale;
            grads.push(g.iter().map(|v| v * scale).collect());
        }
        (loss, grads)
    }

    #[test]
    fn tiny_ctdnn_gradients_match_finite_differences() {
        let model = tiny_ctdnn();
        let mut rng = Rng::new(5);
        let xs: Vec<Matrix> = (0..2).map(|_| random_seq(&mut rng, 12, 3)).collect();
        let refs: Vec<&Matrix> = xs.iter().collect();
        let labels = [0, 1];
        for mode in [Mode::Train, Mode::Infer] {
            let (_, cache) = model.forward_batch(&refs, mode).unwrap();
            let (_, g_logits) = batch_loss(&model, &refs, &labels, mode);
            let grads = model.backward(&cache, &g_logits).unwrap().flatten();
            let err = finite_diff_check(
                |p| {
                    let mut m = model.clone();
                    m.set_flat_params(p).unwrap();
                    batch_loss(&m, &refs, &labels, mode).0
                },
                &model.flat_params(),
                &grads,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{mode:?}: {err}");
        }
    }

    #[test]
    fn zero_parameters_give_uniform_loss() {
        for classes in [2, 5, 10] {
            let mut m = Model::build(ModelConfig::new(Architecture::ctdnn(4), 3, classes).unwrap(), 1);
            let zeros = vec![0.0; m.param_count()];
            m.set_flat_params(&zeros).unwrap();
            let x = random_seq(&mut Rng::new(2), 20, 3);
            let (z, _) = m.forward(&x, Mode::Infer).unwrap();
            let (loss, _) = softmax_ce(&z, 0).unwrap();
            assert!((loss - (classes as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_lengths_at_300_frames() {
        let m = Model::build(ModelConfig::new(Architecture::ctdnn(4), 13, 10).unwrap(), 0);
        let x = random_seq(&mut Rng::new(3), 300, 13);
        let (_, cache) = m.forward(&x, Mode::Infer).unwrap();
        assert_eq!(cache.branch_lengths(), vec![vec![292, 296, 298], vec![290, 294, 296]]);
    }

    #[test]
    fn embedding_widths_at_full_size() {
        for (arch, want) in [(Architecture::ctdnn(PAPER_WIDTH), 3072), (Architecture::tdnn(PAPER_WIDTH), 1024)] {
            let cfg = ModelConfig::new(arch, 30, 10).unwrap();
            assert_eq!(cfg.embedding_dim(), want);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut m = tiny_ctdnn();
        let x = random_seq(&mut Rng::new(4), 12, 3);
        let (z, cache) = m.forward(&x, Mode::Train).unwrap();
        m.param_blocks_mut()[0].values[0] += 0.5;
        assert!(matches!(m.backward(&cache, &[z]), Err(Error::Cache(_))));
    }

    #[test]
    fn branches_receive_different_bias_gradients() {
        let m = tiny_ctdnn();
        let x = random_seq(&mut Rng::new(6), 16, 3);
        let (z, cache) = m.forward(&x, Mode::Train).unwrap();
        let (_, g) = softmax_ce(&z, 1).unwrap();
        let grads = m.backward(&cache, &[g]).unwrap();
        let blocks = m.param_blocks();
        let bias = |name: &str| {
            let i = blocks.iter().position(|b| b.name == name).unwrap();
            grads.blocks[i].clone()
        };
        let names: Vec<&str> = blocks.iter().map(|b| b.name.as_str()).filter(|n| n.ends_with("bias")).collect();
        assert_ne!(bias(names[0]), bias(names[1]));
    }

    #[test]
    fn same_seed_same_model() {
        let cfg = ModelConfig::new(Architecture::tdnn(8), 4, 3).unwrap();
        assert_eq!(Model::build(cfg.clone(), 9).flat_params(), Model::build(cfg.clone(), 9).flat_params());
        assert_ne!(Model::build(cfg.clone(), 9).flat_params(), Model::build(cfg, 10).flat_params());
    }

    #[test]
    fn too_short_input_names_layer() {
        let m = tiny_ctdnn();
        let x = random_seq(&mut Rng::new(7), 10, 3);
        match m.forward(&x, Mode::Infer) {
            Err(Error::SequenceTooShort { layer, .. }) => assert_eq!(layer, Some(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batch_forward_matches_single_in_infer_mode() {
        let m = tiny_ctdnn();
        let mut rng = Rng::new(8);
        let xs: Vec<Matrix> = (0..5).map(|i| random_seq(&mut rng, 12 + i, 3)).collect();
        let refs: Vec<&Matrix> = xs.iter().collect();
        let batch = m.logits_batch(&refs).unwrap();
        for (x, z) in xs.iter().zip(&batch) {
            assert_eq!(&m.forward(x, Mode::Infer).unwrap().0, z);
        }
    }
}
