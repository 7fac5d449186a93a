use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::model::{Block, BlockModel, LayerId, LayerWeight, Linear};
use super::optim::OptimizerState;
use crate::adapter::{AdapterKind, LinearAdapter};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient `(softmax − onehot) / batch`.
pub fn loss_and_grad(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (classes, batch) = logits.shape();
    if labels.len() != batch {
        return Err(Error::BadLength { rows: classes, cols: batch, len: labels.len() });
    }
    if batch == 0 {
        return Err(Error::EmptyData);
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let mut grad = Matrix::zeros(classes, batch);
    let mut total = 0.0;
    let inv = 1.0 / batch as f64;
    for (c, &label) in labels.iter().enumerate() {
        let max = (0..classes).map(|r| logits[(r, c)]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..classes).map(|r| libm::exp(logits[(r, c)] - max)).sum();
        let lse = max + libm::log(sum);
        total += lse - logits[(label, c)];
        for r in 0..classes {
            let p = libm::exp(logits[(r, c)] - lse);
            grad[(r, c)] = (p - if r == label { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((total * inv, grad))
}

fn frozen_copy(l: &Linear) -> Result<Linear> {
    Linear::frozen(l.weight.effective(), l.bias.clone())
}

/// Prepares a fine-tuning model from `base`.
///
/// The embedding and the first `nfeb` blocks are frozen outright. Remaining
/// blocks get adapters of `cfg.kind` on the targeted layers (or are trained
/// directly when `kind` is `None`); the head is always trainable. With
/// `kind = None` and `nfeb = 0` the embedding trains too (full fine-tuning).
pub fn apply_freeze_policy(base: &BlockModel, cfg: &TrainConfig) -> Result<BlockModel> {
    base.check_dims()?;
    cfg.validate(base.blocks.len())?;
    let full = cfg.kind == AdapterKind::None;
    let embed = if full && cfg.nfeb == 0 {
        Linear::trainable(base.embed.weight.effective(), base.embed.bias.clone())?
    } else {
        frozen_copy(&base.embed)?
    };
    let adapt = |id: LayerId, l: &Linear, targeted: bool| -> Result<Linear> {
        let w = l.weight.effective();
        if full {
            return Linear::trainable(w, l.bias.clone());
        }
        if !targeted {
            return frozen_copy(l);
        }
        let seed = cfg.seed ^ (ordinal(id) << 32);
        let ad = LinearAdapter::new(cfg.kind, &w, cfg.rank, seed, cfg.adapter_scale).map_err(|e| match e {
            Error::InvalidRank { rank, max } => {
                Error::InvalidConfig(format!("layer {id}: rank {rank} exceeds the maximum {max}"))
            }
            other => other,
        })?;
        Linear::new(LayerWeight::Adapter(ad), l.bias.clone(), cfg.train_bias)
    };
    let mut blocks = Vec::with_capacity(base.blocks.len());
    for (i, b) in base.blocks.iter().enumerate() {
        blocks.push(if i < cfg.nfeb {
            Block { lin1: frozen_copy(&b.lin1)?, lin2: frozen_copy(&b.lin2)? }
        } else {
            Block {
                lin1: adapt(LayerId::Lin1(i), &b.lin1, cfg.adapt_targets.lin1)?,
                lin2: adapt(LayerId::Lin2(i), &b.lin2, cfg.adapt_targets.lin2)?,
            }
        });
    }
    let head = Linear::trainable(base.head.weight.effective(), base.head.bias.clone())?;
    Ok(BlockModel { embed, blocks, head })
}

fn ordinal(id: LayerId) -> u64 {
    match id {
        LayerId::Embed => 0,
        LayerId::Lin1(i) => 1 + 2 * i as u64,
        LayerId::Lin2(i) => 2 + 2 * i as u64,
        LayerId::Head => u64::MAX >> 33,
    }
}

/// Per-step training losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Trains `model` in place on the columns of `x` for `cfg.steps` AdamW steps.
///
/// Mini-batches are drawn without replacement from a permutation reshuffled
/// every epoch from `cfg.seed`, so a run is a pure function of its inputs.
pub fn train_loop(model: &mut BlockModel, x: &Matrix, labels: &[usize], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate(model.blocks.len())?;
    let n = x.cols();
    if n == 0 || labels.is_empty() {
        return Err(Error::EmptyData);
    }
    if labels.len() != n {
        return Err(Error::BadLength { rows: x.rows(), cols: n, len: labels.len() });
    }
    let classes = model.head.out_dim();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let batch = cfg.batch.min(n);
    let mut rng = crate::rng::stream(cfg.seed, 0xda7a);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut opt = OptimizerState::new();
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut idx = Vec::with_capacity(batch);
    let mut y = Vec::with_capacity(batch);
    for t in 0..cfg.steps {
        idx.clear();
        y.clear();
        while idx.len() < batch {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            y.push(labels[order[cursor]]);
            cursor += 1;
        }
        let xb = x.select_cols(&idx);
        let (logits, cache) = model.forward(&xb)?;
        let (loss, dlogits) = loss_and_grad(&logits, &y)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        let grads = model.backward(&cache, &dlogits)?;
        opt.step(model, &grads, cfg, t)?;
        losses.push(loss);
    }
    Ok(TrainOutcome { losses })
}
