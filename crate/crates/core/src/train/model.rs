//! Residual-MLP block model with hand-derived reverse-mode gradients.
//!
//! ```text
//! z₀ = embed(x)
//! zᵢ₊₁ = zᵢ + lin2ᵢ(gelu(lin1ᵢ(zᵢ)))
//! logits = head(z_L)
//! ```
//!
//! Activations are column-major in the batch: a batch of `b` inputs is a
//! `d_in × b` matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::LinearAdapter;
use crate::linalg::Matrix;
use crate::{Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_K: f64 = 0.044_715;

/// Tanh approximation of GELU.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_C * (x + GELU_K * x * x * x)))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let t = libm::tanh(GELU_C * (x + GELU_K * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// How a layer's weight participates in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerWeight {
    Frozen(Matrix),
    /// Trained directly; `init` is the value at the start of training.
    Trainable { w: Matrix, init: Matrix },
    Adapter(LinearAdapter),
}

impl LayerWeight {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Frozen(w) | Self::Trainable { w, .. } => w.shape(),
            Self::Adapter(ad) => ad.shape(),
        }
    }

    /// The dense weight this layer currently applies.
    pub fn effective(&self) -> Matrix {
        match self {
            Self::Frozen(w) | Self::Trainable { w, .. } => w.clone(),
            Self::Adapter(ad) => ad.merge().w,
        }
    }

    fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Self::Frozen(w) | Self::Trainable { w, .. } => w.matmul(x),
            Self::Adapter(ad) => ad.forward(x),
        }
    }
}

/// `y = W·x + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: LayerWeight,
    pub bias: Vec<f64>,
    pub bias_trainable: bool,
    bias_init: Vec<f64>,
}

impl Linear {
    pub fn new(weight: LayerWeight, bias: Vec<f64>, bias_trainable: bool) -> Result<Self> {
        let (m, _) = weight.shape();
        if bias.len() != m {
            return Err(Error::BadLength { rows: m, cols: 1, len: bias.len() });
        }
        if let Some(index) = bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { bias_init: bias.clone(), weight, bias, bias_trainable })
    }

    pub fn frozen(w: Matrix, bias: Vec<f64>) -> Result<Self> {
        Self::new(LayerWeight::Frozen(w), bias, false)
    }

    pub fn trainable(w: Matrix, bias: Vec<f64>) -> Result<Self> {
        Self::new(LayerWeight::Trainable { init: w.clone(), w }, bias, true)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape().1
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape().0
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self.weight, LayerWeight::Frozen(_)) && !self.bias_trainable
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = self.weight.apply(x)?;
        let b = x.cols();
        for (r, row) in y.as_mut_slice().chunks_exact_mut(b.max(1)).enumerate().take(self.bias.len()) {
            let bias = self.bias[r];
            row.iter_mut().for_each(|v| *v += bias);
        }
        Ok(y)
    }

    /// Gradient entries for this layer (canonical order) and, if asked, `dL/dx`.
    fn backward(&self, name: &str, dy: &Matrix, x: &Matrix, need_dx: bool) -> Result<(Vec<GradEntry>, Option<Matrix>)> {
        let mut grads = Vec::new();
        let dx = match &self.weight {
            LayerWeight::Frozen(w) => need_dx.then(|| w.t_matmul(dy)).transpose()?,
            LayerWeight::Trainable { w, .. } => {
                grads.push(GradEntry::new(format!("{name}.weight"), dy.matmul_t(x)?));
                need_dx.then(|| w.t_matmul(dy)).transpose()?
            }
            LayerWeight::Adapter(ad) => {
                let s = ad.scale();
                // ∂L/∂B = s·G·Xᵀ·Aᵀ = s·G·(A·X)ᵀ ; ∂L/∂A = s·Bᵀ·G·Xᵀ
                let ax = ad.a().matmul(x)?;
                let btg = ad.b().t_matmul(dy)?;
                let gb = dy.matmul_t(&ax)?;
                let ga = btg.matmul_t(x)?;
                grads.push(GradEntry::new(format!("{name}.weight.b"), scaled(gb, s)));
                grads.push(GradEntry::new(format!("{name}.weight.a"), scaled(ga, s)));
                if need_dx {
                    let mut dx = ad.w_res().t_matmul(dy)?;
                    let low = ad.a().t_matmul(&btg)?;
                    dx.as_mut_slice().iter_mut().zip(low.as_slice()).for_each(|(d, l)| *d += s * l);
                    Some(dx)
                } else {
                    None
                }
            }
        };
        if self.bias_trainable {
            let gb = Matrix::from_fn(dy.rows(), 1, |r, _| dy.row(r).iter().sum());
            grads.push(GradEntry::new(format!("{name}.bias"), gb));
        }
        Ok((grads, dx))
    }

    fn visit_trainable(&mut self, name: &str, group: ParamGroup, f: &mut dyn FnMut(ParamSlot<'_>)) {
        match &mut self.weight {
            LayerWeight::Frozen(_) => {}
            LayerWeight::Trainable { w, init } => f(ParamSlot {
                name: &format!("{name}.weight"),
                group,
                values: w.as_mut_slice(),
                init: init.as_slice(),
            }),
            LayerWeight::Adapter(ad) => {
                let (b, a, b0, a0) = ad.factors_mut();
                f(ParamSlot { name: &format!("{name}.weight.b"), group, values: b.as_mut_slice(), init: b0.as_slice() });
                f(ParamSlot { name: &format!("{name}.weight.a"), group, values: a.as_mut_slice(), init: a0.as_slice() });
            }
        }
        if self.bias_trainable {
            f(ParamSlot { name: &format!("{name}.bias"), group, values: &mut self.bias, init: &self.bias_init });
        }
    }
}

fn scaled(m: Matrix, s: f64) -> Matrix {
    if s == 1.0 {
        m
    } else {
        m.scale(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lin1: Linear,
    pub lin2: Linear,
}

/// Identifies one linear layer of a [`BlockModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayerId {
    Embed,
    Lin1(usize),
    Lin2(usize),
    Head,
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Embed => f.write_str("embed"),
            Self::Lin1(i) => write!(f, "blocks.{i}.lin1"),
            Self::Lin2(i) => write!(f, "blocks.{i}.lin2"),
            Self::Head => f.write_str("head"),
        }
    }
}

impl LayerId {
    /// Parses the [`Display`](fmt::Display) form back.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "embed" => return Some(Self::Embed),
            "head" => return Some(Self::Head),
            _ => {}
        }
        let rest = s.strip_prefix("blocks.")?;
        let (idx, layer) = rest.split_once('.')?;
        let idx = idx.parse().ok()?;
        match layer {
            "lin1" => Some(Self::Lin1(idx)),
            "lin2" => Some(Self::Lin2(idx)),
            _ => None,
        }
    }
}

/// Whether a parameter belongs to the backbone (scaled learning rate) or the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Backbone,
    Head,
}

/// A mutable view of one trainable tensor, handed out by [`BlockModel::visit_trainable`].
pub struct ParamSlot<'a> {
    pub name: &'a str,
    pub group: ParamGroup,
    pub values: &'a mut [f64],
    /// Value at the start of training (decay reference for `DecayReference::Init`).
    pub init: &'a [f64],
}

/// Layer sizes of a [`BlockModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_in: usize,
    pub d_model: usize,
    pub d_hidden: usize,
    pub n_blocks: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub embed: Linear,
    pub blocks: Vec<Block>,
    pub head: Linear,
}

/// Layer inputs and pre-activations recorded by [`BlockModel::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    /// `zᵢ` entering each block, then `z_L` entering the head.
    z: Vec<Matrix>,
    pre: Vec<Matrix>,
    act: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub name: String,
    pub values: Matrix,
}

impl GradEntry {
    pub fn new(name: String, values: Matrix) -> Self {
        Self { name, values }
    }
}

/// Gradients of every trainable tensor, in the model's canonical parameter order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    pub entries: Vec<GradEntry>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.values)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl BlockModel {
    /// Randomly initialised, fully trainable model.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        let mut rng = crate::rng::stream(seed, 0xb10c);
        let mut uniform = |rows: usize, cols: usize, bound: f64| {
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
        };
        let root = |x: f64| libm::sqrt(x);
        let embed = Linear::trainable(uniform(dims.d_model, dims.d_in, root(3.0 / dims.d_in as f64)), vec![0.0; dims.d_model])?;
        let mut blocks = Vec::with_capacity(dims.n_blocks);
        for _ in 0..dims.n_blocks {
            let lin1 = Linear::trainable(
                uniform(dims.d_hidden, dims.d_model, root(6.0 / dims.d_model as f64)),
                vec![0.0; dims.d_hidden],
            )?;
            let lin2 = Linear::trainable(
                uniform(dims.d_model, dims.d_hidden, 0.5 * root(3.0 / dims.d_hidden as f64)),
                vec![0.0; dims.d_model],
            )?;
            blocks.push(Block { lin1, lin2 });
        }
        let head = Linear::trainable(uniform(dims.n_classes, dims.d_model, root(3.0 / dims.d_model as f64)), vec![0.0; dims.n_classes])?;
        let model = Self { embed, blocks, head };
        model.check_dims()?;
        Ok(model)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d_in: self.embed.in_dim(),
            d_model: self.embed.out_dim(),
            d_hidden: self.blocks.first().map_or(0, |b| b.lin1.out_dim()),
            n_blocks: self.blocks.len(),
            n_classes: self.head.out_dim(),
        }
    }

    /// Checks that consecutive layers agree on their widths.
    pub fn check_dims(&self) -> Result<()> {
        let d = self.embed.out_dim();
        let mismatch = |what: String| Err(Error::InvalidConfig(format!("inconsistent model: {what}")));
        for (i, b) in self.blocks.iter().enumerate() {
            if b.lin1.in_dim() != d || b.lin2.out_dim() != d || b.lin2.in_dim() != b.lin1.out_dim() {
                return mismatch(format!("block {i}"));
            }
        }
        if self.head.in_dim() != d {
            return mismatch("head".into());
        }
        Ok(())
    }

    /// All layer ids in canonical order.
    pub fn layer_ids(&self) -> Vec<LayerId> {
        let mut ids = vec![LayerId::Embed];
        for i in 0..self.blocks.len() {
            ids.push(LayerId::Lin1(i));
            ids.push(LayerId::Lin2(i));
        }
        ids.push(LayerId::Head);
        ids
    }

    pub fn layer(&self, id: LayerId) -> Option<&Linear> {
        match id {
            LayerId::Embed => Some(&self.embed),
            LayerId::Lin1(i) => self.blocks.get(i).map(|b| &b.lin1),
            LayerId::Lin2(i) => self.blocks.get(i).map(|b| &b.lin2),
            LayerId::Head => Some(&self.head),
        }
    }

    pub fn layer_mut(&mut self, id: LayerId) -> Option<&mut Linear> {
        match id {
            LayerId::Embed => Some(&mut self.embed),
            LayerId::Lin1(i) => self.blocks.get_mut(i).map(|b| &mut b.lin1),
            LayerId::Lin2(i) => self.blocks.get_mut(i).map(|b| &mut b.lin2),
            LayerId::Head => Some(&mut self.head),
        }
    }

    /// Logits plus the cache needed by [`backward`](Self::backward).
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.rows() != self.embed.in_dim() {
            return Err(Error::DimensionMismatch {
                op: "model forward",
                left_rows: self.embed.out_dim(),
                left_cols: self.embed.in_dim(),
                right_rows: x.rows(),
                right_cols: x.cols(),
            });
        }
        let mut z = Vec::with_capacity(self.blocks.len() + 1);
        let mut pre = Vec::with_capacity(self.blocks.len());
        let mut act = Vec::with_capacity(self.blocks.len());
        let mut cur = self.embed.forward(x)?;
        for block in &self.blocks {
            let p = block.lin1.forward(&cur)?;
            let mut g = p.clone();
            g.as_mut_slice().iter_mut().for_each(|v| *v = gelu(*v));
            let mut next = block.lin2.forward(&g)?;
            next.add_assign(&cur)?;
            z.push(cur);
            pre.push(p);
            act.push(g);
            cur = next;
        }
        let logits = self.head.forward(&cur)?;
        z.push(cur);
        Ok((logits, ForwardCache { input: x.clone(), z, pre, act }))
    }

    /// Logits only.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = self.embed.forward(x)?;
        for block in &self.blocks {
            let mut g = block.lin1.forward(&cur)?;
            g.as_mut_slice().iter_mut().for_each(|v| *v = gelu(*v));
            let out = block.lin2.forward(&g)?;
            cur.add_assign(&out)?;
        }
        self.head.forward(&cur)
    }

    /// Gradients of every trainable tensor given `dL/dlogits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Gradients> {
        let nb = self.blocks.len();
        if cache.z.len() != nb + 1 || cache.pre.len() != nb {
            return Err(Error::CacheMismatch(format!("cache has {} blocks, model has {nb}", cache.pre.len())));
        }
        let batch = cache.input.cols();
        if dlogits.shape() != (self.head.out_dim(), batch) {
            return Err(Error::CacheMismatch(format!(
                "dlogits is {}x{}, expected {}x{batch}",
                dlogits.rows(),
                dlogits.cols(),
                self.head.out_dim()
            )));
        }
        // Nothing below the first trainable layer needs a gradient.
        let lowest = if !self.embed.is_frozen() {
            0
        } else {
            self.blocks
                .iter()
                .position(|b| !b.lin1.is_frozen() || !b.lin2.is_frozen())
                .map_or(nb + 1, |i| i + 1)
        };

        // Per-layer entries, indexed by canonical layer ordinal.
        let mut per_layer: Vec<Vec<GradEntry>> = vec![Vec::new(); 2 * nb + 2];
        let (g, mut dz) = self.head.backward("head", dlogits, &cache.z[nb], lowest <= nb)?;
        per_layer[2 * nb + 1] = g;
        for i in (0..nb).rev() {
            if i + 1 < lowest {
                break;
            }
            let block = &self.blocks[i];
            let dz_out = dz.take().expect("gradient flows into this block");
            let (g2, dact) = block.lin2.backward(&alloc::format!("blocks.{i}.lin2"), &dz_out, &cache.act[i], true)?;
            let mut dpre = dact.expect("requested");
            dpre.as_mut_slice()
                .iter_mut()
                .zip(cache.pre[i].as_slice())
                .for_each(|(d, p)| *d *= gelu_grad(*p));
            let need = i >= lowest;
            let (g1, dz_in) = block.lin1.backward(&alloc::format!("blocks.{i}.lin1"), &dpre, &cache.z[i], need)?;
            per_layer[1 + 2 * i] = g1;
            per_layer[2 + 2 * i] = g2;
            dz = match dz_in {
                Some(mut d) => {
                    d.add_assign(&dz_out)?;
                    Some(d)
                }
                None => None,
            };
        }
        if lowest == 0 {
            let dz_out = dz.take().expect("gradient flows into the embedding");
            per_layer[0] = self.embed.backward("embed", &dz_out, &cache.input, false)?.0;
        }
        Ok(Gradients { entries: per_layer.into_iter().flatten().collect() })
    }

    /// Calls `f` on every trainable tensor in canonical order
    /// (embed, blocks in order with lin1 before lin2, head; weight before bias).
    pub fn visit_trainable(&mut self, f: &mut dyn FnMut(ParamSlot<'_>)) {
        self.embed.visit_trainable("embed", ParamGroup::Backbone, f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.lin1.visit_trainable(&format!("blocks.{i}.lin1"), ParamGroup::Backbone, f);
            b.lin2.visit_trainable(&format!("blocks.{i}.lin2"), ParamGroup::Backbone, f);
        }
        self.head.visit_trainable("head", ParamGroup::Head, f);
    }

    /// Names of all trainable tensors in canonical order.
    pub fn trainable_names(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_trainable(&mut |slot| names.push(String::from(slot.name)));
        names
    }

    /// Runs `f` on the named trainable tensor, if present.
    pub fn with_param_mut<R>(&mut self, name: &str, f: impl FnOnce(&mut [f64]) -> R) -> Option<R> {
        let mut f = Some(f);
        let mut out = None;
        self.visit_trainable(&mut |slot| {
            if slot.name == name {
                if let Some(f) = f.take() {
                    out = Some(f(slot.values));
                }
            }
        });
        out
    }

    /// Backbone trainable weight parameters (adapter factors or plain weights),
    /// excluding biases and the head.
    pub fn trainable_backbone_weights(&self) -> usize {
        let mut n = 0;
        for id in self.layer_ids() {
            if id == LayerId::Head {
                continue;
            }
            let layer = self.layer(id).expect("listed id");
            n += match &layer.weight {
                LayerWeight::Frozen(_) => 0,
                LayerWeight::Trainable { w, .. } => w.rows() * w.cols(),
                LayerWeight::Adapter(ad) => ad.trainable_params(),
            };
        }
        n
    }

    /// A copy with every adapter folded into a dense frozen weight.
    pub fn merged(&self) -> Self {
        let fold = |l: &Linear| Linear {
            weight: LayerWeight::Frozen(l.weight.effective()),
            bias: l.bias.clone(),
            bias_trainable: false,
            bias_init: l.bias.clone(),
        };
        Self {
            embed: fold(&self.embed),
            blocks: self.blocks.iter().map(|b| Block { lin1: fold(&b.lin1), lin2: fold(&b.lin2) }).collect(),
            head: fold(&self.head),
        }
    }

    /// Fraction of columns of `x` whose arg-max logit equals the label.
    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::EmptyData);
        }
        let logits = self.logits(x)?;
        let pred = argmax_columns(&logits);
        let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Every weight and bias value in canonical layer order (effective weights for adapters
    /// are not used: adapter layers contribute `W_res`, `B`, `A`, `B₀`, `A₀`).
    pub fn raw_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for id in self.layer_ids() {
            let l = self.layer(id).expect("listed id");
            match &l.weight {
                LayerWeight::Frozen(w) | LayerWeight::Trainable { w, .. } => out.extend_from_slice(w.as_slice()),
                LayerWeight::Adapter(ad) => {
                    for m in [ad.w_res(), ad.b(), ad.a(), ad.b0(), ad.a0()] {
                        out.extend_from_slice(m.as_slice());
                    }
                }
            }
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

/// Row index of the maximum in each column (first maximum on ties).
pub fn argmax_columns(m: &Matrix) -> Vec<usize> {
    let (rows, cols) = m.shape();
    (0..cols)
        .map(|c| {
            let mut best = 0;
            for r in 1..rows {
                if m[(r, c)] > m[(best, c)] {
                    best = r;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        // tanh-approximate GELU(1) = 0.5·(1 + tanh(√(2/π)·1.044715))
        assert!((gelu(1.0) - 0.841_191_990_607_477_3).abs() < 1e-12);
        assert!(gelu(-30.0).abs() < 1e-12);
        assert!((gelu(30.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn gelu_grad_matches_difference_quotient() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn layer_ids_round_trip() {
        let m = BlockModel::init(ModelDims { d_in: 3, d_model: 4, d_hidden: 5, n_blocks: 2, n_classes: 2 }, 0).unwrap();
        for id in m.layer_ids() {
            assert_eq!(LayerId::parse(&format!("{id}")), Some(id));
        }
        assert_eq!(LayerId::parse("blocks.x.lin1"), None);
    }

    #[test]
    fn init_is_deterministic_and_consistent() {
        let dims = ModelDims { d_in: 3, d_model: 4, d_hidden: 5, n_blocks: 2, n_classes: 2 };
        let a = BlockModel::init(dims, 9).unwrap();
        let b = BlockModel::init(dims, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dims(), dims);
        assert_ne!(a.raw_values(), BlockModel::init(dims, 10).unwrap().raw_values());
    }

    #[test]
    fn merged_model_is_frozen_with_same_outputs() {
        let dims = ModelDims { d_in: 3, d_model: 4, d_hidden: 5, n_blocks: 2, n_classes: 2 };
        let mut m = BlockModel::init(dims, 4).unwrap();
        let merged = m.merged();
        assert!(merged.clone().trainable_names().is_empty());
        let x = Matrix::from_fn(3, 2, |r, c| (r + 2 * c) as f64 * 0.3);
        assert_eq!(m.logits(&x).unwrap(), merged.logits(&x).unwrap());
        // embed, 2 × (lin1, lin2), head; weight and bias each
        assert_eq!(m.trainable_names().len(), 12);
    }
}
