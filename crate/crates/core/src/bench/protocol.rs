//! Foundation pretraining, per-method fine-tuning and the seed-replicated comparison.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::{gen_domains_with, ClassConfig, DomainGenConfig, ShiftConfig, TaskDataset};
use crate::adapter::AdapterKind;
use crate::diagnostics::{smr, SmrReport};
use crate::train::{
    apply_freeze_policy, train_loop, AwdSchedule, BlockModel, LayerId, LayerWeight, ModelDims, TrainConfig,
};
use crate::{Error, Result};

/// Optimisation settings for the foundation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub wd0: f64,
    pub seed: u64,
    /// The foundation is rejected below this mean per-domain accuracy.
    pub min_accuracy: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { steps: 1200, lr: 2e-3, batch: 64, wd0: 0.01, seed: 0, min_accuracy: 0.9 }
    }
}

/// Trains a fully trainable model from scratch on the union of `domains`.
///
/// Fails with [`Error::UnderTrained`] when the mean per-domain accuracy on
/// `domains` stays below `cfg.min_accuracy`.
pub fn pretrain_foundation(domains: &[TaskDataset], dims: ModelDims, cfg: &PretrainConfig) -> Result<BlockModel> {
    if domains.len() < 2 {
        return Err(Error::InvalidConfig(format!("pretraining needs at least 2 domains, got {}", domains.len())));
    }
    let parts: Vec<&TaskDataset> = domains.iter().collect();
    let union = TaskDataset::concat(&parts)?;
    let mut model = BlockModel::init(dims, cfg.seed)?;
    let train_cfg = TrainConfig {
        kind: AdapterKind::None,
        rank: 0,
        nfeb: 0,
        lr: cfg.lr,
        backbone_lr_mult: 1.0,
        wd0: cfg.wd0,
        awd: AwdSchedule::Constant,
        steps: cfg.steps,
        batch: cfg.batch,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    train_loop(&mut model, &union.features, &union.labels, &train_cfg)?;
    let mut total = 0.0;
    for d in domains {
        total += model.accuracy(&d.features, &d.labels)?;
    }
    let accuracy = total / domains.len() as f64;
    if accuracy < cfg.min_accuracy {
        return Err(Error::UnderTrained { accuracy, required: cfg.min_accuracy });
    }
    Ok(model.merged())
}

/// One rung of the comparison ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Full fine-tuning, constant weight decay.
    Fft,
    FftFreeze,
    SomaFreeze,
    SomaFreezeAwd,
    /// LoRA with the same freeze and decay schedule as the full SoMA rung.
    Lora,
    /// PiSSA with the same freeze and decay schedule as the full SoMA rung.
    Pissa,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Fft, Method::FftFreeze, Method::SomaFreeze, Method::SomaFreezeAwd, Method::Lora, Method::Pissa];

    pub fn label(self) -> &'static str {
        match self {
            Method::Fft => "fft",
            Method::FftFreeze => "fft+freeze",
            Method::SomaFreeze => "soma+freeze",
            Method::SomaFreezeAwd => "soma+freeze+awd",
            Method::Lora => "lora",
            Method::Pissa => "pissa",
        }
    }

    /// Fine-tuning config for this method. The freeze rungs keep `base.nfeb`.
    pub fn config(self, base: &TrainConfig) -> TrainConfig {
        let nfeb = base.nfeb;
        let (kind, frozen, awd) = match self {
            Method::Fft => (AdapterKind::None, 0, AwdSchedule::Constant),
            Method::FftFreeze => (AdapterKind::None, nfeb, AwdSchedule::Constant),
            Method::SomaFreeze => (AdapterKind::Soma, nfeb, AwdSchedule::Constant),
            Method::SomaFreezeAwd => (AdapterKind::Soma, nfeb, AwdSchedule::Cosine),
            Method::Lora => (AdapterKind::Lora, nfeb, AwdSchedule::Cosine),
            Method::Pissa => (AdapterKind::Pissa, nfeb, AwdSchedule::Cosine),
        };
        TrainConfig { kind, nfeb: frozen, awd, ..base.clone() }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Held-out data a fine-tuned model is judged on.
#[derive(Debug, Clone)]
pub struct FinetuneData {
    pub source_train: TaskDataset,
    pub source_eval: TaskDataset,
    /// One evaluation set per unseen target domain.
    pub targets: Vec<TaskDataset>,
    /// Held-out pretraining-domain samples, never used for fine-tuning.
    pub retention: TaskDataset,
}

/// SMR group means of one probed layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSmr {
    pub layer: String,
    pub group_means: Vec<f64>,
    pub excluded: usize,
}

/// Metrics of one fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub kind: AdapterKind,
    pub rank: usize,
    pub nfeb: usize,
    pub awd: AwdSchedule,
    pub seed: u64,
    pub steps: usize,
    pub source_acc: f64,
    pub target_domains: Vec<u32>,
    pub target_acc: Vec<f64>,
    pub target_mean: f64,
    pub retention_acc: f64,
    pub smr: Vec<LayerSmr>,
    /// Mean over probed layers of the top (largest-σ) group SMR.
    pub smr_top_group: f64,
    pub trainable_param_count: usize,
    /// Adapter components initialised on zero singular values.
    pub dead_components: usize,
    pub final_loss: f64,
}

fn domain_ids(d: &TaskDataset) -> Vec<u32> {
    let mut ids = d.domains.clone();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Weight change of a layer relative to the same layer of `base`.
fn layer_delta(base: &BlockModel, tuned: &BlockModel, id: LayerId) -> Result<(crate::Matrix, crate::Matrix)> {
    let missing = || Error::InvalidConfig(format!("probe layer {id} not in model"));
    let w0 = base.layer(id).ok_or_else(missing)?.weight.effective();
    let delta = match &tuned.layer(id).ok_or_else(missing)?.weight {
        LayerWeight::Adapter(ad) => ad.delta(),
        other => other.effective().sub(&w0)?,
    };
    Ok((w0, delta))
}

/// Fine-tunes a copy of `foundation` on the source domain and evaluates it.
///
/// `cfg.steps == 0` skips training, giving the frozen-foundation evaluation.
pub fn finetune_and_eval(
    foundation: &BlockModel,
    data: &FinetuneData,
    cfg: &TrainConfig,
    method: &str,
    probe: &[LayerId],
    smr_groups: usize,
) -> Result<RunReport> {
    finetune(foundation, data, cfg, method, probe, smr_groups).map(|(_, report)| report)
}

/// [`finetune_and_eval`], also returning the fine-tuned model.
pub fn finetune(
    foundation: &BlockModel,
    data: &FinetuneData,
    cfg: &TrainConfig,
    method: &str,
    probe: &[LayerId],
    smr_groups: usize,
) -> Result<(BlockModel, RunReport)> {
    let source_ids = domain_ids(&data.source_train);
    for t in &data.targets {
        if domain_ids(t).iter().any(|id| source_ids.contains(id)) {
            return Err(Error::InvalidConfig("source and target domains overlap".into()));
        }
    }
    let mut policy_cfg = cfg.clone();
    policy_cfg.steps = policy_cfg.steps.max(1);
    let mut model = apply_freeze_policy(foundation, &policy_cfg)?;
    let final_loss = if cfg.steps > 0 {
        train_loop(&mut model, &data.source_train.features, &data.source_train.labels, cfg)?.final_loss()
    } else {
        f64::NAN
    };

    let source_acc = model.accuracy(&data.source_eval.features, &data.source_eval.labels)?;
    let mut target_acc = Vec::with_capacity(data.targets.len());
    let mut target_domains = Vec::with_capacity(data.targets.len());
    for t in &data.targets {
        target_acc.push(model.accuracy(&t.features, &t.labels)?);
        target_domains.push(domain_ids(t).first().copied().unwrap_or(0));
    }
    let target_mean = mean(&target_acc);
    let retention_acc = model.accuracy(&data.retention.features, &data.retention.labels)?;

    let mut layers = Vec::with_capacity(probe.len());
    for &id in probe {
        let (w0, delta) = layer_delta(foundation, &model, id)?;
        let report: SmrReport = smr(&w0, &delta)?.grouped(smr_groups)?;
        layers.push(LayerSmr { layer: format!("{id}"), group_means: report.group_means, excluded: report.excluded });
    }
    let tops: Vec<f64> = layers.iter().filter_map(|l| l.group_means.first().copied()).collect();
    let dead_components = model
        .layer_ids()
        .into_iter()
        .filter_map(|id| match &model.layer(id)?.weight {
            LayerWeight::Adapter(ad) => Some(ad.dead_components()),
            _ => None,
        })
        .sum();

    let report = RunReport {
        method: String::from(method),
        kind: cfg.kind,
        rank: if cfg.kind == AdapterKind::None { 0 } else { cfg.rank },
        nfeb: cfg.nfeb,
        awd: cfg.awd,
        seed: cfg.seed,
        steps: cfg.steps,
        source_acc,
        target_domains,
        target_acc,
        target_mean,
        retention_acc,
        smr: layers,
        smr_top_group: if tops.is_empty() { 0.0 } else { mean(&tops) },
        trainable_param_count: model.trainable_backbone_weights(),
        dead_components,
        final_loss,
    };
    Ok((model, report))
}

/// Full benchmark protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_classes: usize,
    pub d_in: usize,
    pub d_model: usize,
    pub d_hidden: usize,
    pub n_blocks: usize,
    pub n_pretrain_domains: usize,
    pub n_target_domains: usize,
    /// Samples per class per domain, before the train/eval split.
    pub n_per_class: usize,
    pub eval_fraction: f64,
    pub prototype_std: f64,
    pub class_spread: f64,
    pub pretrain_shift: ShiftConfig,
    pub novel_shift: ShiftConfig,
    pub pretrain: PretrainConfig,
    /// Base fine-tuning config. Each method overrides `kind` and `awd`;
    /// `nfeb` applies to every method except plain full fine-tuning.
    pub finetune: TrainConfig,
    pub smr_groups: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_classes: 16,
            d_in: 32,
            d_model: 64,
            d_hidden: 128,
            n_blocks: 4,
            n_pretrain_domains: 8,
            n_target_domains: 3,
            n_per_class: 48,
            eval_fraction: 0.5,
            prototype_std: 1.0,
            class_spread: 0.8,
            pretrain_shift: ShiftConfig::mild(),
            novel_shift: ShiftConfig::default(),
            pretrain: PretrainConfig::default(),
            finetune: TrainConfig {
                kind: AdapterKind::Soma,
                rank: 8,
                nfeb: 2,
                lr: 2e-3,
                backbone_lr_mult: 0.5,
                wd0: 0.05,
                awd: AwdSchedule::Cosine,
                steps: 300,
                batch: 32,
                seed: 0,
                ..TrainConfig::default()
            },
            smr_groups: 4,
            n_seeds: 10,
            base_seed: 0,
            methods: Method::ALL.to_vec(),
        }
    }
}

impl ProtocolConfig {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d_in: self.d_in,
            d_model: self.d_model,
            d_hidden: self.d_hidden,
            n_blocks: self.n_blocks,
            n_classes: self.n_classes,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |i| self.base_seed.wrapping_add(i))
    }

    /// Layers whose SMR is reported: both block layers of every block the
    /// protocol leaves unfrozen.
    pub fn probe_layers(&self) -> Vec<LayerId> {
        (self.finetune.nfeb.min(self.n_blocks)..self.n_blocks).flat_map(|i| [LayerId::Lin1(i), LayerId::Lin2(i)]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 || self.methods.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed and one method".into()));
        }
        if self.n_target_domains == 0 {
            return Err(Error::InvalidConfig("need at least one target domain".into()));
        }
        if !(0.0 < self.eval_fraction && self.eval_fraction < 1.0) {
            return Err(Error::InvalidConfig("eval_fraction must lie in (0, 1)".into()));
        }
        if self.finetune.nfeb >= self.n_blocks {
            return Err(Error::InvalidConfig("nfeb must leave at least one block to probe".into()));
        }
        if self.smr_groups == 0 {
            return Err(Error::InvalidConfig("smr_groups must be ≥ 1".into()));
        }
        self.finetune.validate(self.n_blocks)
    }
}

/// Everything one seed of the protocol shares across methods.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub seed: u64,
    pub foundation: BlockModel,
    pub data: FinetuneData,
}

/// Generates data and pretrains the foundation for `seed`.
pub fn prepare_seed(p: &ProtocolConfig, seed: u64) -> Result<SeedSetup> {
    p.validate()?;
    let classes = ClassConfig {
        n_classes: p.n_classes,
        d_in: p.d_in,
        prototype_std: p.prototype_std,
        class_spread: p.class_spread,
    };
    let pre = gen_domains_with(
        &DomainGenConfig {
            classes: classes.clone(),
            n_domains: p.n_pretrain_domains,
            first_domain_id: 0,
            n_per_class: p.n_per_class,
            shift: p.pretrain_shift.clone(),
        },
        seed,
    )?;
    let novel = gen_domains_with(
        &DomainGenConfig {
            classes,
            n_domains: 1 + p.n_target_domains,
            first_domain_id: p.n_pretrain_domains as u32,
            n_per_class: p.n_per_class,
            shift: p.novel_shift.clone(),
        },
        seed,
    )?;
    let (pre_train, pre_eval): (Vec<_>, Vec<_>) = pre.iter().map(|(_, d)| d.split(p.eval_fraction)).unzip();
    let pretrain_cfg = PretrainConfig { seed, ..p.pretrain.clone() };
    let foundation = pretrain_foundation(&pre_train, p.dims(), &pretrain_cfg)?;
    let (source_train, source_eval) = novel[0].1.split(p.eval_fraction);
    let targets = novel[1..].iter().map(|(_, d)| d.split(p.eval_fraction).1).collect();
    let retention = TaskDataset::concat(&pre_eval.iter().collect::<Vec<_>>())?;
    Ok(SeedSetup { seed, foundation, data: FinetuneData { source_train, source_eval, targets, retention } })
}

/// Runs every configured method on one prepared seed.
pub fn run_methods(p: &ProtocolConfig, setup: &SeedSetup) -> Result<Vec<RunReport>> {
    let probe = p.probe_layers();
    p.methods
        .iter()
        .map(|&m| {
            let cfg = TrainConfig { seed: setup.seed, ..m.config(&p.finetune) };
            finetune_and_eval(&setup.foundation, &setup.data, &cfg, m.label(), &probe, p.smr_groups)
        })
        .collect()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let m = mean(values);
        let std = if values.len() > 1 {
            let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
            libm::sqrt(ss / (values.len() - 1) as f64)
        } else {
            0.0
        };
        Self { mean: m, std }
    }
}

/// Seed-aggregated metrics for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub trainable_param_count: usize,
    pub source_acc: Stat,
    pub target_mean: Stat,
    pub retention_acc: Stat,
    pub smr_top_group: Stat,
}

/// Reports plus per-method aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<RunReport>,
    pub summary: Vec<MethodSummary>,
}

/// Aggregates reports by method, in first-appearance order.
pub fn summarize(reports: &[RunReport]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in reports {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|m| {
            let rs: Vec<&RunReport> = reports.iter().filter(|r| r.method == m).collect();
            let col = |f: fn(&RunReport) -> f64| Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            MethodSummary {
                method: String::from(m),
                runs: rs.len(),
                trainable_param_count: rs[0].trainable_param_count,
                source_acc: col(|r| r.source_acc),
                target_mean: col(|r| r.target_mean),
                retention_acc: col(|r| r.retention_acc),
                smr_top_group: col(|r| r.smr_top_group),
            }
        })
        .collect()
}

/// The whole seed-replicated ladder, sequentially.
pub fn compare_methods(p: &ProtocolConfig) -> Result<Comparison> {
    p.validate()?;
    let mut reports = Vec::new();
    for seed in p.seeds() {
        let setup = prepare_seed(p, seed)?;
        reports.extend(run_methods(p, &setup)?);
    }
    let summary = summarize(&reports);
    Ok(Comparison { reports, summary })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
