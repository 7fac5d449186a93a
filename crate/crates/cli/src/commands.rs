//! The operations behind each subcommand. Pure checkpoint transforms are
//! separated from the file-writing wrappers so they can be tested directly.

use std::path::Path;

use serde::Serialize;
use soma_core::bench::{compare_methods, finetune, prepare_seed, Comparison, ProtocolConfig, RunReport};
use soma_core::diagnostics::smr;
use soma_core::linalg::{reconstruct, svd, ComponentRange};
use soma_core::{AdapterKind, Error, LinearAdapter};

use crate::checkpoint::{adapter_tensors, is_adapter_part, model_to_checkpoint, read_adapter, Checkpoint, Tensor};
use crate::config;
use crate::error::{CliError, CliResult};
use crate::fsutil;
use crate::report;

fn checkpoint_data(e: crate::checkpoint::CheckpointError) -> CliError {
    CliError::Data(e.to_string())
}

/// Parses `start:end`.
pub fn parse_range(s: &str) -> CliResult<ComponentRange> {
    let bad = || CliError::Usage(format!("range `{s}` is not `start:end`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let start = a.trim().parse().map_err(|_| bad())?;
    let end = b.trim().parse().map_err(|_| bad())?;
    if start >= end {
        return Err(CliError::Usage(format!("range `{s}` is empty")));
    }
    Ok(ComponentRange::new(start, end))
}

/// `index,sigma` rows for one 2-D tensor.
pub fn spectrum_csv(ckpt: &Checkpoint, tensor: &str) -> CliResult<String> {
    let w = ckpt.require(tensor).and_then(|t| t.to_matrix()).map_err(checkpoint_data)?;
    let f = svd(&w)?;
    let mut out = String::from("index,sigma\n");
    for (i, s) in f.sigma.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    Ok(out)
}

/// Replaces every 2-D tensor `p` with adapter tensors `p.w_res`, `p.b`, ... .
/// Other tensors pass through unchanged.
pub fn init_checkpoint(ckpt: &Checkpoint, kind: AdapterKind, rank: usize, seed: u64) -> CliResult<Checkpoint> {
    if kind == AdapterKind::None {
        return Err(CliError::Usage("--kind must be soma, pissa or lora".into()));
    }
    if let Some(t) = ckpt.tensors().iter().find(|t| t.name.ends_with(".w_res")) {
        return Err(CliError::Data(format!("{} already holds adapter tensors", t.name)));
    }
    let mut out = Checkpoint::new();
    for (i, t) in ckpt.tensors().iter().enumerate() {
        let pieces = if t.is_matrix() {
            let w = t.to_matrix().map_err(checkpoint_data)?;
            let layer_seed = seed ^ ((i as u64) << 32);
            let ad = LinearAdapter::new(kind, &w, rank, layer_seed, 1.0).map_err(|e| match e {
                Error::InvalidRank { rank, max } => {
                    CliError::Data(format!("tensor {}: rank {rank} exceeds the maximum {max}", t.name))
                }
                other => CliError::from(other),
            })?;
            adapter_tensors(&t.name, &ad)
        } else {
            vec![t.clone()]
        };
        for p in pieces {
            out.push(p).map_err(checkpoint_data)?;
        }
    }
    Ok(out)
}

/// Folds every adapter back into a dense tensor named after its prefix.
/// A checkpoint without adapters is returned unchanged.
pub fn merge_checkpoint(ckpt: &Checkpoint) -> CliResult<Checkpoint> {
    let prefixes: Vec<&str> = ckpt.tensors().iter().filter_map(|t| t.name.strip_suffix(".w_res")).collect();
    let mut out = Checkpoint::new();
    for t in ckpt.tensors() {
        if let Some(prefix) = t.name.strip_suffix(".w_res") {
            let ad = read_adapter(ckpt, prefix).map_err(checkpoint_data)?.expect("w_res present");
            out.push(Tensor::from_matrix(prefix, &ad.merge().w)).map_err(checkpoint_data)?;
        } else if !prefixes.iter().any(|p| is_adapter_part(p, &t.name)) {
            out.push(t.clone()).map_err(checkpoint_data)?;
        }
    }
    Ok(out)
}

/// Removes components `range` from every 2-D tensor: `W − W[range]`.
pub fn truncate_checkpoint(ckpt: &Checkpoint, range: ComponentRange) -> CliResult<Checkpoint> {
    let mut out = Checkpoint::new();
    for t in ckpt.tensors() {
        let next = if t.is_matrix() {
            let w = t.to_matrix().map_err(checkpoint_data)?;
            let f = svd(&w)?;
            if range.validate(f.k()).is_err() {
                return Err(CliError::Data(format!(
                    "tensor {}: range {}:{} invalid for {} components",
                    t.name,
                    range.start,
                    range.end,
                    f.k()
                )));
            }
            Tensor::from_matrix(t.name.clone(), &w.sub(&reconstruct(&f, range)?)?)
        } else {
            t.clone()
        };
        out.push(next).map_err(checkpoint_data)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorSmr {
    pub name: String,
    pub values: Vec<f64>,
    pub group_means: Vec<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmrFile {
    pub groups: usize,
    pub tensors: Vec<TensorSmr>,
    /// 2-D tensors with an all-zero base spectrum.
    pub skipped: Vec<String>,
}

/// SMR of every 2-D tensor of `base` against the (merged) `tuned` tensor of the same name.
pub fn smr_report(base: &Checkpoint, tuned: &Checkpoint, groups: usize) -> CliResult<SmrFile> {
    if groups == 0 {
        return Err(CliError::Usage("--groups must be at least 1".into()));
    }
    let tuned = merge_checkpoint(tuned)?;
    let mut tensors = Vec::new();
    let mut skipped = Vec::new();
    for t in base.tensors().iter().filter(|t| t.is_matrix()) {
        let w0 = t.to_matrix().map_err(checkpoint_data)?;
        let w1 = tuned.require(&t.name).and_then(|x| x.to_matrix()).map_err(checkpoint_data)?;
        if w1.shape() != w0.shape() {
            return Err(CliError::Data(format!("tensor {}: shapes differ between checkpoints", t.name)));
        }
        match smr(&w0, &w1.sub(&w0)?) {
            Ok(r) => {
                let values = r.values.clone();
                let r = r.grouped(groups)?;
                tensors.push(TensorSmr { name: t.name.clone(), values, group_means: r.group_means, excluded: r.excluded });
            }
            Err(Error::NoSpectrum) => skipped.push(t.name.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(SmrFile { groups, tensors, skipped })
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fsutil::write_atomic(&dir.join(name), text.as_bytes())
}

/// One fine-tuning run of `cfg.finetune` on seed `cfg.base_seed`.
///
/// Writes `config.txt`, `foundation.ckpt`, `tuned.ckpt` (adapter tensors kept),
/// `merged.ckpt`, `report.json` and `report.csv`.
pub fn train_run(cfg: &ProtocolConfig, out: &Path) -> CliResult<RunReport> {
    cfg.validate()?;
    fsutil::create_dir(out)?;
    let setup = prepare_seed(cfg, cfg.base_seed)?;
    let ft = soma_core::train::TrainConfig { seed: setup.seed, ..cfg.finetune.clone() };
    let label = ft.kind.as_str();
    let (model, report) = finetune(&setup.foundation, &setup.data, &ft, label, &cfg.probe_layers(), cfg.smr_groups)?;
    write_text(out, "config.txt", &config::serialize(cfg))?;
    model_to_checkpoint(&setup.foundation).save(&out.join("foundation.ckpt"))?;
    model_to_checkpoint(&model).save(&out.join("tuned.ckpt"))?;
    model_to_checkpoint(&model.merged()).save(&out.join("merged.ckpt"))?;
    write_text(out, "report.json", &report::to_json(&report)?)?;
    write_text(out, "report.csv", &report::to_csv(std::slice::from_ref(&report))?)?;
    Ok(report)
}

/// The full method ladder over all seeds.
///
/// Writes `config.txt`, `comparison.json`, `reports.csv` (one row per
/// method × seed) and `summary.csv`.
pub fn bench_run(cfg: &ProtocolConfig, out: &Path) -> CliResult<Comparison> {
    cfg.validate()?;
    fsutil::create_dir(out)?;
    let comparison = compare_methods(cfg)?;
    write_text(out, "config.txt", &config::serialize(cfg))?;
    write_text(out, "comparison.json", &report::to_json(&comparison)?)?;
    write_text(out, "reports.csv", &report::to_csv(&comparison.reports)?)?;
    write_text(out, "summary.csv", &report::to_csv(&comparison.summary)?)?;
    Ok(comparison)
}

/// Fixed-width summary table for the terminal.
pub fn summary_table(c: &Comparison) -> String {
    let mut s = format!(
        "{:<16} {:>8} {:>15} {:>15} {:>15} {:>17}\n",
        "method", "params", "source", "target", "retention", "top-group SMR"
    );
    for m in &c.summary {
        s.push_str(&format!(
            "{:<16} {:>8} {:>7.4} ± {:<5.3} {:>7.4} ± {:<5.3} {:>7.4} ± {:<5.3} {:>9.5} ± {:<5.4}\n",
            m.method,
            m.trainable_param_count,
            m.source_acc.mean,
            m.source_acc.std,
            m.target_mean.mean,
            m.target_mean.std,
            m.retention_acc.mean,
            m.retention_acc.std,
            m.smr_top_group.mean,
            m.smr_top_group.std,
        ));
    }
    s
}
