//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Keys are the training-config fields plus the benchmark protocol
//! fields; anything else is an error. Missing keys keep their defaults.

use std::fmt::Display;
use std::str::FromStr;

use soma_core::bench::{Method, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn parse_value<T: FromStr>(value: &str) -> Option<T> {
    value.parse().ok()
}

fn show<T: Display>(v: &T) -> String {
    v.to_string()
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every recognised key, in file order.
        pub const KEYS: &[&str] = &[$($key,)* "methods"];

        fn get_all(c: &ProtocolConfig) -> Vec<(&'static str, String)> {
            let mut out = vec![$(($key, show(&c.$($field).+)),)*];
            out.push(("methods", c.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(",")));
            out
        }

        /// `Some(true)` if set, `Some(false)` if the value did not parse, `None` for an unknown key.
        fn set_one(c: &mut ProtocolConfig, key: &str, value: &str) -> Option<bool> {
            match key {
                $($key => Some(match parse_value(value) {
                    Some(v) => { c.$($field).+ = v; true }
                    None => false,
                }),)*
                "methods" => Some(match parse_methods(value) {
                    Some(m) => { c.methods = m; true }
                    None => false,
                }),
                _ => None,
            }
        }
    };
}

config_keys! {
    "kind" => finetune.kind;
    "rank" => finetune.rank;
    "nfeb" => finetune.nfeb;
    "lr" => finetune.lr;
    "backbone_lr_mult" => finetune.backbone_lr_mult;
    "wd0" => finetune.wd0;
    "awd" => finetune.awd;
    "steps" => finetune.steps;
    "batch" => finetune.batch;
    "seed" => base_seed;
    "adapt_targets" => finetune.adapt_targets;
    "decay_reference" => finetune.decay_reference;
    "train_bias" => finetune.train_bias;
    "adapter_scale" => finetune.adapter_scale;
    "n_seeds" => n_seeds;
    "smr_groups" => smr_groups;
    "n_classes" => n_classes;
    "d_in" => d_in;
    "d_model" => d_model;
    "d_hidden" => d_hidden;
    "n_blocks" => n_blocks;
    "n_pretrain_domains" => n_pretrain_domains;
    "n_target_domains" => n_target_domains;
    "n_per_class" => n_per_class;
    "eval_fraction" => eval_fraction;
    "prototype_std" => prototype_std;
    "class_spread" => class_spread;
    "pretrain_steps" => pretrain.steps;
    "pretrain_lr" => pretrain.lr;
    "pretrain_batch" => pretrain.batch;
    "pretrain_wd0" => pretrain.wd0;
    "pretrain_min_accuracy" => pretrain.min_accuracy;
    "pretrain_shift.max_rotation" => pretrain_shift.max_rotation;
    "pretrain_shift.rotation_planes" => pretrain_shift.rotation_planes;
    "pretrain_shift.scale_min" => pretrain_shift.scale_min;
    "pretrain_shift.scale_max" => pretrain_shift.scale_max;
    "pretrain_shift.style_std" => pretrain_shift.style_std;
    "pretrain_shift.noise_std" => pretrain_shift.noise_std;
    "novel_shift.max_rotation" => novel_shift.max_rotation;
    "novel_shift.rotation_planes" => novel_shift.rotation_planes;
    "novel_shift.scale_min" => novel_shift.scale_min;
    "novel_shift.scale_max" => novel_shift.scale_max;
    "novel_shift.style_std" => novel_shift.style_std;
    "novel_shift.noise_std" => novel_shift.noise_std;
}

fn parse_methods(value: &str) -> Option<Vec<Method>> {
    let methods: Option<Vec<Method>> = value.split(',').map(|s| s.trim().parse().ok()).collect();
    methods.filter(|m| !m.is_empty())
}

/// Parses a config file over the defaults and validates the result.
pub fn parse(text: &str) -> Result<ProtocolConfig, ConfigError> {
    let mut cfg = ProtocolConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
        }
        match set_one(&mut cfg, key, value) {
            None => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            Some(false) => {
                return Err(ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() })
            }
            Some(true) => seen.push(key.to_string()),
        }
    }
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

/// Every key with its value, one per line. `parse(&serialize(c)) == c`.
pub fn serialize(cfg: &ProtocolConfig) -> String {
    let mut out = String::new();
    for (k, v) in get_all(cfg) {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}
