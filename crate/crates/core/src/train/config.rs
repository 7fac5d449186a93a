use alloc::format;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterKind;
use crate::{Error, Result};

/// Weight-decay schedule over the training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AwdSchedule {
    /// `wd0 · ½(1 + cos(π t / T))`: starts at `wd0`, anneals to zero.
    Cosine,
    Constant,
    Off,
}

/// What decoupled weight decay pulls parameters toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayReference {
    Zero,
    /// The value the parameter had when training started (`B₀`, `A₀`, or the base weight).
    Init,
}

/// Which block layers receive adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdaptTargets {
    pub lin1: bool,
    pub lin2: bool,
}

impl Default for AdaptTargets {
    fn default() -> Self {
        Self { lin1: true, lin2: true }
    }
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:path => $s:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $s),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(AwdSchedule { AwdSchedule::Cosine => "cosine", AwdSchedule::Constant => "constant", AwdSchedule::Off => "off" });
keyword_enum!(DecayReference { DecayReference::Zero => "zero", DecayReference::Init => "init" });

impl fmt::Display for AdaptTargets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lin1, self.lin2) {
            (true, true) => f.write_str("lin1,lin2"),
            (true, false) => f.write_str("lin1"),
            (false, true) => f.write_str("lin2"),
            (false, false) => f.write_str("none"),
        }
    }
}

impl FromStr for AdaptTargets {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut t = Self { lin1: false, lin2: false };
        if s.trim() == "none" {
            return Ok(t);
        }
        for part in s.split(',').map(str::trim) {
            match part {
                "lin1" => t.lin1 = true,
                "lin2" => t.lin2 = true,
                other => return Err(Error::InvalidConfig(format!("unknown adapt target `{other}`"))),
            }
        }
        Ok(t)
    }
}

/// Everything that controls one fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: AdapterKind,
    pub rank: usize,
    /// Number of frozen early blocks.
    pub nfeb: usize,
    pub lr: f64,
    /// Multiplier on `lr` for everything except the classifier head.
    pub backbone_lr_mult: f64,
    /// Initial weight-decay coefficient.
    pub wd0: f64,
    pub awd: AwdSchedule,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub adapt_targets: AdaptTargets,
    pub decay_reference: DecayReference,
    /// Biases of adapted layers train with plain updates (no adapter).
    pub train_bias: bool,
    /// Multiplier on `B·A` in adapted layers.
    pub adapter_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: AdapterKind::Soma,
            rank: 4,
            nfeb: 0,
            lr: 1e-3,
            backbone_lr_mult: 0.5,
            wd0: 0.05,
            awd: AwdSchedule::Cosine,
            steps: 200,
            batch: 32,
            seed: 0,
            adapt_targets: AdaptTargets::default(),
            decay_reference: DecayReference::Zero,
            train_bias: true,
            adapter_scale: 1.0,
        }
    }
}

impl TrainConfig {
    /// Checks the field invariants against a model with `n_blocks` blocks.
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.nfeb > n_blocks {
            return Err(Error::InvalidConfig(format!("nfeb {} exceeds {} blocks", self.nfeb, n_blocks)));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if !(self.wd0 >= 0.0 && self.wd0.is_finite()) {
            return bad("wd0 must be finite and nonnegative");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.backbone_lr_mult >= 0.0 && self.backbone_lr_mult.is_finite()) {
            return bad("backbone_lr_mult must be finite and nonnegative");
        }
        if self.kind != AdapterKind::None && self.rank == 0 {
            return bad("rank must be at least 1");
        }
        if !self.adapter_scale.is_finite() {
            return bad("adapter_scale must be finite");
        }
        Ok(())
    }
}
