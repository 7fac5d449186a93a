//! Synthetic domain-generalization benchmark.

mod data;
mod protocol;

pub use data::{
    default_classes, gen_domains, gen_domains_with, prototypes, sample_domain, ClassConfig, DomainGenConfig,
    DomainSpec, ShiftConfig, TaskDataset,
};
pub use protocol::{
    compare_methods, finetune, finetune_and_eval, prepare_seed, pretrain_foundation, run_methods, summarize, Comparison,
    FinetuneData, LayerSmr, Method, MethodSummary, PretrainConfig, ProtocolConfig, RunReport, SeedSetup, Stat,
};
