//! Structured-answer parsing, verifiable rewards and GRPO training for
//! four-section chain-of-adaptation responses, with toy policies small
//! enough to train on a laptop.

pub mod config;
pub mod data;
pub mod format;
pub mod grpo;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod rng;
mod text;

pub use format::{
    extract_answer, parse_coa, render_coa, validate, CoaResponse, FormatError, FormatMode, FormatReport, Section,
    ViolationCode,
};
pub use grpo::{compute_advantages, grpo_objective, kl_penalty, train_rlvr, GrpoConfig, GrpoTrainer, TrainLog};
pub use metrics::{aggregate_report, EvalOptions, MetricsReport};
pub use policy::{PolicyKind, PolicyParams};
pub use reward::{composite_reward, extract_entities, EntitySet, GateMode, RewardSpec, TaskMetric, Vocabulary};
pub use rng::SeedTree;
