//! Group Relative Policy Optimization.
//!
//! For each prompt a group of `G` responses is sampled from the current
//! (old) policy and scored. Rewards are normalized within the group,
//!
//! ```text
//! A_i = (r_i - mean(r)) / std(r)          (population std; A = 0 if std = 0)
//! ```
//!
//! and the policy ascends the clipped, KL-regularized surrogate
//!
//! ```text
//! J(θ) = 1/G Σ_i [ min(ρ_i A_i, clip(ρ_i, 1-ε, 1+ε) A_i) - β k3_i ]
//! ρ_i  = π_θ(y_i|x) / π_old(y_i|x)                       (sequence level)
//! k3_i = exp(u_i) - u_i - 1,   u_i = log π_ref(y_i|x) - log π_θ(y_i|x)
//! ```
//!
//! `J` is maximized. `objective` fields in logs carry `J` itself, not its
//! negation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::QaRecord;
use crate::policy::{Choice, PolicyError, PolicyParams, ToyResponse};
use crate::reward::{EntitySet, GateMode, RewardError, RewardSpec, VocabularyError};
use crate::rng::SeedTree;

/// Default bound on `|u|` inside the KL estimator.
pub const DEFAULT_KL_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("group size must be at least 2, got {0}")]
    GroupTooSmall(usize),
    #[error("group field `{field}` has {actual} entries, expected {expected}")]
    Misaligned {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record `{id}`: {source}")]
    Record { id: String, source: VocabularyError },
    #[error("sampling failed at step {step}: {source}")]
    Sampling { step: usize, source: PolicyError },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

fn default_group_size() -> usize {
    8
}
fn default_temperature() -> f64 {
    1.0
}
fn default_clip_epsilon() -> f64 {
    0.2
}
fn default_kl_beta() -> f64 {
    0.001
}
fn default_kl_clamp() -> f64 {
    DEFAULT_KL_CLAMP
}
fn default_learning_rate() -> f64 {
    1e-6
}
fn default_batch_size_prompts() -> usize {
    14
}
fn default_epochs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrpoConfig {
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_clip_epsilon")]
    pub clip_epsilon: f64,
    #[serde(default = "default_kl_beta")]
    pub kl_beta: f64,
    #[serde(default = "default_kl_clamp")]
    pub kl_clamp: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Prompts per optimizer step; 14 prompts × 8 responses = 112.
    #[serde(default = "default_batch_size_prompts")]
    pub batch_size_prompts: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Stop after this many steps even if epochs remain.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: default_group_size(),
            temperature: default_temperature(),
            clip_epsilon: default_clip_epsilon(),
            kl_beta: default_kl_beta(),
            kl_clamp: default_kl_clamp(),
            learning_rate: default_learning_rate(),
            batch_size_prompts: default_batch_size_prompts(),
            epochs: default_epochs(),
            max_steps: None,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::Config(m.to_string()));
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall(self.group_size));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return bad("kl_beta must be finite and >= 0");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be finite and > 0");
        }
        if self.kl_clamp.is_nan() || self.kl_clamp <= 0.0 {
            return bad("kl_clamp must be > 0");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if self.batch_size_prompts == 0 {
            return bad("batch_size_prompts must be >= 1");
        }
        Ok(())
    }
}

/// Group-normalized advantages.
pub fn compute_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if let Some(index) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(GrpoError::NonFinite { what: "reward", index });
    }
    let g = rewards.len() as f64;
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// `min(ρA, clip(ρ, 1-ε, 1+ε)A)`.
pub fn clipped_surrogate_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Non-negative per-sample KL estimate `exp(u) - u - 1`, with
/// `u = logp_ref - logp_theta` clamped to `±DEFAULT_KL_CLAMP`.
pub fn kl_penalty(logp_theta: f64, logp_ref: f64) -> f64 {
    kl_penalty_clamped(logp_theta, logp_ref, DEFAULT_KL_CLAMP)
}

pub fn kl_penalty_clamped(logp_theta: f64, logp_ref: f64, bound: f64) -> f64 {
    let u = (logp_ref - logp_theta).clamp(-bound, bound);
    // exp_m1 keeps precision near u = 0
    (u.exp_m1() - u).max(0.0)
}

/// One prompt's sampled group.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub prompt_id: String,
    pub responses: Vec<String>,
    pub logprob_old: Vec<f64>,
    pub logprob_ref: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl RolloutGroup {
    pub fn new(
        prompt_id: impl Into<String>,
        responses: Vec<String>,
        logprob_old: Vec<f64>,
        logprob_ref: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, GrpoError> {
        let group = Self {
            prompt_id: prompt_id.into(),
            responses,
            logprob_old,
            logprob_ref,
            rewards,
        };
        group.check()?;
        Ok(group)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    fn check(&self) -> Result<(), GrpoError> {
        let g = self.responses.len();
        if g < 2 {
            return Err(GrpoError::GroupTooSmall(g));
        }
        for (field, v) in [
            ("logprob_old", &self.logprob_old),
            ("logprob_ref", &self.logprob_ref),
            ("rewards", &self.rewards),
        ] {
            if v.len() != g {
                return Err(GrpoError::Misaligned {
                    field,
                    expected: g,
                    actual: v.len(),
                });
            }
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(GrpoError::NonFinite { what: field, index });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTerm {
    pub ratio: f64,
    pub advantage: f64,
    pub surrogate: f64,
    pub kl: f64,
    /// The clipped branch is binding (zero gradient through the ratio).
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupObjective {
    pub objective: f64,
    pub per_sample: Vec<SampleTerm>,
    /// `∂J/∂ log π_θ(y_i|x)` for each sample.
    pub dlogp: Vec<f64>,
}

/// Evaluate the group objective at the given current log-probabilities.
pub fn grpo_objective(group: &RolloutGroup, logp_theta: &[f64], cfg: &GrpoConfig) -> Result<GroupObjective, GrpoError> {
    group.check()?;
    let g = group.len();
    if logp_theta.len() != g {
        return Err(GrpoError::Misaligned {
            field: "logp_theta",
            expected: g,
            actual: logp_theta.len(),
        });
    }
    let advantages = compute_advantages(&group.rewards)?;
    let eps = cfg.clip_epsilon;
    let gf = g as f64;
    let mut objective = 0.0;
    let mut per_sample = Vec::with_capacity(g);
    let mut dlogp = Vec::with_capacity(g);
    for i in 0..g {
        let lt = logp_theta[i];
        if !lt.is_finite() {
            return Err(GrpoError::NonFinite { what: "logp_theta", index: i });
        }
        let ratio = (lt - group.logprob_old[i]).exp();
        if !ratio.is_finite() {
            return Err(GrpoError::NonFinite { what: "ratio", index: i });
        }
        let a = advantages[i];
        let surrogate = clipped_surrogate_term(ratio, a, eps);
        let clipped = (a > 0.0 && ratio > 1.0 + eps) || (a < 0.0 && ratio < 1.0 - eps);
        let d_surr = if clipped { 0.0 } else { ratio * a };

        let raw_u = group.logprob_ref[i] - lt;
        let kl = kl_penalty_clamped(lt, group.logprob_ref[i], cfg.kl_clamp);
        let d_kl = if raw_u.abs() > cfg.kl_clamp { 0.0 } else { 1.0 - raw_u.exp() };

        objective += surrogate - cfg.kl_beta * kl;
        dlogp.push((d_surr - cfg.kl_beta * d_kl) / gf);
        per_sample.push(SampleTerm {
            ratio,
            advantage: a,
            surrogate,
            kl,
            clipped,
        });
    }
    let objective = objective / gf;
    if !objective.is_finite() {
        return Err(GrpoError::NonFinite { what: "objective", index: 0 });
    }
    Ok(GroupObjective {
        objective,
        per_sample,
        dlogp,
    })
}

/// Group objective and its gradient with respect to the policy parameters,
/// for responses `choices` aligned with `group`.
pub fn objective_and_grad(
    policy: &PolicyParams,
    group: &RolloutGroup,
    choices: &[Choice],
    cfg: &GrpoConfig,
) -> Result<(GroupObjective, Vec<f64>), GrpoError> {
    if choices.len() != group.len() {
        return Err(GrpoError::Misaligned {
            field: "choices",
            expected: group.len(),
            actual: choices.len(),
        });
    }
    let mut logp = Vec::with_capacity(choices.len());
    let mut grads = Vec::with_capacity(choices.len());
    for c in choices {
        let (lp, g) = policy.logprob_and_grad(c, cfg.temperature)?;
        logp.push(lp);
        grads.push(g);
    }
    let obj = grpo_objective(group, &logp, cfg)?;
    let mut grad = vec![0.0; policy.num_params()];
    for (w, g) in obj.dlogp.iter().zip(&grads) {
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += w * gi;
        }
    }
    Ok((obj, grad))
}

/// A policy that can be trained by [`GrpoTrainer`].
pub trait Policy: Clone + Send + Sync {
    fn num_params(&self) -> usize;

    fn sample(
        &self,
        prompt: &QaRecord,
        g: usize,
        temperature: f64,
        render: GateMode,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<Vec<ToyResponse>, PolicyError>;

    fn logprob_and_grad(
        &self,
        prompt: &QaRecord,
        response: &ToyResponse,
        temperature: f64,
    ) -> Result<(f64, Vec<f64>), PolicyError>;

    fn apply_step(&mut self, direction: &[f64], step: f64);
}

impl Policy for PolicyParams {
    fn num_params(&self) -> usize {
        PolicyParams::num_params(self)
    }

    fn sample(
        &self,
        _prompt: &QaRecord,
        g: usize,
        temperature: f64,
        render: GateMode,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<Vec<ToyResponse>, PolicyError> {
        PolicyParams::sample(self, g, temperature, rng)?
            .into_iter()
            .map(|choice| {
                let rendered_text = self.render(&choice, render)?;
                Ok(ToyResponse { choice, rendered_text })
            })
            .collect()
    }

    fn logprob_and_grad(
        &self,
        _prompt: &QaRecord,
        response: &ToyResponse,
        temperature: f64,
    ) -> Result<(f64, Vec<f64>), PolicyError> {
        PolicyParams::logprob_and_grad(self, &response.choice, temperature)
    }

    fn apply_step(&mut self, direction: &[f64], step: f64) {
        PolicyParams::apply_step(self, direction, step)
    }
}

/// One optimizer step's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_advantage_abs: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    /// Mean group objective `J` (maximized).
    pub objective: f64,
    pub format_valid_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.steps {
            out.push_str(&serde_json::to_string(r).expect("step record serializes"));
            out.push('\n');
        }
        out
    }
}

struct PromptOutcome {
    objective: GroupObjective,
    grad: Vec<f64>,
    rewards: Vec<f64>,
    valid: usize,
}

/// GRPO training loop over a fixed dataset.
///
/// The reference policy is the snapshot taken at construction and is never
/// updated. The old policy is refreshed before every step and exactly one
/// gradient step is taken per sampled batch.
pub struct GrpoTrainer<P: Policy> {
    policy: P,
    reference: P,
    spec: RewardSpec,
    cfg: GrpoConfig,
    render_mode: GateMode,
    seeds: SeedTree,
    step: usize,
}

impl<P: Policy> GrpoTrainer<P> {
    pub fn new(policy: P, spec: RewardSpec, cfg: GrpoConfig) -> Result<Self, GrpoError> {
        cfg.validate()?;
        Ok(Self {
            reference: policy.clone(),
            policy,
            render_mode: spec.format_mode,
            seeds: SeedTree::new(cfg.seed),
            spec,
            cfg,
            step: 0,
        })
    }

    /// Render rollouts in a different format from the one the gate checks.
    pub fn with_render_mode(mut self, mode: GateMode) -> Self {
        self.render_mode = mode;
        self
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn reference(&self) -> &P {
        &self.reference
    }

    pub fn into_policy(self) -> P {
        self.policy
    }

    pub fn config(&self) -> &GrpoConfig {
        &self.cfg
    }

    fn ground_truth(&self, record: &QaRecord) -> Result<EntitySet, GrpoError> {
        self.spec
            .vocabulary
            .set_from_labels(&record.answer_set)
            .map_err(|source| GrpoError::Record {
                id: record.id.clone(),
                source,
            })
    }

    fn rollout(&self, old: &P, record: &QaRecord, gt: &EntitySet) -> Result<PromptOutcome, GrpoError> {
        let step = self.step;
        let mut rng = self.seeds.stream_for("rollout", step as u64, &record.id);
        let responses = old
            .sample(record, self.cfg.group_size, self.cfg.temperature, self.render_mode, &mut rng)
            .map_err(|source| GrpoError::Sampling { step, source })?;
        let g = responses.len();
        let mut rewards = Vec::with_capacity(g);
        let mut valid = 0;
        let mut logp_old = Vec::with_capacity(g);
        let mut logp_ref = Vec::with_capacity(g);
        let mut grads = Vec::with_capacity(g);
        for r in &responses {
            let scored = self.spec.score(&r.rendered_text, gt)?;
            valid += usize::from(scored.format_valid);
            rewards.push(scored.reward);
            let (lp, grad) = old.logprob_and_grad(record, r, self.cfg.temperature)?;
            logp_old.push(lp);
            grads.push(grad);
            let (lr, _) = self.reference.logprob_and_grad(record, r, self.cfg.temperature)?;
            logp_ref.push(lr);
        }
        let group = RolloutGroup::new(
            record.id.clone(),
            responses.into_iter().map(|r| r.rendered_text).collect(),
            logp_old.clone(),
            logp_ref,
            rewards.clone(),
        )?;
        // π_θ coincides with π_old at the start of the step.
        let objective = grpo_objective(&group, &logp_old, &self.cfg)?;
        let mut grad = vec![0.0; old.num_params()];
        for (w, gi) in objective.dlogp.iter().zip(&grads) {
            for (acc, x) in grad.iter_mut().zip(gi) {
                *acc += w * x;
            }
        }
        Ok(PromptOutcome {
            objective,
            grad,
            rewards,
            valid,
        })
    }

    /// Sample, score, and apply one update for a batch of prompts.
    pub fn step(&mut self, batch: &[QaRecord], epoch: usize) -> Result<StepRecord, GrpoError> {
        if batch.is_empty() {
            return Err(GrpoError::EmptyDataset);
        }
        let gts = batch
            .iter()
            .map(|r| self.ground_truth(r))
            .collect::<Result<Vec<_>, _>>()?;
        let old = self.policy.clone();
        let outcomes: Vec<PromptOutcome> = batch
            .par_iter()
            .zip(gts.par_iter())
            .map(|(record, gt)| self.rollout(&old, record, gt))
            .collect::<Result<_, _>>()?;

        let n_prompts = outcomes.len() as f64;
        let mut grad = vec![0.0; old.num_params()];
        let (mut reward_sum, mut adv_sum, mut kl_sum, mut clipped, mut valid, mut count) =
            (0.0, 0.0, 0.0, 0usize, 0usize, 0usize);
        let mut objective = 0.0;
        for o in &outcomes {
            for (acc, x) in grad.iter_mut().zip(&o.grad) {
                *acc += x / n_prompts;
            }
            objective += o.objective.objective / n_prompts;
            reward_sum += o.rewards.iter().sum::<f64>();
            valid += o.valid;
            for t in &o.objective.per_sample {
                adv_sum += t.advantage.abs();
                kl_sum += t.kl;
                clipped += usize::from(t.clipped);
                count += 1;
            }
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(GrpoError::NonFinite { what: "gradient", index });
        }
        self.policy.apply_step(&grad, self.cfg.learning_rate);
        let n = count as f64;
        let record = StepRecord {
            step: self.step,
            epoch,
            mean_reward: reward_sum / n,
            mean_advantage_abs: adv_sum / n,
            mean_kl: kl_sum / n,
            clip_fraction: clipped as f64 / n,
            objective,
            format_valid_fraction: valid as f64 / n,
        };
        self.step += 1;
        Ok(record)
    }

    /// Full run: epochs over shuffled prompts in batches, up to `max_steps`.
    pub fn run(&mut self, dataset: &[QaRecord]) -> Result<TrainLog, GrpoError> {
        self.run_with(dataset, |_, _| {})
    }

    /// Like [`run`](Self::run), calling `observe` after every step.
    pub fn run_with<F>(&mut self, dataset: &[QaRecord], mut observe: F) -> Result<TrainLog, GrpoError>
    where
        F: FnMut(&Self, &StepRecord),
    {
        if dataset.is_empty() {
            return Err(GrpoError::EmptyDataset);
        }
        let mut log = TrainLog::default();
        for epoch in 0..self.cfg.epochs {
            let order = shuffled_indices(dataset.len(), &mut self.seeds.stream("shuffle", epoch as u64));
            for chunk in order.chunks(self.cfg.batch_size_prompts) {
                if self.cfg.max_steps.is_some_and(|m| self.step >= m) {
                    return Ok(log);
                }
                let batch: Vec<QaRecord> = chunk.iter().map(|&i| dataset[i].clone()).collect();
                let rec = self.step(&batch, epoch)?;
                observe(self, &rec);
                log.steps.push(rec);
            }
        }
        Ok(log)
    }
}

/// A uniformly random permutation of `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Convenience wrapper: train `policy` in place and return the log.
pub fn train_rlvr<P: Policy>(
    policy: &mut P,
    dataset: &[QaRecord],
    spec: &RewardSpec,
    cfg: &GrpoConfig,
) -> Result<TrainLog, GrpoError> {
    let mut trainer = GrpoTrainer::new(policy.clone(), spec.clone(), cfg.clone())?;
    let log = trainer.run(dataset)?;
    *policy = trainer.into_policy();
    Ok(log)
}
