//! Toy policies with exact log-probabilities and closed-form gradients.
//!
//! Two families:
//!
//! * `SubsetBernoulli` keeps one logit per vocabulary entry and includes
//!   entry `k` independently with probability `σ(θ_k / T)`.
//! * `CategoricalSequence` keeps a row of logits per position and draws one
//!   vocabulary symbol per position from `softmax(θ_p / T)`.
//!
//! Sampled choices are rendered to text through a fixed template so the
//! format gate and the task reward can be exercised independently.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::format::{render_sections, Section};
use crate::reward::{EntitySet, GateMode, TaskMetric, Vocabulary, VocabularyError};

/// Logits are kept within `[-LOGIT_CLAMP, LOGIT_CLAMP]`.
pub const LOGIT_CLAMP: f64 = 30.0;

/// Largest vocabulary for which subset enumeration is allowed.
pub const MAX_ENUMERATION: usize = 20;

/// Rendered answer text for an empty selection.
pub const EMPTY_ANSWER: &str = "none";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("parameter vector has {actual} entries, expected {expected}")]
    Shape { expected: usize, actual: usize },
    #[error("parameter {0} is not finite")]
    NonFinite(usize),
    #[error("response does not match policy kind {0:?}")]
    KindMismatch(PolicyKind),
    #[error("symbol {symbol} out of range at position {position}")]
    SymbolOutOfRange { position: usize, symbol: usize },
    #[error("selection belongs to a different vocabulary")]
    Vocabulary,
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("enumeration over {0} entries is too large")]
    TooLarge(usize),
    #[error(transparent)]
    VocabularyFile(#[from] VocabularyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    SubsetBernoulli,
    CategoricalSequence,
}

/// What a toy policy chose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    Subset(EntitySet),
    Sequence(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyResponse {
    pub choice: Choice,
    pub rendered_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    kind: PolicyKind,
    theta: Vec<f64>,
    vocab: Vocabulary,
    positions: usize,
}

/// `params_final.json` layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub kind: PolicyKind,
    pub theta: Vec<f64>,
    pub vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<usize>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)`, stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

fn check_temperature(t: f64) -> Result<(), PolicyError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(PolicyError::Temperature(t))
    }
}

impl PolicyParams {
    /// All-zero logits: every entity included with probability 1/2.
    pub fn subset_bernoulli(vocab: Vocabulary) -> Self {
        Self {
            kind: PolicyKind::SubsetBernoulli,
            theta: vec![0.0; vocab.len()],
            vocab,
            positions: 1,
        }
    }

    /// All-zero logits over `positions` rows of `vocab.len()` symbols.
    pub fn categorical_sequence(vocab: Vocabulary, positions: usize) -> Self {
        Self {
            kind: PolicyKind::CategoricalSequence,
            theta: vec![0.0; vocab.len() * positions],
            vocab,
            positions,
        }
    }

    pub fn from_theta(
        kind: PolicyKind,
        vocab: Vocabulary,
        positions: usize,
        theta: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        let positions = match kind {
            PolicyKind::SubsetBernoulli => 1,
            PolicyKind::CategoricalSequence => positions,
        };
        let expected = vocab.len() * positions;
        if theta.len() != expected {
            return Err(PolicyError::Shape {
                expected,
                actual: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(PolicyError::NonFinite(i));
        }
        let theta = theta.into_iter().map(|t| t.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).collect();
        Ok(Self {
            kind,
            theta,
            vocab,
            positions,
        })
    }

    pub fn from_file(file: ParamsFile) -> Result<Self, PolicyError> {
        let vocab = Vocabulary::new(file.dataset_name.unwrap_or_default(), &file.vocab)?;
        Self::from_theta(file.kind, vocab, file.positions.unwrap_or(1), file.theta)
    }

    pub fn to_file(&self) -> ParamsFile {
        ParamsFile {
            kind: self.kind,
            theta: self.theta.clone(),
            vocab: self.vocab.entries().to_vec(),
            dataset_name: Some(self.vocab.dataset_name().to_string()),
            positions: match self.kind {
                PolicyKind::SubsetBernoulli => None,
                PolicyKind::CategoricalSequence => Some(self.positions),
            },
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Replace the logits, clamping each into range.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<(), PolicyError> {
        if theta.len() != self.theta.len() {
            return Err(PolicyError::Shape {
                expected: self.theta.len(),
                actual: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(PolicyError::NonFinite(i));
        }
        for (dst, src) in self.theta.iter_mut().zip(theta) {
            *dst = src.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        }
        Ok(())
    }

    /// `θ ← clamp(θ + step·direction)`.
    pub fn apply_step(&mut self, direction: &[f64], step: f64) {
        debug_assert_eq!(direction.len(), self.theta.len());
        for (t, d) in self.theta.iter_mut().zip(direction) {
            *t = (*t + step * d).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        }
    }

    fn row(&self, position: usize) -> &[f64] {
        let k = self.vocab.len();
        &self.theta[position * k..(position + 1) * k]
    }

    /// Per-entity inclusion probabilities (`SubsetBernoulli`) or flattened
    /// per-position symbol probabilities (`CategoricalSequence`).
    pub fn probabilities(&self, temperature: f64) -> Vec<f64> {
        match self.kind {
            PolicyKind::SubsetBernoulli => self.theta.iter().map(|t| sigmoid(t / temperature)).collect(),
            PolicyKind::CategoricalSequence => (0..self.positions)
                .flat_map(|p| softmax(self.row(p), temperature))
                .collect(),
        }
    }

    /// Draw `g` independent choices.
    pub fn sample(&self, g: usize, temperature: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Choice>, PolicyError> {
        check_temperature(temperature)?;
        let probs = self.probabilities(temperature);
        let k = self.vocab.len();
        let mut out = Vec::with_capacity(g);
        for _ in 0..g {
            let choice = match self.kind {
                PolicyKind::SubsetBernoulli => {
                    let picked: Vec<usize> = probs
                        .iter()
                        .enumerate()
                        .filter_map(|(i, &p)| (rng.gen::<f64>() < p).then_some(i))
                        .collect();
                    Choice::Subset(self.vocab.entity_set(picked)?)
                }
                PolicyKind::CategoricalSequence => {
                    let seq = (0..self.positions)
                        .map(|p| {
                            let row = &probs[p * k..(p + 1) * k];
                            let u: f64 = rng.gen();
                            let mut acc = 0.0;
                            for (j, &q) in row.iter().enumerate() {
                                acc += q;
                                if u < acc {
                                    return j;
                                }
                            }
                            k - 1
                        })
                        .collect();
                    Choice::Sequence(seq)
                }
            };
            out.push(choice);
        }
        Ok(out)
    }

    /// Exact `log π(choice)` at `temperature` and its gradient with respect
    /// to the logits.
    pub fn logprob_and_grad(&self, choice: &Choice, temperature: f64) -> Result<(f64, Vec<f64>), PolicyError> {
        check_temperature(temperature)?;
        match (self.kind, choice) {
            (PolicyKind::SubsetBernoulli, Choice::Subset(set)) => {
                if !self.vocab.owns(set) {
                    return Err(PolicyError::Vocabulary);
                }
                let mut logp = 0.0;
                let mut grad = Vec::with_capacity(self.theta.len());
                for (k, &t) in self.theta.iter().enumerate() {
                    let z = t / temperature;
                    let y = if set.contains(k) { 1.0 } else { 0.0 };
                    logp += if set.contains(k) { log_sigmoid(z) } else { log_sigmoid(-z) };
                    grad.push((y - sigmoid(z)) / temperature);
                }
                Ok((logp, grad))
            }
            (PolicyKind::CategoricalSequence, Choice::Sequence(seq)) => {
                if seq.len() != self.positions {
                    return Err(PolicyError::Shape {
                        expected: self.positions,
                        actual: seq.len(),
                    });
                }
                let k = self.vocab.len();
                let mut logp = 0.0;
                let mut grad = vec![0.0; self.theta.len()];
                for (p, &s) in seq.iter().enumerate() {
                    if s >= k {
                        return Err(PolicyError::SymbolOutOfRange { position: p, symbol: s });
                    }
                    let row = self.row(p);
                    let lse = log_sum_exp(row, temperature);
                    logp += row[s] / temperature - lse;
                    for (j, g) in grad[p * k..(p + 1) * k].iter_mut().enumerate() {
                        let q = (row[j] / temperature - lse).exp();
                        let y = if j == s { 1.0 } else { 0.0 };
                        *g = (y - q) / temperature;
                    }
                }
                Ok((logp, grad))
            }
            _ => Err(PolicyError::KindMismatch(self.kind)),
        }
    }

    pub fn logprob(&self, choice: &Choice, temperature: f64) -> Result<f64, PolicyError> {
        self.logprob_and_grad(choice, temperature).map(|(l, _)| l)
    }

    /// Entities named by a choice.
    pub fn selection(&self, choice: &Choice) -> Result<EntitySet, PolicyError> {
        match choice {
            Choice::Subset(set) => Ok(set.clone()),
            Choice::Sequence(seq) => Ok(self.vocab.entity_set(seq.iter().copied())?),
        }
    }

    /// Most likely choice.
    pub fn mode_choice(&self) -> Choice {
        match self.kind {
            PolicyKind::SubsetBernoulli => Choice::Subset(
                self.vocab
                    .entity_set((0..self.theta.len()).filter(|&k| self.theta[k] > 0.0))
                    .expect("indices in range"),
            ),
            PolicyKind::CategoricalSequence => Choice::Sequence(
                (0..self.positions)
                    .map(|p| {
                        let row = self.row(p);
                        // first maximum
                        (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
                    })
                    .collect(),
            ),
        }
    }

    /// Render a choice to response text.
    pub fn render(&self, choice: &Choice, mode: GateMode) -> Result<String, PolicyError> {
        Ok(render_response(&self.selection(choice)?, mode, &self.vocab))
    }

    /// Exact expected task reward of the raw selection (no format gate) under
    /// a `SubsetBernoulli` policy, by enumerating every subset.
    pub fn expected_set_reward(&self, gt: &EntitySet, metric: TaskMetric, temperature: f64) -> Result<f64, PolicyError> {
        check_temperature(temperature)?;
        if self.kind != PolicyKind::SubsetBernoulli {
            return Err(PolicyError::KindMismatch(self.kind));
        }
        let k = self.vocab.len();
        if k > MAX_ENUMERATION {
            return Err(PolicyError::TooLarge(k));
        }
        if !self.vocab.owns(gt) {
            return Err(PolicyError::Vocabulary);
        }
        let probs = self.probabilities(temperature);
        let mut total = 0.0;
        for mask in 0u32..(1u32 << k) {
            let mut p = 1.0;
            for (i, &q) in probs.iter().enumerate() {
                p *= if mask >> i & 1 == 1 { q } else { 1.0 - q };
            }
            if p == 0.0 {
                continue;
            }
            let pred = self
                .vocab
                .entity_set((0..k).filter(|i| mask >> i & 1 == 1))
                .expect("in range");
            let r = crate::reward::task_reward(&pred, gt, metric).map_err(|_| PolicyError::Vocabulary)?;
            total += p * r;
        }
        Ok(total)
    }
}

fn log_sum_exp(row: &[f64], temperature: f64) -> f64 {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / temperature));
    m + row.iter().map(|&x| (x / temperature - m).exp()).sum::<f64>().ln()
}

fn softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let lse = log_sum_exp(row, temperature);
    row.iter().map(|&x| (x / temperature - lse).exp()).collect()
}

/// Template rendering of a selection.
///
/// `Coa` produces a four-section response with fixed filler text and the
/// selected entities comma-separated in the answer (`none` when empty);
/// `Cot` produces thought + answer; `None` produces the bare list.
pub fn render_response(selection: &EntitySet, mode: GateMode, vocab: &Vocabulary) -> String {
    let labels: Vec<&str> = vocab.labels(selection).collect();
    let list = labels.join(", ");
    let answer = if labels.is_empty() { EMPTY_ANSWER } else { list.as_str() };
    let thought = format!(
        "Kept {} of {} candidates whose cues are visible.",
        labels.len(),
        vocab.len()
    );
    match mode {
        GateMode::Coa => render_sections(
            [
                (
                    Section::GeneralDescription,
                    "Elongated metallic shapes against soft pink and red textures.",
                ),
                (
                    Section::Evidence,
                    "Each candidate in the list was compared with the visible shapes.",
                ),
                (Section::Thought, thought.as_str()),
                (Section::Answer, answer),
            ]
            .into_iter(),
        ),
        GateMode::Cot => {
            render_sections([(Section::Thought, thought.as_str()), (Section::Answer, answer)].into_iter())
        }
        GateMode::None => list,
    }
}

/// One gradient-descent step on `-log π(reference)` at temperature 1.
pub fn sft_step(params: &PolicyParams, reference: &Choice, learning_rate: f64) -> Result<PolicyParams, PolicyError> {
    let (_, grad) = params.logprob_and_grad(reference, 1.0)?;
    let mut next = params.clone();
    next.apply_step(&grad, learning_rate);
    Ok(next)
}

/// One step on the mean negative log-likelihood of a batch of references.
/// Returns the mean NLL before the step.
pub fn sft_batch_step(params: &mut PolicyParams, references: &[Choice], learning_rate: f64) -> Result<f64, PolicyError> {
    if references.is_empty() {
        return Ok(0.0);
    }
    let mut grad = vec![0.0; params.num_params()];
    let mut nll = 0.0;
    for r in references {
        let (lp, g) = params.logprob_and_grad(r, 1.0)?;
        nll -= lp;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    let n = references.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    params.apply_step(&grad, learning_rate);
    Ok(nll / n)
}
