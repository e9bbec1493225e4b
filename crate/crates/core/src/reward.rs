//! Verifiable rewards over a closed entity vocabulary.
//!
//! The scalar reward consumed by GRPO is the task reward of the extracted
//! answer, gated on format conformance: any response that fails the format
//! check scores exactly zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::format::{self, FormatMode};
use crate::text::{canonical_phrase, FoldedText, Phrase};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabularyError {
    #[error("vocabulary is empty")]
    Empty,
    #[error("vocabulary entry {0} is empty")]
    EmptyEntry(usize),
    #[error("vocabulary entry `{0}` contains angle brackets")]
    InvalidEntry(String),
    #[error("duplicate vocabulary entry `{0}`")]
    Duplicate(String),
    #[error("`{0}` is not in the vocabulary")]
    UnknownLabel(String),
    #[error("index {index} out of range for vocabulary of {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("dataset `{dataset}` expects {expected} classes, vocabulary has {actual}")]
    SizeMismatch {
        dataset: String,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewardError {
    #[error("prediction and ground truth come from different vocabularies")]
    VocabularyMismatch,
}

/// Ordered, canonicalized candidate list. Entry order defines class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    dataset_name: String,
    entries: Vec<String>,
    key: u64,
}

/// On-disk form: `{"dataset_name": ..., "entries": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub dataset_name: String,
    pub entries: Vec<String>,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = VocabularyError;

    fn try_from(f: VocabularyFile) -> Result<Self, Self::Error> {
        Vocabulary::new(f.dataset_name, f.entries)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            dataset_name: v.dataset_name,
            entries: v.entries,
        }
    }
}

impl Vocabulary {
    pub fn new<I, S>(dataset_name: impl Into<String>, entries: I) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let mut canon = Vec::new();
        for (i, e) in entries.into_iter().enumerate() {
            let c = canonical_phrase(e.as_ref());
            if c.is_empty() {
                return Err(VocabularyError::EmptyEntry(i));
            }
            if c.contains(['<', '>']) {
                return Err(VocabularyError::InvalidEntry(c));
            }
            if !seen.insert(c.clone()) {
                return Err(VocabularyError::Duplicate(c));
            }
            canon.push(c);
        }
        if canon.is_empty() {
            return Err(VocabularyError::Empty);
        }
        let mut hasher = Sha256::new();
        for e in &canon {
            hasher.update(e.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let key = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        Ok(Self {
            dataset_name: dataset_name.into(),
            entries: canon,
            key,
        })
    }

    pub fn dataset_name(&self) -> &str {
        &self.dataset_name
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let c = canonical_phrase(label);
        self.entries.iter().position(|e| *e == c)
    }

    pub fn expect_size(&self, expected: usize) -> Result<(), VocabularyError> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(VocabularyError::SizeMismatch {
                dataset: self.dataset_name.clone(),
                expected,
                actual: self.len(),
            })
        }
    }

    pub fn empty_set(&self) -> EntitySet {
        EntitySet {
            members: BTreeSet::new(),
            vocab_len: self.len(),
            vocab_key: self.key,
        }
    }

    pub fn entity_set<I: IntoIterator<Item = usize>>(&self, indices: I) -> Result<EntitySet, VocabularyError> {
        let mut set = self.empty_set();
        for index in indices {
            if index >= self.len() {
                return Err(VocabularyError::OutOfRange {
                    index,
                    len: self.len(),
                });
            }
            set.members.insert(index);
        }
        Ok(set)
    }

    /// Set from label strings, canonicalizing each one.
    pub fn set_from_labels<I, S>(&self, labels: I) -> Result<EntitySet, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = self.empty_set();
        for l in labels {
            let idx = self
                .index_of(l.as_ref())
                .ok_or_else(|| VocabularyError::UnknownLabel(l.as_ref().to_string()))?;
            set.members.insert(idx);
        }
        Ok(set)
    }

    /// Labels of `set` in vocabulary order.
    pub fn labels<'a>(&'a self, set: &'a EntitySet) -> impl Iterator<Item = &'a str> + 'a {
        set.iter().map(move |i| self.entries[i].as_str())
    }

    pub fn owns(&self, set: &EntitySet) -> bool {
        set.vocab_key == self.key && set.vocab_len == self.len()
    }
}

/// A set of vocabulary indices, tagged with the vocabulary it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntitySet {
    members: BTreeSet<usize>,
    vocab_len: usize,
    vocab_key: u64,
}

impl EntitySet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    pub fn same_vocabulary(&self, other: &EntitySet) -> bool {
        self.vocab_key == other.vocab_key && self.vocab_len == other.vocab_len
    }

    pub fn intersection_len(&self, other: &EntitySet) -> Result<usize, RewardError> {
        if !self.same_vocabulary(other) {
            return Err(RewardError::VocabularyMismatch);
        }
        Ok(self.members.intersection(&other.members).count())
    }

    /// Copy with `index` added. Panics if `index` is out of range.
    pub fn with(&self, index: usize) -> EntitySet {
        assert!(index < self.vocab_len, "index {index} out of range");
        let mut out = self.clone();
        out.members.insert(index);
        out
    }
}

/// Vocabulary entries mentioned in `answer_text`.
///
/// Matching is case-insensitive at word boundaries. Overlapping candidates
/// are resolved longest-first (then leftmost), and characters claimed by an
/// accepted match are unavailable to others.
pub fn extract_entities(answer_text: &str, vocab: &Vocabulary) -> EntitySet {
    let folded = FoldedText::new(answer_text);
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (idx, entry) in vocab.entries().iter().enumerate() {
        for (start, end) in Phrase::new(entry).occurrences(&folded) {
            candidates.push((start, end, idx));
        }
    }
    candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut set = vocab.empty_set();
    for (start, end, idx) in candidates {
        if claimed.iter().any(|&(s, e)| start < e && s < end) {
            continue;
        }
        claimed.push((start, end));
        set.members.insert(idx);
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TaskMetric {
    #[default]
    #[serde(rename = "f1")]
    F1,
    #[serde(rename = "exact_match")]
    ExactMatch,
}

/// Set-level task reward in `[0, 1]`.
///
/// F1 is `2|pred ∩ gt| / (|pred| + |gt|)`, with two empty sets scoring 1.
pub fn task_reward(pred: &EntitySet, gt: &EntitySet, metric: TaskMetric) -> Result<f64, RewardError> {
    let hits = pred.intersection_len(gt)?;
    Ok(match metric {
        TaskMetric::F1 => {
            let denom = pred.len() + gt.len();
            if denom == 0 {
                1.0
            } else {
                (2 * hits) as f64 / denom as f64
            }
        }
        TaskMetric::ExactMatch => {
            if hits == pred.len() && hits == gt.len() {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Format gate applied before the task reward. `None` scores the raw text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    #[default]
    Coa,
    Cot,
    None,
}

impl GateMode {
    pub fn format_mode(self) -> Option<FormatMode> {
        match self {
            GateMode::Coa => Some(FormatMode::Coa),
            GateMode::Cot => Some(FormatMode::Cot),
            GateMode::None => None,
        }
    }
}

impl std::str::FromStr for GateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coa" => Ok(GateMode::Coa),
            "cot" => Ok(GateMode::Cot),
            "none" => Ok(GateMode::None),
            other => Err(format!("unknown format mode `{other}` (expected coa, cot or none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub task_metric: TaskMetric,
    pub format_mode: GateMode,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    pub reward: f64,
    pub format_valid: bool,
    pub pred: EntitySet,
}

impl RewardSpec {
    pub fn new(vocabulary: Vocabulary, task_metric: TaskMetric, format_mode: GateMode) -> Self {
        Self {
            task_metric,
            format_mode,
            vocabulary,
        }
    }

    /// Gate, extract, and score one response.
    pub fn score(&self, response_text: &str, gt: &EntitySet) -> Result<ScoredResponse, RewardError> {
        if !self.vocabulary.owns(gt) {
            return Err(RewardError::VocabularyMismatch);
        }
        let answer = match self.format_mode.format_mode() {
            Some(mode) => match format::extract_answer(response_text, mode) {
                Ok(a) => a,
                Err(_) => {
                    return Ok(ScoredResponse {
                        reward: 0.0,
                        format_valid: false,
                        pred: self.vocabulary.empty_set(),
                    })
                }
            },
            None => response_text.to_string(),
        };
        let pred = extract_entities(&answer, &self.vocabulary);
        let reward = task_reward(&pred, gt, self.task_metric)?;
        Ok(ScoredResponse {
            reward,
            format_valid: true,
            pred,
        })
    }
}

/// Gated scalar reward: the task reward if the response conforms to the
/// spec's format mode, otherwise 0.
pub fn composite_reward(response_text: &str, gt: &EntitySet, spec: &RewardSpec) -> Result<f64, RewardError> {
    spec.score(response_text, gt).map(|s| s.reward)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tools() -> Vocabulary {
        Vocabulary::new("t", ["grasper", "hook", "scissors", "needle", "needle driver"]).unwrap()
    }

    fn labels(v: &Vocabulary, s: &EntitySet) -> Vec<String> {
        v.labels(s).map(String::from).collect()
    }

    #[test]
    fn vocabulary_canonicalizes_and_rejects_duplicates() {
        let v = Vocabulary::new("x", [" Grasper", "Needle  Driver"]).unwrap();
        assert_eq!(v.entries(), ["grasper", "needle driver"]);
        assert_eq!(
            Vocabulary::new("x", ["hook", "Hook "]),
            Err(VocabularyError::Duplicate("hook".into()))
        );
        assert_eq!(Vocabulary::new("x", Vec::<String>::new()), Err(VocabularyError::Empty));
        assert!(v.expect_size(2).is_ok());
        assert!(v.expect_size(10).is_err());
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let v = tools();
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"dataset_name\":\"t\""));
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn extraction_examples() {
        let v = tools();
        assert_eq!(labels(&v, &extract_entities("Grasper and hook", &v)), ["grasper", "hook"]);
        assert_eq!(labels(&v, &extract_entities("needle driver", &v)), ["needle driver"]);
        assert!(extract_entities("no instruments visible", &v).is_empty());
        assert_eq!(
            labels(&v, &extract_entities("needle, then a needle driver", &v)),
            ["needle", "needle driver"]
        );
        assert!(extract_entities("hooks and graspers", &v).is_empty());
    }

    #[test]
    fn f1_examples() {
        let v = Vocabulary::new("abc", ["a", "b", "c"]).unwrap();
        let s = |l: &[&str]| v.set_from_labels(l).unwrap();
        assert_eq!(task_reward(&s(&["a", "b"]), &s(&["a", "c"]), TaskMetric::F1), Ok(0.5));
        assert_eq!(task_reward(&s(&["a"]), &s(&["a"]), TaskMetric::F1), Ok(1.0));
        assert_eq!(task_reward(&s(&["a"]), &s(&["a"]), TaskMetric::ExactMatch), Ok(1.0));
        assert_eq!(task_reward(&s(&[]), &s(&[]), TaskMetric::F1), Ok(1.0));
        assert_eq!(task_reward(&s(&["a"]), &s(&["b", "c"]), TaskMetric::F1), Ok(0.0));
        assert_eq!(task_reward(&s(&["a"]), &s(&[]), TaskMetric::F1), Ok(0.0));
        assert_eq!(task_reward(&s(&["a", "b"]), &s(&["a"]), TaskMetric::ExactMatch), Ok(0.0));
    }

    #[test]
    fn mismatched_vocabularies_rejected() {
        let v1 = Vocabulary::new("a", ["x", "y"]).unwrap();
        let v2 = Vocabulary::new("b", ["x", "z"]).unwrap();
        let p = v1.set_from_labels(["x"]).unwrap();
        let g = v2.set_from_labels(["x"]).unwrap();
        assert_eq!(task_reward(&p, &g, TaskMetric::F1), Err(RewardError::VocabularyMismatch));
        let spec = RewardSpec::new(v1, TaskMetric::F1, GateMode::None);
        assert!(composite_reward("x", &g, &spec).is_err());
    }

    #[test]
    fn composite_examples() {
        let v = tools();
        let gt = v.set_from_labels(["grasper", "hook"]).unwrap();
        let spec = RewardSpec::new(v.clone(), TaskMetric::F1, GateMode::Coa);
        let good = "<general description>metal rods</general description><evidence>two tools</evidence><thought>match</thought><answer>grasper, hook</answer>";
        assert_eq!(composite_reward(good, &gt, &spec), Ok(1.0));
        let gt1 = v.set_from_labels(["grasper"]).unwrap();
        assert_eq!(
            composite_reward("<thought>t</thought><answer>grasper</answer>", &gt1, &spec),
            Ok(0.0)
        );
        let none = RewardSpec::new(v.clone(), TaskMetric::F1, GateMode::None);
        assert_eq!(composite_reward("grasper, hook", &gt, &none), Ok(1.0));
        let cot = RewardSpec::new(v, TaskMetric::F1, GateMode::Cot);
        assert_eq!(
            composite_reward("<thought>t</thought><answer>grasper</answer>", &gt1, &cot),
            Ok(1.0)
        );
    }

    #[test]
    fn scored_response_reports_gate() {
        let v = tools();
        let gt = v.set_from_labels(["hook"]).unwrap();
        let spec = RewardSpec::new(v, TaskMetric::F1, GateMode::Coa);
        let s = spec.score("hook", &gt).unwrap();
        assert!(!s.format_valid);
        assert_eq!(s.reward, 0.0);
        assert!(s.pred.is_empty());
    }
}
