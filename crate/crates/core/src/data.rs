//! Annotation → QA conversion, seeded splits, and cold-start manifests.
//!
//! Record files are JSON Lines. Unknown fields on QA and cold-start records
//! are kept and written back out unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::format::{self, FormatMode, FormatReport};
use crate::grpo::shuffled_indices;
use crate::reward::{Vocabulary, VocabularyError};
use crate::rng::SeedTree;
use crate::text::canonical_phrase;

/// Placeholder in question templates replaced by the numbered candidate list.
pub const CANDIDATES_PLACEHOLDER: &str = "{candidates}";

/// Default recognition prompt. Not the wording used for any published
/// result; supply your own template for real runs.
pub const DEFAULT_QA_TEMPLATE: &str = "Which of the following instruments appear in the image? \
Choose only from the candidate list.\nCandidates:\n{candidates}\n\
Answer with the names of all instruments that appear, separated by commas.";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error("template is missing the {CANDIDATES_PLACEHOLDER} placeholder")]
    Template,
    #[error("need {needed} records ({n_train} train + {n_test} test), only {available} available")]
    InsufficientRecords {
        needed: usize,
        n_train: usize,
        n_test: usize,
        available: usize,
    },
    #[error("ratios must be non-negative and sum to 1, got {0:?}")]
    Ratios(Vec<f64>),
    #[error("no images given")]
    NoImages,
    #[error("template pool for {0:?} is empty")]
    EmptyPool(QuestionType),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has no split assigned")]
    MissingSplit(String),
    #[error("record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Known dataset layouts and their class counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Endovis2018,
    Cholect50,
    #[default]
    Generic,
}

impl DatasetKind {
    pub fn expected_classes(self) -> Option<usize> {
        match self {
            DatasetKind::Endovis2018 => Some(10),
            DatasetKind::Cholect50 => Some(28),
            DatasetKind::Generic => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Endovis2018 => "endovis2018",
            DatasetKind::Cholect50 => "cholect50",
            DatasetKind::Generic => "generic",
        }
    }

    pub fn check_vocabulary(self, vocab: &Vocabulary) -> Result<(), VocabularyError> {
        match self.expected_classes() {
            Some(n) => vocab.expect_size(n),
            None => Ok(()),
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "endovis2018" => Ok(DatasetKind::Endovis2018),
            "cholect50" => Ok(DatasetKind::Cholect50),
            "generic" => Ok(DatasetKind::Generic),
            other => Err(format!("unknown dataset `{other}`")),
        }
    }
}

/// One recognition sample posed as a question over a candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub image: String,
    pub dataset: String,
    pub question: String,
    pub vocabulary: Vec<String>,
    pub answer_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl QaRecord {
    pub fn vocabulary(&self) -> Result<Vocabulary, VocabularyError> {
        Vocabulary::new(self.dataset.clone(), &self.vocabulary)
    }

    /// Check the answer set against the vocabulary and the vocabulary size
    /// against `kind`.
    pub fn validate(&self, kind: DatasetKind) -> Result<(), DataError> {
        let invalid = |message: String| DataError::InvalidRecord {
            id: self.id.clone(),
            message,
        };
        let vocab = self.vocabulary().map_err(|e| invalid(e.to_string()))?;
        kind.check_vocabulary(&vocab).map_err(|e| invalid(e.to_string()))?;
        vocab
            .set_from_labels(&self.answer_set)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

/// One row of a recognition annotation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub frame_id: String,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub reason: String,
    pub unmapped: Vec<String>,
}

/// Every input frame lands in exactly one of the two lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionOutcome {
    pub records: Vec<QaRecord>,
    pub failures: Vec<FrameFailure>,
}

/// Render `template`, substituting the numbered candidate list.
pub fn render_question(template: &str, vocab: &Vocabulary) -> Result<String, DataError> {
    if !template.contains(CANDIDATES_PLACEHOLDER) {
        return Err(DataError::Template);
    }
    let list = vocab
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{}. {e}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(template.replace(CANDIDATES_PLACEHOLDER, &list))
}

pub fn convert_annotations(
    rows: &[AnnotationRow],
    vocab: &Vocabulary,
    template: &str,
    kind: DatasetKind,
) -> Result<ConversionOutcome, DataError> {
    kind.check_vocabulary(vocab)?;
    let question = render_question(template, vocab)?;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].frame_id.cmp(&rows[b].frame_id).then(a.cmp(&b)));

    let mut seen = BTreeSet::new();
    let duplicate: Vec<bool> = order.iter().map(|&i| !seen.insert(rows[i].frame_id.as_str())).collect();

    let results: Vec<Result<QaRecord, FrameFailure>> = order
        .par_iter()
        .zip(duplicate.par_iter())
        .map(|(&i, &dup)| {
            let row = &rows[i];
            if dup {
                return Err(FrameFailure {
                    frame_id: row.frame_id.clone(),
                    reason: "duplicate frame id".into(),
                    unmapped: Vec::new(),
                });
            }
            let mut present = BTreeSet::new();
            let mut unmapped = Vec::new();
            for label in &row.labels {
                match vocab.index_of(label) {
                    Some(idx) => {
                        present.insert(idx);
                    }
                    None => unmapped.push(label.clone()),
                }
            }
            if !unmapped.is_empty() {
                return Err(FrameFailure {
                    frame_id: row.frame_id.clone(),
                    reason: "labels not in vocabulary".into(),
                    unmapped,
                });
            }
            Ok(QaRecord {
                id: row.frame_id.clone(),
                image: row.image.clone().unwrap_or_else(|| row.frame_id.clone()),
                dataset: vocab.dataset_name().to_string(),
                question: question.clone(),
                vocabulary: vocab.entries().to_vec(),
                answer_set: present.iter().map(|&i| vocab.entries()[i].clone()).collect(),
                split: row.split,
                extra: BTreeMap::new(),
            })
        })
        .collect();

    let mut outcome = ConversionOutcome {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok(rec) => outcome.records.push(rec),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSets {
    pub train: Vec<QaRecord>,
    pub test: Vec<QaRecord>,
}

/// Uniform sampling without replacement, driven only by `spec.seed`. Each
/// side keeps the input order of its members.
pub fn sample_split(records: &[QaRecord], spec: &SplitSpec) -> Result<SplitSets, DataError> {
    let needed = spec.n_train + spec.n_test;
    if needed > records.len() {
        return Err(DataError::InsufficientRecords {
            needed,
            n_train: spec.n_train,
            n_test: spec.n_test,
            available: records.len(),
        });
    }
    let order = shuffled_indices(records.len(), &mut SeedTree::new(spec.seed).stream("split", 0));
    let take = |idx: &[usize], split: Split| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| QaRecord {
                split: Some(split),
                ..records[i].clone()
            })
            .collect::<Vec<_>>()
    };
    Ok(SplitSets {
        train: take(&order[..spec.n_train], Split::Train),
        test: take(&order[spec.n_train..needed], Split::Test),
    })
}

/// Partition by the split each record already carries (native splits).
pub fn native_split(records: &[QaRecord]) -> Result<SplitSets, DataError> {
    let mut sets = SplitSets {
        train: Vec::new(),
        test: Vec::new(),
    };
    for r in records {
        match r.split {
            Some(Split::Train) => sets.train.push(r.clone()),
            Some(Split::Test) => sets.test.push(r.clone()),
            None => return Err(DataError::MissingSplit(r.id.clone())),
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Description,
    Recognition,
    Reasoning,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [
        QuestionType::Description,
        QuestionType::Recognition,
        QuestionType::Reasoning,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdStartRecord {
    pub id: String,
    pub image: String,
    pub title: String,
    pub question_type: QuestionType,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image: String,
    #[serde(default)]
    pub title: String,
}

/// Question templates per type; `{title}` is replaced by the video title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplatePools {
    pub description: Vec<String>,
    pub recognition: Vec<String>,
    pub reasoning: Vec<String>,
}

impl TemplatePools {
    pub fn pool(&self, t: QuestionType) -> &[String] {
        match t {
            QuestionType::Description => &self.description,
            QuestionType::Recognition => &self.recognition,
            QuestionType::Reasoning => &self.reasoning,
        }
    }
}

impl Default for TemplatePools {
    /// Placeholder wording, not taken from any published prompt set.
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            description: v(&[
                "This frame is from the video \"{title}\". Describe the scene in detail.",
                "Context: {title}. What is happening in this image?",
            ]),
            recognition: v(&[
                "This frame is from the video \"{title}\". Which instruments and anatomical structures are visible?",
                "Context: {title}. List the surgical tools you can identify.",
            ]),
            reasoning: v(&[
                "This frame is from the video \"{title}\". What is the surgeon most likely trying to achieve at this moment?",
                "Context: {title}. Is there anything unusual or risky in this scene? Explain.",
            ]),
        }
    }
}

/// Largest-remainder apportionment of `n` items over `ratios`. Ties in the
/// fractional part go to the earlier entry.
pub fn apportion(n: usize, ratios: &[f64]) -> Result<Vec<usize>, DataError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::Ratios(ratios.to_vec()));
    }
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

pub fn build_cold_start_manifest(
    images: &[ImageEntry],
    ratios: [f64; 3],
    seed: u64,
    templates: &TemplatePools,
) -> Result<Vec<ColdStartRecord>, DataError> {
    if images.is_empty() {
        return Err(DataError::NoImages);
    }
    let counts = apportion(images.len(), &ratios)?;
    for (t, &c) in QuestionType::ALL.iter().zip(&counts) {
        if c > 0 && templates.pool(*t).is_empty() {
            return Err(DataError::EmptyPool(*t));
        }
    }
    let seeds = SeedTree::new(seed);
    let mut types: Vec<QuestionType> = QuestionType::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(t, &c)| std::iter::repeat_n(*t, c))
        .collect();
    let perm = shuffled_indices(types.len(), &mut seeds.stream("coldstart-types", 0));
    types = perm.into_iter().map(|i| types[i]).collect();

    let mut pick = seeds.stream("coldstart-template", 0);
    let width = images.len().to_string().len().max(5);
    Ok(images
        .iter()
        .zip(types)
        .enumerate()
        .map(|(i, (img, qt))| {
            use rand::Rng;
            let pool = templates.pool(qt);
            let template = &pool[pick.gen_range(0..pool.len())];
            ColdStartRecord {
                id: format!("cs-{i:0width$}"),
                image: img.image.clone(),
                title: img.title.clone(),
                question_type: qt,
                question: template.replace("{title}", &img.title),
                response: None,
                extra: BTreeMap::new(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedResponse {
    pub id: String,
    pub report: FormatReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportReport {
    /// The manifest, with conforming responses attached.
    pub records: Vec<ColdStartRecord>,
    pub accepted: usize,
    pub rejects: Vec<RejectedResponse>,
    /// Response ids with no manifest entry.
    pub orphans: Vec<String>,
}

/// Attach externally generated responses that pass the four-section format
/// gate. Only format is checked.
pub fn import_cold_start_responses(
    manifest: &[ColdStartRecord],
    responses: &[(String, String)],
) -> Result<ImportReport, DataError> {
    let mut index = BTreeMap::new();
    for (i, r) in manifest.iter().enumerate() {
        if index.insert(r.id.as_str(), i).is_some() {
            return Err(DataError::DuplicateId(r.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for (id, _) in responses {
        if !seen.insert(id.as_str()) {
            return Err(DataError::DuplicateId(id.clone()));
        }
    }
    let mut records = manifest.to_vec();
    let mut report = ImportReport {
        records: Vec::new(),
        accepted: 0,
        rejects: Vec::new(),
        orphans: Vec::new(),
    };
    for (id, text) in responses {
        let Some(&i) = index.get(id.as_str()) else {
            report.orphans.push(id.clone());
            continue;
        };
        let verdict = format::validate(text, FormatMode::Coa);
        if verdict.valid {
            records[i].response = Some(text.clone());
            report.accepted += 1;
        } else {
            report.rejects.push(RejectedResponse {
                id: id.clone(),
                report: verdict,
            });
        }
    }
    report.records = records;
    Ok(report)
}

/// Read one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DataError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<(), DataError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|source| DataError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Canonical form of a raw annotation label.
pub fn canonical_label(raw: &str) -> String {
    canonical_phrase(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab10() -> Vocabulary {
        Vocabulary::new(
            "endovis2018",
            [
                "bipolar forceps",
                "prograsp forceps",
                "large needle driver",
                "monopolar curved scissors",
                "ultrasound probe",
                "suction instrument",
                "clip applier",
                "grasper",
                "hook",
                "clamp",
            ],
        )
        .unwrap()
    }

    fn row(id: &str, labels: &[&str]) -> AnnotationRow {
        AnnotationRow {
            frame_id: id.into(),
            image: None,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            split: None,
        }
    }

    #[test]
    fn conversion_examples() {
        let v = vocab10();
        let rows = [row("f2", &[]), row("f1", &["grasper", "Hook ", "grasper"])];
        let out = convert_annotations(&rows, &v, DEFAULT_QA_TEMPLATE, DatasetKind::Endovis2018).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.records[0].id, "f1");
        assert_eq!(out.records[0].answer_set, ["grasper", "hook"]);
        assert_eq!(out.records[0].vocabulary.len(), 10);
        for e in v.entries() {
            assert!(out.records[0].question.contains(e.as_str()));
        }
        assert!(out.records[0].question.contains("10. clamp"));
        assert!(out.records[1].answer_set.is_empty());
        assert!(out.records.iter().all(|r| r.validate(DatasetKind::Endovis2018).is_ok()));
    }

    #[test]
    fn conversion_reports_unmapped_and_duplicates() {
        let v = vocab10();
        let rows = [row("a", &["grasper", "laser"]), row("b", &["hook"]), row("b", &[])];
        let out = convert_annotations(&rows, &v, DEFAULT_QA_TEMPLATE, DatasetKind::Generic).unwrap();
        assert_eq!(out.records.len() + out.failures.len(), rows.len());
        assert_eq!(out.failures[0].unmapped, ["laser"]);
        assert_eq!(out.failures[1].reason, "duplicate frame id");
    }

    #[test]
    fn conversion_enforces_dataset_size_and_template() {
        let v = vocab10();
        assert!(matches!(
            convert_annotations(&[], &v, DEFAULT_QA_TEMPLATE, DatasetKind::Cholect50),
            Err(DataError::Vocabulary(VocabularyError::SizeMismatch { expected: 28, .. }))
        ));
        assert!(matches!(
            convert_annotations(&[], &v, "no placeholder", DatasetKind::Generic),
            Err(DataError::Template)
        ));
    }

    fn records(n: usize) -> Vec<QaRecord> {
        let v = vocab10();
        let rows: Vec<_> = (0..n).map(|i| row(&format!("f{i:05}"), &["hook"])).collect();
        convert_annotations(&rows, &v, DEFAULT_QA_TEMPLATE, DatasetKind::Endovis2018)
            .unwrap()
            .records
    }

    #[test]
    fn split_boundaries() {
        let recs = records(20);
        let s = sample_split(&recs, &SplitSpec { n_train: 0, n_test: 20, seed: 1 }).unwrap();
        assert!(s.train.is_empty());
        assert_eq!(s.test.len(), 20);
        assert!(s.test.iter().all(|r| r.split == Some(Split::Test)));
        assert!(matches!(
            sample_split(&recs, &SplitSpec { n_train: 15, n_test: 6, seed: 1 }),
            Err(DataError::InsufficientRecords { needed: 21, available: 20, .. })
        ));
    }

    #[test]
    fn native_split_requires_assignment() {
        let mut recs = records(3);
        recs[0].split = Some(Split::Train);
        recs[1].split = Some(Split::Test);
        assert!(matches!(native_split(&recs), Err(DataError::MissingSplit(_))));
        recs[2].split = Some(Split::Train);
        let s = native_split(&recs).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (2, 1));
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10_000, &[0.375, 0.375, 0.25]).unwrap(), [3750, 3750, 2500]);
        assert_eq!(apportion(3, &[1.0, 0.0, 0.0]).unwrap(), [3, 0, 0]);
        assert_eq!(apportion(10, &[0.375, 0.375, 0.25]).unwrap(), [4, 4, 2]);
        assert!(apportion(10, &[0.5, 0.6]).is_err());
        assert!(apportion(10, &[1.5, -0.5]).is_err());
    }

    #[test]
    fn manifest_counts_and_errors() {
        let images: Vec<ImageEntry> = (0..10)
            .map(|i| ImageEntry {
                image: format!("img{i}.jpg"),
                title: "Lap chole".into(),
            })
            .collect();
        let m = build_cold_start_manifest(&images, [0.375, 0.375, 0.25], 3, &TemplatePools::default()).unwrap();
        let count = |t| m.iter().filter(|r| r.question_type == t).count();
        assert_eq!(
            (count(QuestionType::Description), count(QuestionType::Recognition), count(QuestionType::Reasoning)),
            (4, 4, 2)
        );
        assert!(m.iter().all(|r| r.question.contains("Lap chole") && r.response.is_none()));
        assert_eq!(m, build_cold_start_manifest(&images, [0.375, 0.375, 0.25], 3, &TemplatePools::default()).unwrap());
        assert!(matches!(
            build_cold_start_manifest(&[], [1.0, 0.0, 0.0], 0, &TemplatePools::default()),
            Err(DataError::NoImages)
        ));
        let pools = TemplatePools {
            reasoning: vec![],
            ..Default::default()
        };
        assert!(matches!(
            build_cold_start_manifest(&images, [0.375, 0.375, 0.25], 0, &pools),
            Err(DataError::EmptyPool(QuestionType::Reasoning))
        ));
        assert!(build_cold_start_manifest(&images, [0.5, 0.5, 0.0], 0, &pools).is_ok());
    }

    #[test]
    fn import_gate() {
        let images = [ImageEntry {
            image: "a.jpg".into(),
            title: "t".into(),
        }, ImageEntry {
            image: "b.jpg".into(),
            title: "t".into(),
        }];
        let m = build_cold_start_manifest(&images, [1.0, 0.0, 0.0], 0, &TemplatePools::default()).unwrap();
        let valid = "<general description>pink</general description><evidence>e</evidence><thought>t</thought><answer>a</answer>";
        let responses = vec![
            (m[0].id.clone(), valid.to_string()),
            (m[1].id.clone(), "<thought>t</thought><answer>a</answer>".to_string()),
            ("ghost".to_string(), valid.to_string()),
        ];
        let rep = import_cold_start_responses(&m, &responses).unwrap();
        assert_eq!(rep.accepted, 1);
        assert_eq!(rep.records[0].response.as_deref(), Some(valid));
        assert!(rep.records[1].response.is_none());
        assert_eq!(rep.rejects.len(), 1);
        assert_eq!(rep.rejects[0].report.violations.len(), 2);
        assert_eq!(rep.orphans, ["ghost"]);
        let dup = vec![(m[0].id.clone(), valid.to_string()), (m[0].id.clone(), valid.to_string())];
        assert!(matches!(import_cold_start_responses(&m, &dup), Err(DataError::DuplicateId(_))));
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let line = r#"{"id":"x","image":"x.png","dataset":"d","question":"q","vocabulary":["a","b"],"answer_set":["a"],"split":"train","source":{"video":3}}"#;
        let recs: Vec<QaRecord> = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(recs[0].extra["source"]["video"], 3);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        let back: Vec<QaRecord> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn record_validation_catches_bad_answers() {
        let mut r = records(1).remove(0);
        r.answer_set.push("laser".into());
        assert!(r.validate(DatasetKind::Generic).is_err());
    }
}
