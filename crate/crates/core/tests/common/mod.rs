#![allow(dead_code)]

use std::collections::BTreeMap;

use coa_core::data::QaRecord;
use coa_core::metrics::EvalRecord;
use coa_core::Vocabulary;

pub const ENDOVIS: [&str; 10] = [
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
];

pub fn endovis_vocab() -> Vocabulary {
    Vocabulary::new("endovis2018", ENDOVIS).unwrap()
}

pub fn cholect_vocab() -> Vocabulary {
    let names: Vec<String> = (0..28).map(|i| format!("triplet {}", (b'a' + (i % 26) as u8) as char) + &"x".repeat(i / 26)).collect();
    Vocabulary::new("cholect50", names).unwrap()
}

pub fn qa_record(id: &str, vocab: &Vocabulary, answer: &[&str]) -> QaRecord {
    QaRecord {
        id: id.to_string(),
        image: format!("{id}.png"),
        dataset: vocab.dataset_name().to_string(),
        question: "Which candidates appear?".into(),
        vocabulary: vocab.entries().to_vec(),
        answer_set: answer.iter().map(|s| s.to_string()).collect(),
        split: None,
        extra: BTreeMap::new(),
    }
}

/// Central differences of `f` at `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xs = x.to_vec();
    (0..x.len())
        .map(|i| {
            xs[i] = x[i] + h;
            let up = f(&xs);
            xs[i] = x[i] - h;
            let down = f(&xs);
            xs[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or the absolute gap when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-8 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn is_tag_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == ' ' || c == '_' || c == '-'
}

/// Every `<name>` / `</name>` in `text` as (char start, char end, raw).
fn tag_tokens(chars: &[char]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '<' {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        if chars.get(j) == Some(&'/') {
            j += 1;
        }
        let name_start = j;
        let found = if chars.get(j).is_some_and(|c| c.is_ascii_alphabetic()) {
            loop {
                match chars.get(j) {
                    Some('>') if j - name_start <= 64 => break Some(j),
                    Some(&c) if is_tag_name_char(c) && j - name_start < 64 => j += 1,
                    _ => break None,
                }
            }
        } else {
            None
        };
        match found {
            Some(end) => {
                out.push((i, end + 1, chars[i..=end].iter().collect()));
                i = end + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// Independent validity check: the tag tokens are exactly the expected
/// open/close pairs in order, every body has non-whitespace content, and
/// only whitespace sits outside the sections.
pub fn oracle_valid(text: &str, sections: &[&str]) -> bool {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() > 65_536 {
        return false;
    }
    let tags = tag_tokens(&chars);
    let expected: Vec<String> = sections
        .iter()
        .flat_map(|s| [format!("<{s}>"), format!("</{s}>")])
        .collect();
    if tags.len() != expected.len() || tags.iter().zip(&expected).any(|(t, e)| &t.2 != e) {
        return false;
    }
    let blank = |a: usize, b: usize| chars[a..b].iter().all(|c| c.is_whitespace());
    let mut cursor = 0;
    for pair in tags.chunks(2) {
        let (open, close) = (&pair[0], &pair[1]);
        if !blank(cursor, open.0) || blank(open.1, close.0) {
            return false;
        }
        cursor = close.1;
    }
    blank(cursor, chars.len())
}

/// Brute-force confusion counts and metrics, computed record by record from
/// plain index lists.
pub struct BruteMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_cls: f64,
    pub per_class_f1: Vec<f64>,
}

pub fn brute_force_metrics(pairs: &[(Vec<usize>, Vec<usize>)], k: usize) -> BruteMetrics {
    let f = |p: f64, r: f64| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for (pred, gt) in pairs {
        let hits = pred.iter().filter(|x| gt.contains(x)).count() as f64;
        let (p, r) = match (pred.len(), gt.len()) {
            (0, 0) => (1.0, 1.0),
            (np, ng) => (
                if np == 0 { 0.0 } else { hits / np as f64 },
                if ng == 0 { 0.0 } else { hits / ng as f64 },
            ),
        };
        sp += p;
        sr += r;
        sf += if pred.is_empty() && gt.is_empty() { 1.0 } else { f(p, r) };
    }
    let n = pairs.len() as f64;
    let mut per_class_f1 = Vec::new();
    let mut included = Vec::new();
    for c in 0..k {
        let mut confusion = [[0usize; 2]; 2];
        for (pred, gt) in pairs {
            confusion[usize::from(gt.contains(&c))][usize::from(pred.contains(&c))] += 1;
        }
        let (tp, fp, fneg) = (confusion[1][1], confusion[0][1], confusion[1][0]);
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
        per_class_f1.push(f(p, r));
        if tp + fp + fneg > 0 {
            included.push(f(p, r));
        }
    }
    BruteMetrics {
        precision: sp / n,
        recall: sr / n,
        f1: sf / n,
        f1_cls: if included.is_empty() { 0.0 } else { included.iter().sum::<f64>() / included.len() as f64 },
        per_class_f1,
    }
}

pub fn eval_records(vocab: &Vocabulary, pairs: &[(Vec<usize>, Vec<usize>)]) -> Vec<EvalRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (p, g))| EvalRecord {
            id: i.to_string(),
            pred: vocab.entity_set(p.iter().copied()).unwrap(),
            gt: vocab.entity_set(g.iter().copied()).unwrap(),
        })
        .collect()
}

pub fn letters_vocab(k: usize) -> Vocabulary {
    Vocabulary::new("toy", (0..k).map(|i| format!("class{}", (b'a' + i as u8) as char))).unwrap()
}
