//! Multi-label evaluation: example-averaged (or micro) P/R/F1 and the
//! class-macro `F1_cls`.

use serde::{Deserialize, Serialize};

use crate::reward::{EntitySet, RewardError, Vocabulary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records to evaluate")]
    Empty,
    #[error("record `{0}` does not use the evaluation vocabulary")]
    Vocabulary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio_or(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// P/R/F1 from counts. An empty side scores 1 only if the other side is
/// empty too.
fn prf_from_counts(hits: usize, n_pred: usize, n_gt: usize) -> Prf {
    if n_pred == 0 && n_gt == 0 {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let precision = ratio_or(hits, n_pred, 0.0);
    let recall = ratio_or(hits, n_gt, 0.0);
    Prf {
        precision,
        recall,
        f1: harmonic(precision, recall),
    }
}

pub fn example_prf(pred: &EntitySet, gt: &EntitySet) -> Result<Prf, RewardError> {
    let hits = pred.intersection_len(gt)?;
    Ok(prf_from_counts(hits, pred.len(), gt.len()))
}

#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub id: String,
    pub pred: EntitySet,
    pub gt: EntitySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of per-record P/R/F1.
    #[default]
    Example,
    /// P/R/F1 of pooled counts.
    Micro,
}

/// Which classes enter the `F1_cls` mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScope {
    /// Classes that occur in at least one prediction or ground-truth set.
    #[default]
    Present,
    FullVocabulary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub averaging: Averaging,
    pub class_scope: ClassScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_index: usize,
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Ground-truth occurrences.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub averaging: Averaging,
    pub class_scope: ClassScope,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_cls: f64,
    /// False when no class was included; `f1_cls` is then 0.
    pub f1_cls_defined: bool,
    pub included_classes: usize,
    pub per_class: Vec<ClassMetrics>,
}

pub fn aggregate_report(
    records: &[EvalRecord],
    vocab: &Vocabulary,
    opts: EvalOptions,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let k = vocab.len();
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fneg = vec![0usize; k];
    let (mut sum_p, mut sum_r, mut sum_f) = (0.0, 0.0, 0.0);
    let (mut hits_total, mut pred_total, mut gt_total) = (0usize, 0usize, 0usize);

    for rec in records {
        if !vocab.owns(&rec.pred) || !vocab.owns(&rec.gt) {
            return Err(MetricsError::Vocabulary(rec.id.clone()));
        }
        let hits = rec.pred.intersection_len(&rec.gt).expect("same vocabulary");
        let prf = prf_from_counts(hits, rec.pred.len(), rec.gt.len());
        sum_p += prf.precision;
        sum_r += prf.recall;
        sum_f += prf.f1;
        hits_total += hits;
        pred_total += rec.pred.len();
        gt_total += rec.gt.len();
        for c in rec.pred.iter() {
            if rec.gt.contains(c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for c in rec.gt.iter().filter(|&c| !rec.pred.contains(c)) {
            fneg[c] += 1;
        }
    }

    let n = records.len() as f64;
    let overall = match opts.averaging {
        Averaging::Example => Prf {
            precision: sum_p / n,
            recall: sum_r / n,
            f1: sum_f / n,
        },
        Averaging::Micro => prf_from_counts(hits_total, pred_total, gt_total),
    };

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let precision = ratio_or(tp[c], tp[c] + fp[c], 0.0);
            let recall = ratio_or(tp[c], tp[c] + fneg[c], 0.0);
            let present = tp[c] + fp[c] + fneg[c] > 0;
            ClassMetrics {
                class_index: c,
                label: vocab.entries()[c].clone(),
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: tp[c] + fneg[c],
                tp: tp[c],
                fp: fp[c],
                fn_: fneg[c],
                included: present || opts.class_scope == ClassScope::FullVocabulary,
            }
        })
        .collect();

    let included: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.included).collect();
    let f1_cls = if included.is_empty() {
        0.0
    } else {
        included.iter().map(|c| c.f1).sum::<f64>() / included.len() as f64
    };

    Ok(MetricsReport {
        n: records.len(),
        averaging: opts.averaging,
        class_scope: opts.class_scope,
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        f1_cls,
        f1_cls_defined: !included.is_empty(),
        included_classes: included.len(),
        per_class,
    })
}

/// Per-class table as CSV.
pub fn per_class_csv(report: &MetricsReport) -> String {
    let mut out = String::from("class_index,label,precision,recall,f1,support,tp,fp,fn,included\n");
    for c in &report.per_class {
        let label = if c.label.contains([',', '"']) {
            format!("\"{}\"", c.label.replace('"', "\"\""))
        } else {
            c.label.clone()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.class_index, label, c.precision, c.recall, c.f1, c.support, c.tp, c.fp, c.fn_, c.included
        ));
    }
    out
}
