mod common;

use std::collections::BTreeSet;

use coa_core::data::{
    apportion, convert_annotations, native_split, sample_split, AnnotationRow, DatasetKind, Split, SplitSpec,
    DEFAULT_QA_TEMPLATE,
};
use proptest::prelude::*;

use common::{endovis_vocab, qa_record, ENDOVIS};

/// Exact largest-remainder apportionment using integer arithmetic on
/// ratios given in thousandths.
fn apportion_oracle(n: usize, per_mille: &[usize]) -> Vec<usize> {
    let floors: Vec<usize> = per_mille.iter().map(|m| n * m / 1000).collect();
    let mut rems: Vec<(usize, usize)> = per_mille.iter().enumerate().map(|(i, m)| (n * m % 1000, i)).collect();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out = floors.clone();
    for &(_, i) in rems.iter().take(n - floors.iter().sum::<usize>()) {
        out[i] += 1;
    }
    out
}

fn per_mille() -> impl Strategy<Value = Vec<usize>> {
    (0usize..=1000, 0usize..=1000).prop_map(|(a, b)| {
        let (lo, hi) = (a.min(b), a.max(b));
        vec![lo, hi - lo, 1000 - hi]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn apportionment_matches_integer_oracle(n in 0usize..20_000, m in per_mille()) {
        let ratios: Vec<f64> = m.iter().map(|x| *x as f64 / 1000.0).collect();
        let got = apportion(n, &ratios).unwrap();
        prop_assert_eq!(got.iter().sum::<usize>(), n);
        // float quotas can differ from exact thousandths only at exact ties
        let exact = apportion_oracle(n, &m);
        for (g, e) in got.iter().zip(&exact) {
            prop_assert!(g.abs_diff(*e) <= 1);
        }
        for (g, r) in got.iter().zip(&ratios) {
            prop_assert!((*g as f64 - r * n as f64).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn split_is_disjoint_and_seed_stable(total in 1usize..200, a in 0usize..200, b in 0usize..200, seed in any::<u64>()) {
        let v = endovis_vocab();
        let records: Vec<_> = (0..total).map(|i| qa_record(&format!("r{i:04}"), &v, &[])).collect();
        let spec = SplitSpec { n_train: a.min(total), n_test: b.min(total - a.min(total)), seed };
        let s = sample_split(&records, &spec).unwrap();
        prop_assert_eq!(s.train.len(), spec.n_train);
        prop_assert_eq!(s.test.len(), spec.n_test);
        let train: BTreeSet<&str> = s.train.iter().map(|r| r.id.as_str()).collect();
        prop_assert!(s.test.iter().all(|r| !train.contains(r.id.as_str())));
        prop_assert!(s.train.windows(2).all(|w| w[0].id < w[1].id));
        prop_assert!(s.train.iter().all(|r| r.split == Some(Split::Train)));
        prop_assert_eq!(&s, &sample_split(&records, &spec).unwrap());
        prop_assert_eq!(native_split(&[s.train.clone(), s.test.clone()].concat()).unwrap(), s);
    }

    #[test]
    fn conversion_partitions_frames(
        frames in prop::collection::vec(("[a-e]{1,2}", prop::collection::vec(0usize..12, 0..4)), 0..30),
    ) {
        let v = endovis_vocab();
        let rows: Vec<AnnotationRow> = frames
            .iter()
            .map(|(id, labels)| AnnotationRow {
                frame_id: id.clone(),
                image: None,
                labels: labels.iter().map(|&l| ENDOVIS.get(l).copied().unwrap_or("laser").to_string()).collect(),
                split: None,
            })
            .collect();
        let out = convert_annotations(&rows, &v, DEFAULT_QA_TEMPLATE, DatasetKind::Endovis2018).unwrap();
        prop_assert_eq!(out.records.len() + out.failures.len(), rows.len());
        prop_assert!(out.records.windows(2).all(|w| w[0].id < w[1].id));
        for r in &out.records {
            prop_assert!(r.validate(DatasetKind::Endovis2018).is_ok());
        }
        let again = convert_annotations(&rows, &v, DEFAULT_QA_TEMPLATE, DatasetKind::Endovis2018).unwrap();
        prop_assert_eq!(again, out);
    }
}

#[test]
fn apportion_reference_constants() {
    assert_eq!(apportion(10_000, &[0.375, 0.375, 0.25]).unwrap(), [3750, 3750, 2500]);
    assert_eq!(apportion(10, &[0.375, 0.375, 0.25]).unwrap(), [4, 4, 2]);
    assert_eq!(apportion_oracle(10, &[375, 375, 250]), [4, 4, 2]);
}
