use std::collections::BTreeSet;

use fairmeta_core::evaluation::{
    cohens_d_paired, compute_confusion, evaluate_all, metrics, paired_t_test, relevant_set, Averaging, CorpusSet,
    QueryPlan,
};
use fairmeta_core::labeler::{assign_tissue_label, label_to_query_value};
use fairmeta_core::record::{Cohort, Condition, Corpus, CorpusHeader, MetadataRecord, RecordId, Source};
use fairmeta_core::search::{execute, parse_query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TISSUES: &[&str] = &[
    "lung", "Lung", "lung cancer", "blood", "PBMC", "whole blood", "liver", "HCC", "ovary", "plasma", "lymph node",
    "NA", "kidney",
];

fn corpus(cohort: Cohort, condition: Condition, tissues: &[Option<&str>]) -> Corpus {
    let records = tissues
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pairs: Vec<(&str, &str)> = t.iter().map(|v| ("tissue", *v)).collect();
            MetadataRecord::from_pairs(format!("s{i}"), Source::Geo, pairs).unwrap()
        })
        .collect();
    Corpus::new(
        CorpusHeader {
            name: format!("geo-{cohort}"),
            source: Source::Geo,
            cohort,
            condition,
            seed: None,
        },
        records,
    )
    .unwrap()
}

fn random_tissues(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<&'static str>> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                None
            } else {
                Some(TISSUES[rng.random_range(0..TISSUES.len())])
            }
        })
        .collect()
}

fn recall(baseline: &Corpus, corrected: &Corpus, query: &str) -> f64 {
    let q = parse_query(query).unwrap();
    let relevant = relevant_set(baseline, &q).unwrap();
    let retrieved: BTreeSet<RecordId> = execute(&q, corrected).retrieved_ids.into_iter().collect();
    metrics(compute_confusion(&retrieved, &relevant)).recall
}

#[test]
fn fixing_tissue_values_never_lowers_recall() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let n = rng.random_range(1..30);
        let base_tissues = random_tissues(&mut rng, n);
        let baseline = corpus(Cohort::Lung, Condition::Baseline, &base_tissues);
        let c1_tissues = random_tissues(&mut rng, n);
        let c1 = corpus(Cohort::Lung, Condition::Dd, &c1_tissues);
        let mut c2_tissues = c1_tissues.clone();
        for (i, record) in baseline.records().iter().enumerate() {
            if rng.random_bool(0.4) {
                if let Some(v) = label_to_query_value(assign_tissue_label(record)) {
                    c2_tissues[i] = Some(v);
                }
            }
        }
        let c2 = corpus(Cohort::Lung, Condition::Dd, &c2_tissues);
        for query in ["tissue:lung", "tissue:blood", "tissue:liver", "tissue:ovary"] {
            assert!(recall(&baseline, &c2, query) >= recall(&baseline, &c1, query), "{query}");
        }
    }
}

#[test]
fn t_test_and_effect_size_are_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(3..31);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p_value, ba.p_value);
        assert_eq!(ab.dof, ba.dof);
        assert_eq!(cohens_d_paired(&a, &b).unwrap(), -cohens_d_paired(&b, &a).unwrap());
        assert!((0.0..=1.0).contains(&ab.p_value));
    }
}

#[test]
fn identical_samples_give_null_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 2..30 {
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p_value, r.dof), (0.0, 1.0, n - 1));
        assert_eq!(cohens_d_paired(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn identical_conditions_evaluate_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut set = CorpusSet::new();
    for &cohort in Cohort::ALL {
        let tissues = random_tissues(&mut rng, 25);
        for &condition in Condition::ALL {
            set.insert(corpus(cohort, condition, &tissues)).unwrap();
        }
    }
    let report = evaluate_all(&set, &QueryPlan::default(), Averaging::Macro).unwrap();
    let base = report.overall_summary(Condition::Baseline).unwrap();
    for &condition in Condition::ALL {
        assert_eq!(report.overall_summary(condition).unwrap(), base);
    }
    for c in &report.comparisons {
        assert_eq!((c.t_statistic, c.p_value, c.cohens_d), (Some(0.0), Some(1.0), Some(0.0)));
    }
}
