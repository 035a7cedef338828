//! Checks against the checked-in fixture suite under `fixtures/suite`.

use std::fs;
use std::path::{Path, PathBuf};

use fairmeta_core::evaluation::{evaluate_all, render_report_json, Averaging, CorpusSet, QueryPlan};
use fairmeta_core::record::{deserialize_corpus, serialize_corpus, Condition, Corpus, RecordId, Source};
use fairmeta_core::standardizer::{
    standardize_batch, BackendConfig, BatchOptions, Guidance, OutcomeStatus, ReplayBackend,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn corpus_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(corpus_files(&path));
        } else if fs::read(&path).unwrap().starts_with(b"#corpus ") {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn load(path: &Path) -> Corpus {
    deserialize_corpus(&fs::read_to_string(path).unwrap()).unwrap()
}

fn suite_corpora(condition: &str) -> Vec<PathBuf> {
    corpus_files(&fixtures().join("suite/corpora").join(condition))
}

#[test]
fn every_fixture_corpus_round_trips() {
    let files = corpus_files(&fixtures());
    assert!(files.len() >= 19, "found {}", files.len());
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let corpus = deserialize_corpus(&text).unwrap();
        let again = deserialize_corpus(&serialize_corpus(&corpus)).unwrap();
        assert_eq!(again, corpus, "{}", path.display());
        assert_eq!(serialize_corpus(&corpus), text, "{}", path.display());
    }
}

#[test]
fn suite_shape() {
    for condition in ["baseline", "dd", "cedar"] {
        let files = suite_corpora(condition);
        assert_eq!(files.len(), 6, "{condition}");
        for f in files {
            assert_eq!(load(&f).len(), 20);
        }
    }
    let raw = fs::read_to_string(fixtures().join("suite/corpora/baseline/biosample-lung-baseline.jsonl")).unwrap();
    for corruption in ["lung cancer", "PBMC", "NSCLC tumor"] {
        assert!(raw.contains(&format!("\"value\":\"{corruption}\"")), "{corruption}");
    }
}

fn evaluate_suite() -> String {
    let mut set = CorpusSet::new();
    for condition in ["baseline", "dd", "cedar"] {
        for path in suite_corpora(condition) {
            set.insert(load(&path)).unwrap();
        }
    }
    let report = evaluate_all(&set, &QueryPlan::default(), Averaging::Macro).unwrap();
    render_report_json(&report).unwrap()
}

#[test]
fn report_matches_golden_bytes() {
    let golden = fs::read_to_string(fixtures().join("suite/golden/report.json")).unwrap();
    assert_eq!(evaluate_suite(), golden);
}

#[test]
fn recall_rises_with_guidance() {
    let mut set = CorpusSet::new();
    for condition in ["baseline", "dd", "cedar"] {
        for path in suite_corpora(condition) {
            set.insert(load(&path)).unwrap();
        }
    }
    let report = evaluate_all(&set, &QueryPlan::default(), Averaging::Macro).unwrap();
    for &source in Source::ALL {
        let r = |c| report.source_summary(source, c).unwrap().recall;
        let (b, d, c) = (r(Condition::Baseline), r(Condition::Dd), r(Condition::Cedar));
        assert!(b < d && d < c, "{source}: {b} {d} {c}");
        assert!(c - b >= 0.3, "{source}: gap {}", c - b);
    }
}

fn replay_condition(cache: &Path, condition: Condition) -> Vec<(String, String, Vec<OutcomeStatus>)> {
    let backend = ReplayBackend::strict(cache);
    suite_corpora("baseline")
        .iter()
        .map(|path| {
            let corpus = load(path);
            let guidance = Guidance::bundled(corpus.source());
            let (out, outcomes) =
                standardize_batch(&corpus, condition, &guidance, &backend, BatchOptions::default());
            (
                format!("{}-{condition}.jsonl", corpus.name()),
                serialize_corpus(&out),
                outcomes.iter().map(|o| o.status).collect(),
            )
        })
        .collect()
}

#[test]
fn replay_is_byte_identical_across_runs() {
    let cache = fixtures().join("suite/replay/cache");
    for condition in [Condition::Dd, Condition::Cedar] {
        let first = replay_condition(&cache, condition);
        let second = replay_condition(&cache, condition);
        assert_eq!(first, second);
        for (name, text, statuses) in first {
            assert!(statuses.iter().all(|s| *s == OutcomeStatus::Corrected), "{name}");
            let checked_in = fs::read_to_string(fixtures().join("suite/corpora").join(condition.to_string()).join(&name)).unwrap();
            assert_eq!(text, checked_in, "{name}");
        }
    }
}

#[test]
fn strict_miss_fails_only_that_record() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixtures().join("suite/replay/cache")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let path = fixtures().join("suite/corpora/baseline/geo-liver-baseline.jsonl");
    let corpus = load(&path);
    let guidance = Guidance::bundled(corpus.source());
    let victim = corpus.records()[7].id.clone();
    let prompt = fairmeta_core::standardizer::build_prompt(
        &corpus.records()[7],
        Condition::Cedar,
        None,
        Some(&guidance.template),
    )
    .unwrap();
    fs::remove_file(dir.path().join(format!("{}.txt", prompt.hash()))).unwrap();

    let backend = ReplayBackend::strict(dir.path());
    let (out, outcomes) = standardize_batch(&corpus, Condition::Cedar, &guidance, &backend, BatchOptions::default());
    let expected = load(&fixtures().join("suite/corpora/cedar/geo-liver-cedar.jsonl"));
    assert_eq!(out.len(), corpus.len());
    for (i, o) in outcomes.iter().enumerate() {
        let id = &corpus.records()[i].id;
        assert_eq!(&o.record_id, id);
        if *id == victim {
            assert_eq!(o.status, OutcomeStatus::BackendFailed);
            assert_eq!(out.get(id).unwrap().fields, corpus.records()[i].fields);
        } else {
            assert_eq!(o.status, OutcomeStatus::Corrected);
            assert_eq!(out.get(id), expected.get(id));
        }
    }
}

#[test]
fn dd_example_replays_to_disease() {
    let dir = fixtures().join("replay-dd-example");
    let config = BackendConfig::load(&dir.join("backend.toml")).unwrap();
    let backend = fairmeta_core::standardizer::build_backend(&config).unwrap();
    let corpus = load(&dir.join("corpus.jsonl"));
    let (out, outcomes) = standardize_batch(
        &corpus,
        Condition::Dd,
        &Guidance::bundled(Source::BioSample),
        backend.as_ref(),
        BatchOptions::default(),
    );
    assert_eq!(outcomes[0].status, OutcomeStatus::Corrected);
    let record = out.get(&RecordId::new("SAMN00000067")).unwrap();
    assert_eq!(record.lookup("disease").and_then(|v| v.text()), Some("lung cancer"));
    assert!(record.lookup("biosample provider").unwrap().is_missing());
    assert_ne!(record.lookup("tissue").and_then(|v| v.text()), Some("lung cancer"));
}
