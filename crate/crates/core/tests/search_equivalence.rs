use fairmeta_core::record::{canonical_text, Cohort, Condition, Corpus, CorpusHeader, MetadataRecord, Source};
use fairmeta_core::search::{
    build_index, execute, execute_indexed, execute_with, parse_query, parse_query_with, Index, MatchMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &["tissue", "Tissue", "tissue type", "disease", "age", "cell type"];
const VALUES: &[&str] = &[
    "lung",
    "Lung ",
    "LUNG",
    "lung cancer",
    "lung  tissue",
    "blood",
    "whole blood",
    "Blood",
    "NA",
    "na",
    "liver",
    "ovary",
    "lungs",
    "67",
];

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Corpus {
    let records = (0..n)
        .map(|i| {
            let fields = rng.random_range(0..4);
            let pairs: Vec<(&str, &str)> = (0..fields)
                .map(|_| {
                    (
                        NAMES[rng.random_range(0..NAMES.len())],
                        VALUES[rng.random_range(0..VALUES.len())],
                    )
                })
                .collect();
            MetadataRecord::from_pairs(format!("r{i}"), Source::BioSample, pairs).unwrap()
        })
        .collect();
    Corpus::new(
        CorpusHeader {
            name: "random".into(),
            source: Source::BioSample,
            cohort: Cohort::Lung,
            condition: Condition::Baseline,
            seed: None,
        },
        records,
    )
    .unwrap()
}

#[test]
fn index_agrees_with_scan_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lung_cancer_seen = 0;
    for _ in 0..200 {
        let n = rng.random_range(0..40);
        let corpus = random_corpus(&mut rng, n);
        let index = build_index(&corpus);
        let strict = Index::build(&corpus, MatchMode::StrictCase);
        for name in ["tissue", "disease", "age", "missing field"] {
            for value in VALUES {
                let Ok(query) = parse_query(&format!("{name}:{value}")) else {
                    continue;
                };
                let scanned = execute(&query, &corpus);
                assert_eq!(execute_indexed(&query, &index), scanned);

                // brute force: canonical value of the first field with that canonical name
                let expected: Vec<_> = corpus
                    .records()
                    .iter()
                    .filter(|r| {
                        r.fields
                            .iter()
                            .find(|p| p.name == query.field)
                            .filter(|p| !p.value.as_str().trim().eq_ignore_ascii_case("na"))
                            .is_some_and(|p| canonical_text(p.value.as_str()) == query.value)
                    })
                    .map(|r| r.id.clone())
                    .collect();
                assert_eq!(scanned.retrieved_ids, expected, "query {query}");

                for id in &scanned.retrieved_ids {
                    let value = corpus.get(id).unwrap().lookup(&query.field).unwrap();
                    assert_eq!(value.canonical().as_deref(), Some(query.value.as_str()));
                }
                if query.to_string() == "tissue:lung" {
                    for id in &scanned.retrieved_ids {
                        let v = corpus.get(id).unwrap().lookup("tissue").unwrap().as_str();
                        assert_ne!(canonical_text(v), "lung cancer");
                    }
                    lung_cancer_seen += corpus
                        .records()
                        .iter()
                        .filter(|r| r.lookup("tissue").is_some_and(|v| v.as_str() == "lung cancer"))
                        .count();
                }

                let sq = parse_query_with(&format!("{name}:{value}"), MatchMode::StrictCase).unwrap();
                assert_eq!(strict.execute(&sq), execute_with(&sq, &corpus, MatchMode::StrictCase));
            }
        }
    }
    assert!(lung_cancer_seen > 0, "generator should produce lung cancer values");
}

#[test]
fn exact_match_example() {
    let records = ["lung", "lung cancer", "Lung ", "NA"]
        .iter()
        .enumerate()
        .map(|(i, v)| MetadataRecord::from_pairs(format!("{}", i + 1), Source::Geo, [("tissue", *v)]).unwrap())
        .collect();
    let corpus = Corpus::new(
        CorpusHeader {
            name: "example".into(),
            source: Source::Geo,
            cohort: Cohort::Lung,
            condition: Condition::Baseline,
            seed: None,
        },
        records,
    )
    .unwrap();
    let ids: Vec<_> = execute(&parse_query("tissue:lung").unwrap(), &corpus)
        .retrieved_ids
        .iter()
        .map(|id| id.as_str().to_string())
        .collect();
    assert_eq!(ids, ["1", "3"]);
    let strict = parse_query_with("tissue:lung", MatchMode::StrictCase).unwrap();
    assert_eq!(execute_with(&strict, &corpus, MatchMode::StrictCase).retrieved_ids.len(), 1);
}
