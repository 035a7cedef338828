//! Retrieval evaluation: confusion counts, precision/recall/F1, averaging
//! across queries and cohorts, and paired comparisons of recall between
//! conditions.
//!
//! Relevance is always judged against gold labels computed on the baseline
//! (original) corpus, so the relevant set of a query is the same for every
//! condition. Each cohort runs its organ query plus `tissue:blood`.

mod output;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::labeler::{assign_tissue_label, TissueLabel};
use crate::record::{Cohort, Condition, Corpus, RecordId, Source};
use crate::search::{build_index, SearchQuery};

pub use output::{format_real, render_cells_csv, render_plot_csv, render_report_json};
pub use stats::{cohens_d_paired, paired_t_test, PairedTTest, StatsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unsupported query `{0}`: only tissue:lung, tissue:liver, tissue:ovary and tissue:blood have gold labels")]
    UnsupportedQuery(String),
    #[error("no {condition} corpus for {repository}/{cohort}")]
    MissingCorpus {
        repository: Source,
        cohort: Cohort,
        condition: Condition,
    },
    #[error("no queries configured for cohort {0}")]
    MissingQueries(Cohort),
    #[error("cannot average an empty list")]
    EmptyInput,
    #[error("corpus for {0} given twice")]
    DuplicateCorpus(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    fn add(self, other: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub fn compute_confusion(
    retrieved: &BTreeSet<RecordId>,
    relevant: &BTreeSet<RecordId>,
) -> ConfusionCounts {
    let tp = retrieved.intersection(relevant).count();
    ConfusionCounts {
        tp,
        fp: retrieved.len() - tp,
        fn_: relevant.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValues {
    #[serde(serialize_with = "output::fixed")]
    pub precision: f64,
    #[serde(serialize_with = "output::fixed")]
    pub recall: f64,
    #[serde(serialize_with = "output::fixed")]
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1; any zero denominator yields 0.
pub fn metrics(counts: ConfusionCounts) -> MetricValues {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricValues {
        precision,
        recall,
        f1,
    }
}

/// Unweighted mean of each component.
pub fn macro_average(values: &[MetricValues]) -> Result<MetricValues, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = values.len() as f64;
    let mut sum = (0.0, 0.0, 0.0);
    for v in values {
        sum.0 += v.precision;
        sum.1 += v.recall;
        sum.2 += v.f1;
    }
    Ok(MetricValues {
        precision: sum.0 / n,
        recall: sum.1 / n,
        f1: sum.2 / n,
    })
}

fn query_label(query: &SearchQuery) -> Result<TissueLabel, EvalError> {
    if query.field != "tissue" {
        return Err(EvalError::UnsupportedQuery(query.to_string()));
    }
    TissueLabel::from_query_value(&query.value)
        .ok_or_else(|| EvalError::UnsupportedQuery(query.to_string()))
}

/// Ids of records in `baseline` whose gold label is the query's tissue.
pub fn relevant_set(baseline: &Corpus, query: &SearchQuery) -> Result<BTreeSet<RecordId>, EvalError> {
    let label = query_label(query)?;
    Ok(baseline
        .records()
        .iter()
        .filter(|r| assign_tissue_label(r) == label)
        .map(|r| r.id.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean over queries within a cohort, then over cohorts.
    #[default]
    Macro,
    /// Counts pooled before computing metrics.
    Micro,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "macro" => Ok(Averaging::Macro),
            "micro" => Ok(Averaging::Micro),
            other => Err(format!("unknown averaging `{other}` (expected macro or micro)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CorpusKey {
    pub source: Source,
    pub cohort: Cohort,
    pub condition: Condition,
}

/// Corpora keyed by source, cohort and condition.
#[derive(Debug, Clone, Default)]
pub struct CorpusSet {
    corpora: BTreeMap<CorpusKey, Corpus>,
}

impl CorpusSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, corpus: Corpus) -> Result<(), EvalError> {
        let key = CorpusKey {
            source: corpus.source(),
            cohort: corpus.cohort(),
            condition: corpus.condition(),
        };
        if self.corpora.contains_key(&key) {
            return Err(EvalError::DuplicateCorpus(format!(
                "{}/{}/{}",
                key.source, key.cohort, key.condition
            )));
        }
        self.corpora.insert(key, corpus);
        Ok(())
    }

    pub fn get(&self, source: Source, cohort: Cohort, condition: Condition) -> Option<&Corpus> {
        self.corpora.get(&CorpusKey {
            source,
            cohort,
            condition,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CorpusKey, &Corpus)> {
        self.corpora.iter()
    }

    /// Distinct (source, cohort) pairs, sorted.
    pub fn cells(&self) -> Vec<(Source, Cohort)> {
        let set: BTreeSet<_> = self.corpora.keys().map(|k| (k.source, k.cohort)).collect();
        set.into_iter().collect()
    }
}

/// Queries run against each cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    queries: BTreeMap<Cohort, Vec<SearchQuery>>,
}

fn tissue_query(value: &str) -> SearchQuery {
    SearchQuery {
        field: "tissue".into(),
        value: value.into(),
    }
}

impl Default for QueryPlan {
    fn default() -> Self {
        let mut queries = BTreeMap::new();
        queries.insert(Cohort::Lung, vec![tissue_query("lung"), tissue_query("blood")]);
        queries.insert(Cohort::Liver, vec![tissue_query("liver"), tissue_query("blood")]);
        queries.insert(Cohort::Ovarian, vec![tissue_query("ovary"), tissue_query("blood")]);
        QueryPlan { queries }
    }
}

impl QueryPlan {
    pub fn new(queries: BTreeMap<Cohort, Vec<SearchQuery>>) -> Self {
        QueryPlan { queries }
    }

    pub fn for_cohort(&self, cohort: Cohort) -> Option<&[SearchQuery]> {
        self.queries.get(&cohort).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub source: Source,
    pub cohort: Cohort,
    pub condition: Condition,
    pub query: String,
    pub relevant: usize,
    pub retrieved: usize,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSummary {
    pub source: Source,
    pub condition: Condition,
    #[serde(flatten)]
    pub metrics: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    #[serde(flatten)]
    pub metrics: MetricValues,
}

/// Paired comparison of per-cell recall, `b` against `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatComparison {
    pub condition_a: Condition,
    pub condition_b: Condition,
    pub metric: &'static str,
    pub n_pairs: usize,
    #[serde(serialize_with = "output::fixed_opt")]
    pub t_statistic: Option<f64>,
    #[serde(serialize_with = "output::fixed_opt")]
    pub p_value: Option<f64>,
    pub degrees_of_freedom: usize,
    #[serde(serialize_with = "output::fixed_opt")]
    pub cohens_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub averaging: Averaging,
    pub cells: Vec<CellReport>,
    pub by_source: Vec<SourceSummary>,
    pub overall: Vec<ConditionSummary>,
    pub comparisons: Vec<StatComparison>,
    pub footnotes: Vec<String>,
}

impl EvaluationReport {
    pub fn source_summary(&self, source: Source, condition: Condition) -> Option<&MetricValues> {
        self.by_source
            .iter()
            .find(|s| s.source == source && s.condition == condition)
            .map(|s| &s.metrics)
    }

    pub fn overall_summary(&self, condition: Condition) -> Option<&MetricValues> {
        self.overall
            .iter()
            .find(|s| s.condition == condition)
            .map(|s| &s.metrics)
    }
}

const COMPARISONS: [(Condition, Condition); 3] = [
    (Condition::Baseline, Condition::Dd),
    (Condition::Dd, Condition::Cedar),
    (Condition::Baseline, Condition::Cedar),
];

/// Evaluates every (source, cohort) in `corpora` under all three conditions.
pub fn evaluate_all(
    corpora: &CorpusSet,
    plan: &QueryPlan,
    averaging: Averaging,
) -> Result<EvaluationReport, EvalError> {
    let mut cells = Vec::new();
    let mut footnotes = Vec::new();

    for (source, cohort) in corpora.cells() {
        let queries = plan
            .for_cohort(cohort)
            .ok_or(EvalError::MissingQueries(cohort))?;
        let mut queries: Vec<&SearchQuery> = queries.iter().collect();
        queries.sort_by_key(|q| q.to_string());
        let baseline = corpora
            .get(source, cohort, Condition::Baseline)
            .ok_or(EvalError::MissingCorpus {
                repository: source,
                cohort,
                condition: Condition::Baseline,
            })?;
        let relevant: Vec<BTreeSet<RecordId>> = queries
            .iter()
            .map(|q| relevant_set(baseline, q))
            .collect::<Result<_, _>>()?;

        for condition in Condition::ALL.iter().copied() {
            let corpus = corpora
                .get(source, cohort, condition)
                .ok_or(EvalError::MissingCorpus {
                    repository: source,
                    cohort,
                    condition,
                })?;
            let index = build_index(corpus);
            for (query, relevant) in queries.iter().zip(&relevant) {
                let retrieved: BTreeSet<RecordId> =
                    index.execute(query).retrieved_ids.into_iter().collect();
                let counts = compute_confusion(&retrieved, relevant);
                let cell_name = format!("{source}/{cohort}/{condition} {query}");
                if retrieved.is_empty() {
                    footnotes.push(format!(
                        "{cell_name}: no records retrieved; precision reported as 0"
                    ));
                }
                if relevant.is_empty() {
                    footnotes.push(format!(
                        "{cell_name}: no relevant records; recall reported as 0"
                    ));
                }
                cells.push(CellReport {
                    source,
                    cohort,
                    condition,
                    query: query.to_string(),
                    relevant: relevant.len(),
                    retrieved: retrieved.len(),
                    counts,
                    metrics: metrics(counts),
                });
            }
        }
    }
    cells.sort_by(|a, b| {
        (a.source, a.cohort, a.condition, &a.query).cmp(&(b.source, b.cohort, b.condition, &b.query))
    });

    let (by_source, overall) = summarize(&cells, averaging)?;
    let comparisons = compare_recall(&cells, &mut footnotes);

    Ok(EvaluationReport {
        averaging,
        cells,
        by_source,
        overall,
        comparisons,
        footnotes,
    })
}

fn summarize(
    cells: &[CellReport],
    averaging: Averaging,
) -> Result<(Vec<SourceSummary>, Vec<ConditionSummary>), EvalError> {
    let sources: BTreeSet<Source> = cells.iter().map(|c| c.source).collect();
    let mut by_source = Vec::new();
    let mut overall = Vec::new();
    for condition in Condition::ALL.iter().copied() {
        let mut per_source = Vec::new();
        for &source in &sources {
            let selected: Vec<&CellReport> = cells
                .iter()
                .filter(|c| c.source == source && c.condition == condition)
                .collect();
            let summary = match averaging {
                Averaging::Macro => {
                    let cohorts: BTreeSet<Cohort> = selected.iter().map(|c| c.cohort).collect();
                    let per_cohort = cohorts
                        .iter()
                        .map(|&cohort| {
                            let values: Vec<MetricValues> = selected
                                .iter()
                                .filter(|c| c.cohort == cohort)
                                .map(|c| c.metrics)
                                .collect();
                            macro_average(&values)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    macro_average(&per_cohort)?
                }
                Averaging::Micro => metrics(
                    selected
                        .iter()
                        .fold(ConfusionCounts::default(), |acc, c| acc.add(c.counts)),
                ),
            };
            per_source.push(summary);
            by_source.push(SourceSummary {
                source,
                condition,
                metrics: summary,
            });
        }
        let summary = match averaging {
            Averaging::Macro => macro_average(&per_source)?,
            Averaging::Micro => metrics(
                cells
                    .iter()
                    .filter(|c| c.condition == condition)
                    .fold(ConfusionCounts::default(), |acc, c| acc.add(c.counts)),
            ),
        };
        overall.push(ConditionSummary {
            condition,
            metrics: summary,
        });
    }
    by_source.sort_by_key(|s| (s.source, s.condition));
    Ok((by_source, overall))
}

fn compare_recall(cells: &[CellReport], footnotes: &mut Vec<String>) -> Vec<StatComparison> {
    // recall keyed by (source, cohort, query) per condition; cells are sorted
    let recall_of = |condition: Condition| -> BTreeMap<(Source, Cohort, &str), f64> {
        cells
            .iter()
            .filter(|c| c.condition == condition)
            .map(|c| ((c.source, c.cohort, c.query.as_str()), c.metrics.recall))
            .collect()
    };
    COMPARISONS
        .iter()
        .map(|&(cond_a, cond_b)| {
            let a_map = recall_of(cond_a);
            let b_map = recall_of(cond_b);
            let (a, b): (Vec<f64>, Vec<f64>) = a_map
                .iter()
                .filter_map(|(k, ra)| b_map.get(k).map(|rb| (*ra, *rb)))
                .unzip();
            let n_pairs = a.len();
            let mut comparison = StatComparison {
                condition_a: cond_a,
                condition_b: cond_b,
                metric: "recall",
                n_pairs,
                t_statistic: None,
                p_value: None,
                degrees_of_freedom: n_pairs.saturating_sub(1),
                cohens_d: None,
                note: None,
            };
            match (paired_t_test(&a, &b), cohens_d_paired(&a, &b)) {
                (Ok(t), Ok(d)) => {
                    comparison.t_statistic = Some(t.t);
                    comparison.p_value = Some(t.p_value);
                    comparison.cohens_d = Some(d);
                }
                (Err(err), _) | (_, Err(err)) => {
                    let note = format!("{cond_a} vs {cond_b}: statistics not computed ({err})");
                    footnotes.push(note.clone());
                    comparison.note = Some(note);
                }
            }
            comparison
        })
        .collect()
}
