use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use fairmeta_core::evaluation::{
    evaluate_all, render_cells_csv, render_plot_csv, render_report_json, CorpusSet,
};
use fairmeta_core::ingest::{
    build_query, fetch_raw, raw_cache_dir, read_raw_cache, sample_uniform,
    write_raw_cache, EntrezClient, FixtureClient, RepositoryClient, ReqwestTransport, SamplingPlan,
};
use fairmeta_core::labeler::render_labels;
use fairmeta_core::manifest::{list_files, RunManifest};
use fairmeta_core::record::{serialize_corpus, Cohort, Condition, Corpus, RecordId, Source};
use fairmeta_core::schema::{load_dictionary_file, load_template_file, DataDictionary, MetadataTemplate};
use fairmeta_core::search::{execute_with, parse_query_with, MatchMode};
use fairmeta_core::standardizer::{
    build_backend, build_prompt, prompt_version, standardize_batch, BackendConfig, BackendKind,
    BatchOptions, Guidance, OutcomeStatus,
};
use serde::Serialize;

use crate::suite::{expand_corpus_paths, read_corpus, Suite};
use crate::{
    Cli, Command, EvaluateArgs, IngestArgs, LabelArgs, PromptArgs, SampleArgs, SearchArgs, ServeArgs,
    StandardizeArgs,
};

struct Ctx {
    workdir: PathBuf,
}

impl Ctx {
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.workdir.join(path)
        }
    }

    fn out_dir(&self, path: &Path) -> Result<PathBuf> {
        let dir = self.resolve(path);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    /// Hashes every file in `out_dir` as an output and writes the manifest there.
    fn finish(&self, mut manifest: RunManifest, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("manifest.json");
        for file in list_files(out_dir, &[&path])? {
            manifest.add_output(&file, &self.workdir)?;
        }
        manifest.write(&path).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("manifest: {}", path.display());
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { workdir: cli.workdir };
    match cli.command {
        Command::Ingest(args) => ingest(&ctx, args),
        Command::Sample(args) => sample(&ctx, args),
        Command::Standardize(args) => standardize(&ctx, args),
        Command::Label(args) => label(&ctx, args),
        Command::Search(args) => search(&ctx, args),
        Command::Evaluate(args) => evaluate(&ctx, args),
        Command::Serve(args) => serve(&ctx, args),
        Command::Prompt(args) => prompt(&ctx, args),
    }
}

fn selection<T: Copy>(chosen: &[T], all: &[T]) -> Vec<T> {
    if chosen.is_empty() {
        all.to_vec()
    } else {
        chosen.to_vec()
    }
}

fn ingest(ctx: &Ctx, args: IngestArgs) -> Result<()> {
    let out_dir = ctx.out_dir(&args.out_dir)?;
    let client: Box<dyn RepositoryClient> = match &args.fixtures {
        Some(dir) => Box::new(FixtureClient::new(ctx.resolve(dir))),
        None => Box::new(EntrezClient::from_env(
            ReqwestTransport::new(Duration::from_secs(60))?,
            args.base_url.clone(),
        )),
    };
    for source in selection(&args.source, Source::ALL) {
        for cohort in selection(&args.cohort, Cohort::ALL) {
            let query = build_query(cohort, source);
            let outcome = fetch_raw(&query, args.limit, client.as_ref())
                .with_context(|| format!("fetching {source}/{cohort}"))?;
            write_raw_cache(&out_dir, source, cohort, &outcome.payloads)?;
            eprintln!(
                "{source}/{cohort}: {} payloads ({} retries) -> {}",
                outcome.payloads.len(),
                outcome.retries,
                raw_cache_dir(&out_dir, source, cohort).display()
            );
        }
    }
    ctx.finish(RunManifest::new("ingest"), &out_dir)
}

#[derive(Serialize)]
struct SampleRow {
    source: Source,
    cohort: Cohort,
    input: usize,
    malformed: usize,
    duplicates: usize,
    sampled: usize,
}

fn sample(ctx: &Ctx, args: SampleArgs) -> Result<()> {
    let plan = SamplingPlan::new(args.initial, args.target, args.seed)?;
    let raw_root = ctx.resolve(&args.raw);
    let explicit = !args.source.is_empty() || !args.cohort.is_empty();
    let out_dir = ctx.out_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("sample");
    manifest.seed = Some(args.seed);
    let mut rows = Vec::new();
    for source in selection(&args.source, Source::ALL) {
        for cohort in selection(&args.cohort, Cohort::ALL) {
            let dir = raw_cache_dir(&raw_root, source, cohort);
            if !dir.is_dir() {
                if explicit {
                    bail!("no raw payloads at {}", dir.display());
                }
                continue;
            }
            let payloads = read_raw_cache(&raw_root, source, cohort)?;
            let texts: Vec<String> = payloads.into_iter().take(plan.initial_count).map(|p| p.text).collect();
            for file in list_files(&dir, &[])? {
                manifest.add_input(&file, &ctx.workdir)?;
            }
            let (corpus, report) = sample_uniform(&texts, &plan, source, cohort)
                .with_context(|| format!("sampling {source}/{cohort}"))?;
            write_corpus(&out_dir, &corpus)?;
            eprintln!(
                "{source}/{cohort}: {} input, {} malformed, {} duplicate, {} sampled",
                report.input, report.malformed, report.duplicates, report.sampled
            );
            rows.push(SampleRow {
                source,
                cohort,
                input: report.input,
                malformed: report.malformed,
                duplicates: report.duplicates,
                sampled: report.sampled,
            });
        }
    }
    if rows.is_empty() {
        bail!("no raw payloads under {}", raw_root.join("raw").display());
    }
    let mut text = serde_json::to_string_pretty(&rows)?;
    text.push('\n');
    fs::write(out_dir.join("sample-report.json"), text)?;
    ctx.finish(manifest, &out_dir)
}

fn corpus_file_name(corpus: &Corpus) -> String {
    format!("{}-{}.jsonl", corpus.name(), corpus.condition())
}

fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<PathBuf> {
    let path = dir.join(corpus_file_name(corpus));
    fs::write(&path, serialize_corpus(corpus)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn backend_config(ctx: &Ctx, args: &StandardizeArgs) -> Result<BackendConfig> {
    let as_path = ctx.resolve(Path::new(&args.backend));
    let mut config = if as_path.is_file() {
        BackendConfig::load(&as_path)?
    } else {
        let kind = match args.backend.as_str() {
            "rule" => BackendKind::Rule,
            "replay" => BackendKind::Replay,
            "live" => BackendKind::Live,
            other => bail!("`{other}` is neither a backend kind (rule, replay, live) nor a config file"),
        };
        BackendConfig {
            kind,
            ..BackendConfig::rule()
        }
    };
    if let Some(cache) = &args.cache {
        config.cache_path = Some(ctx.resolve(cache));
    }
    if args.endpoint.is_some() {
        config.endpoint = args.endpoint.clone();
    }
    if args.model.is_some() {
        config.model = args.model.clone();
    }
    if let Some(n) = args.max_inflight {
        config.max_inflight = n;
    }
    Ok(config)
}

#[derive(Serialize)]
struct OutcomeLine<'a> {
    corpus: &'a str,
    record_id: &'a RecordId,
    status: OutcomeStatus,
    attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn standardize(ctx: &Ctx, args: StandardizeArgs) -> Result<()> {
    let condition: Condition = args.condition.into();
    let config = backend_config(ctx, &args)?;
    let backend = build_backend(&config)?;
    let dictionary = match &args.dictionary {
        Some(p) => load_dictionary_file(&ctx.resolve(p))?,
        None => DataDictionary::bundled_biosample(),
    };
    let template = match &args.template {
        Some(p) => load_template_file(&ctx.resolve(p))?,
        None => MetadataTemplate::bundled_biosample(),
    };
    let paths = expand_corpus_paths(&args.corpus.iter().map(|p| ctx.resolve(p)).collect::<Vec<_>>())?;
    let out_dir = ctx.out_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new(format!("standardize {condition}"));
    manifest.backend_config_digest = Some(config.digest());
    manifest.prompt_version = Some(prompt_version());
    let mut outcomes_log = String::new();
    let mut failures = 0;
    for path in &paths {
        manifest.add_input(path, &ctx.workdir)?;
        let corpus = read_corpus(path)?;
        let guidance = Guidance::new(dictionary.clone(), template.clone()).for_source(corpus.source());
        let options = BatchOptions {
            max_inflight: config.max_inflight,
        };
        let (out, outcomes) = standardize_batch(&corpus, condition, &guidance, backend.as_ref(), options);
        write_corpus(&out_dir, &out)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for o in &outcomes {
            let key = match o.status {
                OutcomeStatus::Corrected => "corrected",
                OutcomeStatus::ParseFailed => "parse_failed",
                OutcomeStatus::BackendFailed => "backend_failed",
            };
            *counts.entry(key).or_default() += 1;
            if !o.is_corrected() {
                failures += 1;
            }
            let line = OutcomeLine {
                corpus: corpus.name(),
                record_id: &o.record_id,
                status: o.status,
                attempts: o.attempts,
                error: o.error.as_deref(),
            };
            outcomes_log.push_str(&serde_json::to_string(&line)?);
            outcomes_log.push('\n');
        }
        eprintln!("{} -> {condition}: {counts:?}", corpus.name());
    }
    fs::write(out_dir.join("outcomes.jsonl"), outcomes_log)?;
    if failures > 0 {
        eprintln!("warning: {failures} record(s) were not corrected and were kept unchanged; see outcomes.jsonl");
    }
    ctx.finish(manifest, &out_dir)
}

fn label(ctx: &Ctx, args: LabelArgs) -> Result<()> {
    let paths = expand_corpus_paths(&args.corpus.iter().map(|p| ctx.resolve(p)).collect::<Vec<_>>())?;
    let out_dir = ctx.out_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("label");
    for path in &paths {
        manifest.add_input(path, &ctx.workdir)?;
        let corpus = read_corpus(path)?;
        let file = out_dir.join(format!("{}-{}.labels", corpus.name(), corpus.condition()));
        fs::write(&file, render_labels(&corpus))?;
    }
    ctx.finish(manifest, &out_dir)
}

fn search(ctx: &Ctx, args: SearchArgs) -> Result<()> {
    let mode = if args.strict_case {
        MatchMode::StrictCase
    } else {
        MatchMode::Canonical
    };
    let path = ctx.resolve(&args.corpus);
    let corpus = read_corpus(&path)?;
    let query = parse_query_with(&args.query, mode)?;
    let result = execute_with(&query, &corpus, mode);
    let mut stdout = std::io::stdout().lock();
    for id in &result.retrieved_ids {
        writeln!(stdout, "{}", id.as_str())?;
    }
    if let Some(dir) = &args.out_dir {
        let out_dir = ctx.out_dir(dir)?;
        let mut text = serde_json::to_string_pretty(&result)?;
        text.push('\n');
        fs::write(out_dir.join("results.json"), text)?;
        let mut manifest = RunManifest::new("search");
        manifest.add_input(&path, &ctx.workdir)?;
        ctx.finish(manifest, &out_dir)?;
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, args: EvaluateArgs) -> Result<()> {
    let (paths, averaging, plan) = match &args.suite {
        Some(suite) => {
            let suite = Suite::load(&ctx.resolve(suite))?;
            (suite.corpus_paths, suite.averaging, suite.plan)
        }
        None => (
            expand_corpus_paths(&args.corpora.iter().map(|p| ctx.resolve(p)).collect::<Vec<_>>())?,
            Default::default(),
            Default::default(),
        ),
    };
    let averaging = args.averaging.unwrap_or(averaging);
    let mut manifest = RunManifest::new("evaluate");
    let mut set = CorpusSet::new();
    for path in &paths {
        manifest.add_input(path, &ctx.workdir)?;
        set.insert(read_corpus(path)?)?;
    }
    let report = evaluate_all(&set, &plan, averaging)?;
    let out_dir = match &args.out_dir {
        Some(dir) => ctx.out_dir(dir)?,
        None => {
            let stamp: String = manifest
                .timestamp
                .chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect();
            ctx.out_dir(&Path::new("reports").join(stamp))?
        }
    };
    fs::write(out_dir.join("report.json"), render_report_json(&report)?)?;
    fs::write(out_dir.join("cells.csv"), render_cells_csv(&report))?;
    fs::write(out_dir.join("plot.csv"), render_plot_csv(&report))?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "condition\tprecision\trecall\tf1")?;
    for s in &report.overall {
        writeln!(
            stdout,
            "{}\t{:.4}\t{:.4}\t{:.4}",
            s.condition, s.metrics.precision, s.metrics.recall, s.metrics.f1
        )?;
    }
    for c in &report.comparisons {
        match (c.t_statistic, c.p_value, c.cohens_d) {
            (Some(t), Some(p), Some(d)) => writeln!(
                stdout,
                "{} vs {}: t={t:.4} p={p:.4} d={d:.4} (n={})",
                c.condition_a, c.condition_b, c.n_pairs
            )?,
            _ => writeln!(stdout, "{} vs {}: not computed", c.condition_a, c.condition_b)?,
        }
    }
    ctx.finish(manifest, &out_dir)
}

fn serve(ctx: &Ctx, args: ServeArgs) -> Result<()> {
    let options = fairmeta_service::ServeOptions {
        data_dir: ctx.resolve(&args.data_dir),
        listen: args.listen,
        ui_dir: args.ui.as_deref().map(|p| ctx.resolve(p)),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime
        .block_on(fairmeta_service::serve(options))
        .map_err(|e| anyhow!(e))
}

fn prompt(ctx: &Ctx, args: PromptArgs) -> Result<()> {
    let corpus = read_corpus(&ctx.resolve(&args.corpus))?;
    let id = RecordId::new(args.id.clone());
    let record = corpus
        .get(&id)
        .ok_or_else(|| anyhow!("record `{}` not found", args.id))?;
    let guidance = Guidance::bundled(corpus.source());
    let prompt = build_prompt(
        record,
        args.condition.into(),
        Some(&guidance.dictionary),
        Some(&guidance.template),
    )?;
    let mut stdout = std::io::stdout().lock();
    if args.hash {
        writeln!(stdout, "{}", prompt.hash())?;
    } else {
        writeln!(stdout, "{}", prompt.text)?;
    }
    Ok(())
}
