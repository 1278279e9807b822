//! The `diras` command line. Each subcommand reads and writes the JSONL,
//! JSON and CSV files produced by the library modules.

pub mod config;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{Config, ConfigFlags};

use crate::annotator::{
    annotate_corpus, listwise_rerank, proxy_to_csv, relevant_info_proxy, Annotation, AnnotatorConfig, ScoreSource,
    WindowSpec,
};
use crate::corpus::{
    merge_short_chunks, split_train_test, validate_corpus, CorpusIndex, DocumentChunk, GoldLabel, Provenance, Query,
    QueryDocPair, Split, SplitSide,
};
use crate::distill::{audit_balance, export_training_data, read_training_records};
use crate::gateway::mock::{MockFixtures, MockServer};
use crate::gateway::{ChatRequest, Gateway, GatewayConfig};
use crate::io;
use crate::metrics::{evaluate, f1_threshold_sweep, gold_is_relevant, kendall_tau, sweep_to_csv, EvalOptions};
use crate::prompting::{
    parse_definition_response, render_definition_prompt, render_fixed_qa_definition,
    render_improved_definition_prompt,
};
use crate::retrieval::{rank_documents, Ranking};
use crate::sampler::{
    assign_splits, balanced_sample, disagreement_accuracy_table, original_labels, stratify_disagreements,
    AuditedDisagreement,
};

#[derive(Debug, Parser)]
#[command(name = "diras", version, about = "Calibrated LLM relevance annotation and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub flags: ConfigFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus, merge short chunks and draw the train/test split
    Ingest(IngestArgs),
    /// Dense-rank every chunk for every query
    Rank(RankArgs),
    /// Listwise sliding-window reranking of existing rankings
    Rerank(RerankArgs),
    /// Balanced pair sampling around the retrieval cutoff
    Sample(SampleArgs),
    /// Generate relevance definitions for queries
    Define(DefineArgs),
    /// Pointwise annotation of sampled pairs
    Annotate(AnnotateArgs),
    /// Export fine-tuning records from train-split annotations
    Distill(DistillArgs),
    /// Score annotations against gold labels
    Evaluate(EvaluateArgs),
    /// Sample disagreements with the original labels, and tabulate audits
    Audit(AuditArgs),
    /// F1 at a grid of relevance-score thresholds
    Sweep(SweepArgs),
    /// Kendall's tau between two rankings files
    Benchmark(BenchmarkArgs),
    /// Serve canned chat and embedding responses from a fixtures directory
    MockServer(MockServerArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub chunks: PathBuf,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Continue when validation reports findings
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Directory written by `ingest`
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Only rerank this many leading documents of each ranking
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub with_definition: bool,
    #[arg(long, value_enum, default_value_t = Role::Teacher)]
    pub role: Role,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DefineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Defaults to rewriting the corpus queries file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSONL of {"query_id", "examples": [...]} for example-seeded definitions
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Use the constant QA definition instead of asking a model
    #[arg(long)]
    pub fixed: bool,
    /// Replace definitions that already exist
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Role {
    Teacher,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideFilter {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Role::Teacher)]
    pub role: Role,
    #[arg(long, value_enum, default_value_t = SideFilter::All)]
    pub split: SideFilter,
    /// Confidence behind the relevance score: ask or tok
    #[arg(long)]
    pub source: Option<ScoreSource>,
    #[arg(long)]
    pub renormalize_tok: bool,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Ranking cutoff for nDCG and MAP
    #[arg(long)]
    pub at: Option<usize>,
    /// Also write per-query mean relevance as CSV
    #[arg(long)]
    pub proxy_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Sampled disagreements
    #[arg(long)]
    pub out: PathBuf,
    /// Disagreements with a "human_verdict" field (model or original)
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    #[arg(long)]
    pub table_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid is i / steps for i in 0..=steps
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Inputs are annotation files; rank by relevance score
    #[arg(long)]
    pub from_annotations: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockServerArgs {
    #[arg(long)]
    pub fixtures: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8787")]
    pub addr: String,
}

/// Environment variables that may override config keys.
pub fn diras_env() -> BTreeMap<String, String> {
    std::env::vars().filter(|(k, _)| k.starts_with("DIRAS_")).collect()
}

/// Runs one command and returns its stdout summary. `mock-server` blocks.
pub fn run(cli: Cli, env: &BTreeMap<String, String>) -> Result<Value> {
    let cfg = Config::resolve(cli.flags.config.as_deref(), env, &cli.flags)?;
    match cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Rank(a) => rank(&cfg, a),
        Command::Rerank(a) => rerank(&cfg, a),
        Command::Sample(a) => sample(&cfg, a),
        Command::Define(a) => define(&cfg, a),
        Command::Annotate(a) => annotate(&cfg, a),
        Command::Distill(a) => distill(&cfg, a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, a),
        Command::Audit(a) => audit(&cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Benchmark(a) => benchmark(a),
        Command::MockServer(a) => {
            let fixtures = MockFixtures::load(&a.fixtures)?;
            let server = MockServer::bind(&a.addr, fixtures)?;
            println!("{}", json!({ "listening": server.base_url() }));
            server.serve_forever()
        }
    }
}

struct Corpus {
    queries: Vec<Query>,
    chunks: Vec<DocumentChunk>,
    split: Split,
}

impl Corpus {
    fn load(dir: &Path) -> Result<Self> {
        Ok(Corpus {
            queries: io::read_jsonl(dir.join("queries.jsonl"))?,
            chunks: io::read_jsonl(dir.join("chunks.jsonl"))?,
            split: io::read_json(dir.join("split.json"))
                .with_context(|| format!("{} has no split; run `ingest` first", dir.display()))?,
        })
    }

    fn index(&self) -> CorpusIndex {
        CorpusIndex::new(&self.queries, &self.chunks)
    }
}

fn gateway(cfg: &Config, role: Option<Role>) -> Result<Gateway> {
    let (base, key_env) = match role {
        Some(Role::Teacher) => (&cfg.teacher_base_url, &cfg.teacher_api_key_env),
        Some(Role::Student) => (&cfg.student_base_url, &cfg.student_api_key_env),
        None => (&cfg.embedding_base_url, &cfg.embedding_api_key_env),
    };
    let mut g = GatewayConfig::new(base.clone());
    g.api_key = std::env::var(key_env).ok();
    if g.api_key.is_none() {
        tracing::debug!(var = %key_env, "no API key in environment");
    }
    g.embedding_model = cfg.embedding_model.clone();
    g.cache_dir = Some(cfg.cache_dir.clone());
    g.max_in_flight = cfg.max_in_flight;
    g.max_attempts = cfg.max_attempts;
    Gateway::new(g).with_context(|| format!("opening cache at {}", cfg.cache_dir.display()))
}

fn model_for(cfg: &Config, role: Role) -> &str {
    match role {
        Role::Teacher => &cfg.teacher_model,
        Role::Student => &cfg.student_model,
    }
}

fn ingest(cfg: &Config, a: IngestArgs) -> Result<Value> {
    let queries: Vec<Query> = io::read_jsonl(&a.queries)?;
    let chunks: Vec<DocumentChunk> = io::read_jsonl(&a.chunks)?;
    let gold: Option<Vec<GoldLabel>> = a.gold.as_ref().map(io::read_jsonl).transpose()?;
    let report = validate_corpus(&queries, &chunks, gold.as_deref());
    io::write_json(a.out_dir.join("validation.json"), &report)?;
    if !report.is_ok() {
        for f in &report.findings {
            tracing::warn!(finding = %serde_json::to_string(f)?, "corpus finding");
        }
        if !a.lenient {
            bail!(
                "corpus validation found {} problem(s); see {}",
                report.findings.len(),
                a.out_dir.join("validation.json").display()
            );
        }
    }

    let merged = merge_short_chunks(&chunks, cfg.min_tokens)?;
    let mut renamed: HashMap<&str, &str> = HashMap::new();
    for c in &merged.chunks {
        for part in c.id.split('+') {
            renamed.insert(part, c.id.as_str());
        }
    }

    let query_ids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
    let mut report_ids: Vec<String> = merged.chunks.iter().map(|c| c.report_id.clone()).collect();
    report_ids.sort();
    report_ids.dedup();
    let split = split_train_test(
        &query_ids,
        &report_ids,
        cfg.query_test_fraction,
        cfg.report_test_fraction,
        cfg.seed,
    )?;

    io::write_jsonl(a.out_dir.join("queries.jsonl"), &queries)?;
    io::write_jsonl(a.out_dir.join("chunks.jsonl"), &merged.chunks)?;
    io::write_json(a.out_dir.join("split.json"), &split)?;

    let mut gold_rows = 0;
    if let Some(gold) = gold {
        // Gold rows follow their chunk into the merged chunk. Two rows
        // landing on one merged chunk keep the higher grade.
        let mut out: BTreeMap<(String, String), GoldLabel> = BTreeMap::new();
        for mut g in gold {
            if let Some(new_id) = renamed.get(g.doc_id.as_str()) {
                g.doc_id = new_id.to_string();
            }
            let key = (g.query_id.clone(), g.doc_id.clone());
            match out.get_mut(&key) {
                Some(prev) => {
                    prev.uncertain |= g.uncertain;
                    if g.grade > prev.grade {
                        prev.grade = g.grade;
                        prev.binary = g.binary;
                    }
                }
                None => {
                    out.insert(key, g);
                }
            }
        }
        let rows: Vec<GoldLabel> = out.into_values().collect();
        gold_rows = rows.len();
        io::write_jsonl(a.out_dir.join("gold.jsonl"), &rows)?;
    }

    Ok(json!({
        "command": "ingest",
        "queries": queries.len(),
        "chunks_in": chunks.len(),
        "chunks_out": merged.chunks.len(),
        "short_tails": merged.short_tails.len(),
        "findings": report.findings.len(),
        "gold_rows": gold_rows,
        "test_queries": split.test_queries.len(),
        "test_reports": split.test_reports.len(),
    }))
}

fn rank(cfg: &Config, a: RankArgs) -> Result<Value> {
    let corpus = Corpus::load(&a.corpus)?;
    let gw = gateway(cfg, None)?;
    let mut queries: Vec<&Query> = corpus.queries.iter().collect();
    queries.sort_by(|x, y| x.id.cmp(&y.id));
    let mut rankings = Vec::with_capacity(queries.len());
    for q in queries {
        rankings.push(rank_documents(q, &corpus.chunks, &gw)?);
    }
    io::write_jsonl(&a.out, &rankings)?;
    Ok(json!({ "command": "rank", "rankings": rankings.len(), "gateway": gw.stats() }))
}

fn rerank(cfg: &Config, a: RerankArgs) -> Result<Value> {
    let corpus = Corpus::load(&a.corpus)?;
    let index = corpus.index();
    let rankings: Vec<Ranking> = io::read_jsonl(&a.rankings)?;
    let gw = gateway(cfg, Some(a.role))?;
    let spec = WindowSpec {
        window: a.window,
        step: a.step,
    };
    let mut out = Vec::with_capacity(rankings.len());
    let mut malformed = 0;
    for r in &rankings {
        let q = index
            .queries
            .get(&r.query_id)
            .with_context(|| format!("ranking for unknown query {}", r.query_id))?;
        let cut = a.top.unwrap_or(r.len()).min(r.len());
        let head = Ranking {
            query_id: r.query_id.clone(),
            entries: r.entries[..cut].to_vec(),
        };
        let res = listwise_rerank(q, &head, &index.chunks, spec, a.with_definition, model_for(cfg, a.role), &gw)?;
        malformed += res.malformed_windows;
        // documents past the reranked head keep their order below it
        let n = r.len() as f64;
        let entries = res
            .ranking
            .entries
            .into_iter()
            .map(|(d, _)| d)
            .chain(r.entries[cut..].iter().map(|(d, _)| d.clone()))
            .enumerate()
            .map(|(i, d)| (d, (n - i as f64) / n))
            .collect();
        out.push(Ranking {
            query_id: r.query_id.clone(),
            entries,
        });
    }
    io::write_jsonl(&a.out, &out)?;
    Ok(json!({ "command": "rerank", "rankings": out.len(), "malformed_windows": malformed, "gateway": gw.stats() }))
}

fn sample(cfg: &Config, a: SampleArgs) -> Result<Value> {
    let corpus = Corpus::load(&a.corpus)?;
    let index = corpus.index();
    let rankings: Vec<Ranking> = io::read_jsonl(&a.rankings)?;
    let mut pairs = Vec::new();
    let mut short = 0;
    for r in &rankings {
        let s = balanced_sample(r, cfg.k, cfg.per_side, cfg.seed, cfg.fill_policy)?;
        short += s.shortfall.map_or(0, |sf| sf.total() - sf.filled);
        pairs.extend(s.pairs);
    }
    assign_splits(&mut pairs, &corpus.split, &index);
    io::write_jsonl(&a.out, &pairs)?;
    let count = |side: SplitSide| pairs.iter().filter(|p| p.split == side).count();
    Ok(json!({
        "command": "sample",
        "pairs": pairs.len(),
        "train": count(SplitSide::Train),
        "test": count(SplitSide::Test),
        "unassigned": count(SplitSide::Unassigned),
        "shortfall": short,
    }))
}

#[derive(Deserialize)]
struct ExampleRow {
    query_id: String,
    examples: Vec<String>,
}

fn define(cfg: &Config, a: DefineArgs) -> Result<Value> {
    let path = a.corpus.join("queries.jsonl");
    let mut queries: Vec<Query> = io::read_jsonl(&path)?;
    let examples: HashMap<String, Vec<String>> = match &a.examples {
        Some(p) => io::read_jsonl::<ExampleRow>(p)?
            .into_iter()
            .map(|r| (r.query_id, r.examples))
            .collect(),
        None => HashMap::new(),
    };
    let gw = if a.fixed { None } else { Some(gateway(cfg, Some(Role::Teacher))?) };
    let mut written = 0;
    for q in queries.iter_mut() {
        if q.definition.is_some() && !a.overwrite {
            continue;
        }
        let def = match &gw {
            None => render_fixed_qa_definition(),
            Some(gw) => {
                let (prompt, provenance) = match examples.get(&q.id) {
                    Some(ex) => (render_improved_definition_prompt(&q.text, ex)?, Provenance::Improved),
                    None => (render_definition_prompt(&q.text)?, Provenance::Generated),
                };
                let resp = gw.chat_complete(&ChatRequest::new(&cfg.teacher_model, prompt))?;
                parse_definition_response(&resp.text, provenance)
                    .with_context(|| format!("definition reply for query {}", q.id))?
            }
        };
        q.definition = Some(def);
        written += 1;
    }
    io::write_jsonl(a.out.as_ref().unwrap_or(&path), &queries)?;
    Ok(json!({ "command": "define", "definitions": written, "queries": queries.len() }))
}

fn annotate(cfg: &Config, a: AnnotateArgs) -> Result<Value> {
    let corpus = Corpus::load(&a.corpus)?;
    let index = corpus.index();
    let mut pairs: Vec<QueryDocPair> = io::read_jsonl(&a.pairs)?;
    match a.split {
        SideFilter::All => {}
        SideFilter::Train => pairs.retain(|p| p.split == SplitSide::Train),
        SideFilter::Test => pairs.retain(|p| p.split == SplitSide::Test),
    }
    let gw = gateway(cfg, Some(a.role))?;
    let acfg = AnnotatorConfig {
        calibration: cfg.calibration,
        source: a.source,
        renormalize_tok: a.renormalize_tok,
        ..AnnotatorConfig::new(model_for(cfg, a.role), cfg.variant)
    };
    let run = annotate_corpus(&pairs, &index, &acfg, &gw, cfg.parallelism)?;
    io::write_jsonl(a.out_dir.join("annotations.jsonl"), &run.annotations)?;
    io::write_jsonl(a.out_dir.join("errors.jsonl"), &run.errors)?;
    io::write_json(a.out_dir.join("stats.json"), &run.stats)?;
    Ok(json!({ "command": "annotate", "stats": run.stats }))
}

fn distill(cfg: &Config, a: DistillArgs) -> Result<Value> {
    let corpus = Corpus::load(&a.corpus)?;
    let index = corpus.index();
    let annotations: Vec<Annotation> = io::read_jsonl(&a.annotations)?;
    let train = a.out_dir.join("train.jsonl");
    let manifest = export_training_data(&annotations, &corpus.split, &index, &cfg.variant, &train)?;
    io::write_json(a.out_dir.join("manifest.json"), &manifest)?;
    let records = read_training_records(&train)?;
    let expected: Vec<String> = corpus.split.train_queries.iter().cloned().collect();
    let balance = if records.is_empty() {
        None
    } else {
        let b = audit_balance(&records, &expected, (cfg.band_low, cfg.band_high))?;
        io::write_json(a.out_dir.join("balance.json"), &b)?;
        Some(b.flagged)
    };
    Ok(json!({
        "command": "distill",
        "records": manifest.records,
        "skipped": manifest.skipped_missing_reason,
        "yes_fraction": manifest.yes_fraction,
        "balance_flagged": balance,
    }))
}

fn eval_options(cfg: &Config, at: Option<usize>) -> EvalOptions {
    EvalOptions {
        scheme: cfg.scheme,
        partial_policy: cfg.partial_policy,
        ece_bins: cfg.ece_bins,
        k: at,
        map_threshold: 0.0,
    }
}

fn evaluate_cmd(cfg: &Config, a: EvaluateArgs) -> Result<Value> {
    let annotations: Vec<Annotation> = io::read_jsonl(&a.annotations)?;
    let gold: Vec<GoldLabel> = io::read_jsonl(&a.gold)?;
    let scored: Vec<_> = annotations.iter().map(Annotation::to_scored).collect();
    let ev = evaluate(&scored, &gold, &eval_options(cfg, a.at))?;
    io::write_json(&a.out, &ev)?;
    if let Some(p) = &a.proxy_csv {
        io::write_text(p, &proxy_to_csv(&relevant_info_proxy(&annotations)))?;
    }
    Ok(json!({
        "command": "evaluate",
        "pairs": ev.pairs,
        "row": ev.report.map(|r| r.table_row()),
        "undefined": ev.undefined,
    }))
}

fn audit(cfg: &Config, a: AuditArgs) -> Result<Value> {
    let annotations: Vec<Annotation> = io::read_jsonl(&a.annotations)?;
    let gold: Vec<GoldLabel> = io::read_jsonl(&a.gold)?;
    let originals = original_labels(&gold, cfg.partial_policy);
    let sample = stratify_disagreements(&annotations, &originals, cfg.per_bin, cfg.seed);
    io::write_jsonl(&a.out, &sample.disagreements)?;
    let mut summary = json!({
        "command": "audit",
        "disagreements": sample.disagreements.len(),
        "short_bins": sample.short_bins,
    });
    if let Some(v) = &a.verdicts {
        let audited: Vec<AuditedDisagreement> = io::read_jsonl(v)?;
        let confidences: Vec<f64> = annotations.iter().map(Annotation::confidence).collect();
        let table = disagreement_accuracy_table(&audited, cfg.cutoff, Some(&confidences));
        if let Some(p) = &a.table_out {
            io::write_json(p, &table)?;
        }
        summary["table"] = serde_json::to_value(&table)?;
    }
    Ok(summary)
}

fn sweep(cfg: &Config, a: SweepArgs) -> Result<Value> {
    if a.steps == 0 {
        bail!("--steps must be at least 1");
    }
    let annotations: Vec<Annotation> = io::read_jsonl(&a.annotations)?;
    let gold: Vec<GoldLabel> = io::read_jsonl(&a.gold)?;
    let by_key: HashMap<(&str, &str), &GoldLabel> = gold
        .iter()
        .map(|g| ((g.query_id.as_str(), g.doc_id.as_str()), g))
        .collect();
    let (scores, labels): (Vec<f64>, Vec<bool>) = annotations
        .iter()
        .filter_map(|an| {
            by_key
                .get(&(an.query_id.as_str(), an.doc_id.as_str()))
                .map(|g| (an.relevance_score, gold_is_relevant(g, cfg.partial_policy)))
        })
        .unzip();
    let grid: Vec<f64> = (0..=a.steps).map(|i| i as f64 / a.steps as f64).collect();
    let points = f1_threshold_sweep(&scores, &labels, &grid)?;
    io::write_text(&a.out, &sweep_to_csv(&points))?;
    let best = points
        .iter()
        .max_by(|x, y| x.f1.total_cmp(&y.f1))
        .map(|p| json!({ "theta": p.theta, "f1": p.f1 }));
    Ok(json!({ "command": "sweep", "pairs": scores.len(), "best": best }))
}

#[derive(Serialize)]
struct BenchmarkReport {
    mean_tau: f64,
    per_query: BTreeMap<String, f64>,
    skipped: Vec<String>,
}

fn load_rankings(path: &Path, from_annotations: bool) -> Result<BTreeMap<String, Vec<String>>> {
    let rankings: Vec<Ranking> = if from_annotations {
        let anns: Vec<Annotation> = io::read_jsonl(path)?;
        let mut by_q: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for a in anns {
            by_q.entry(a.query_id).or_default().push((a.doc_id, a.relevance_score));
        }
        by_q.into_iter()
            .map(|(q, e)| Ranking::from_scores(q, e))
            .collect::<std::result::Result<_, _>>()?
    } else {
        io::read_jsonl(path)?
    };
    Ok(rankings
        .into_iter()
        .map(|r| {
            let ids = r.doc_ids().map(str::to_string).collect();
            (r.query_id, ids)
        })
        .collect())
}

fn benchmark(a: BenchmarkArgs) -> Result<Value> {
    let left = load_rankings(&a.a, a.from_annotations)?;
    let right = load_rankings(&a.b, a.from_annotations)?;
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();
    for (q, ra) in &left {
        let Some(rb) = right.get(q) else {
            skipped.push(q.clone());
            continue;
        };
        if ra.len() < 2 {
            skipped.push(q.clone());
            continue;
        }
        let tau = kendall_tau(ra, rb).with_context(|| format!("query {q}"))?;
        per_query.insert(q.clone(), tau);
    }
    if per_query.is_empty() {
        bail!("no query is ranked in both files");
    }
    let report = BenchmarkReport {
        mean_tau: per_query.values().sum::<f64>() / per_query.len() as f64,
        per_query,
        skipped,
    };
    if let Some(p) = &a.out {
        io::write_json(p, &report)?;
    }
    Ok(json!({ "command": "benchmark", "mean_tau": report.mean_tau, "queries": report.per_query.len() }))
}
