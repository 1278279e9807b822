//! Subcommands driven through `diras::cli::run` and the built binary.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{CommandFactory, Parser};
use diras::annotator::Annotation;
use diras::cli::{run, Cli};
use diras::corpus::{BinaryLabel, GoldLabel};
use diras::gateway::mock::{MockFixtures, MockServer};
use diras::io::read_jsonl;
use serde_json::Value;

type Side = BTreeMap<String, f64>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn s(p: impl AsRef<Path>) -> String {
    p.as_ref().display().to_string()
}

fn diras(args: &[&str]) -> anyhow::Result<Value> {
    let cli = Cli::try_parse_from(std::iter::once("diras").chain(args.iter().copied()))?;
    run(cli, &BTreeMap::new())
}

fn mock() -> MockServer {
    MockServer::start(MockFixtures::load(&fixtures().join("mock")).unwrap()).unwrap()
}

/// Ingests the climate fixture into `work/corpus`.
fn ingest(work: &Path, extra: &[&str]) -> Value {
    let fx = fixtures().join("climate");
    let mut args: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    args.extend(
        [
            "ingest", "--queries", &s(fx.join("queries.jsonl")), "--chunks", &s(fx.join("chunks.jsonl")),
            "--gold", &s(fx.join("gold.jsonl")), "--out-dir", &s(work.join("corpus")),
        ]
        .map(String::from),
    );
    diras(&args.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
}

#[test]
fn evaluate_matches_fixture_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let fx = fixtures().join("eval");
    diras(&[
        "--scheme", "three_way", "evaluate", "--annotations", &s(fx.join("annotations.jsonl")), "--gold",
        &s(fx.join("gold.jsonl")), "--out", &s(&out),
    ])
    .unwrap();
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let anns: Vec<Annotation> = read_jsonl(fx.join("annotations.jsonl")).unwrap();
    let gold: Vec<GoldLabel> = read_jsonl(fx.join("gold.jsonl")).unwrap();
    let by: HashMap<(&str, &str), &GoldLabel> = gold.iter().map(|g| ((g.query_id.as_str(), g.doc_id.as_str()), g)).collect();
    let gain = |g: &GoldLabel| match g.binary.unwrap() {
        BinaryLabel::Relevant => 1.0,
        BinaryLabel::Partial => 0.5,
        BinaryLabel::Irrelevant => 0.0,
    };
    let (mut conf, mut correct, mut unc_score, mut unc_flag) = (vec![], vec![], vec![], vec![]);
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    let mut per_query: BTreeMap<&str, (Side, Side)> = BTreeMap::new();
    for a in &anns {
        let g = by[&(a.query_id.as_str(), a.doc_id.as_str())];
        let predicted = a.guess.as_str() == "Yes";
        let relevant = g.binary != Some(BinaryLabel::Irrelevant);
        match (predicted, relevant) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
        let c = if predicted { a.relevance_score } else { 1.0 - a.relevance_score };
        conf.push(c);
        correct.push(predicted == relevant);
        unc_score.push(1.0 - c);
        unc_flag.push(g.uncertain);
        let e = per_query.entry(a.query_id.as_str()).or_default();
        e.0.insert(a.doc_id.clone(), a.relevance_score);
        e.1.insert(a.doc_id.clone(), gain(g));
    }
    let f1 = 2.0 * tp / (2.0 * tp + fp + fn_);
    let ndcgs: Vec<f64> = per_query.values().filter_map(|(p, g)| common::ndcg(p, g, None)).collect();
    let maps: Vec<f64> = per_query.values().filter_map(|(p, g)| common::ap_at_k(p, g, None, 0.0)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ap = common::average_precision(&unc_score, &unc_flag).unwrap();
    let cal = (common::auroc(&conf, &correct).unwrap() + 2.0 - common::ece(&conf, &correct, 10) - common::brier(&conf, &correct)) / 3.0;
    let want = [
        ("unc", 100.0 * ap),
        ("bin", 100.0 * f1),
        ("cal", 100.0 * cal),
        ("info", 100.0 * (mean(&ndcgs) + mean(&maps)) / 2.0),
    ];
    let mut avg = 0.0;
    for (key, expected) in want {
        let got = report["report"][key].as_f64().unwrap();
        assert!((got - expected).abs() < 1e-9, "{key}: {got} vs {expected}");
        avg += expected / 4.0;
    }
    assert!((report["report"]["avg"].as_f64().unwrap() - avg).abs() < 1e-9);
    assert_eq!(report["pairs"], 24);
}

#[test]
fn annotate_twice_is_identical_and_cached() {
    let server = mock();
    let url = server.base_url();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let cache = s(w.join("cache"));
    let base = ["--teacher-base-url", &url, "--embedding-base-url", &url, "--cache-dir", &cache, "--k", "5", "--per-side", "3"];
    let with = |rest: &[&str]| -> Vec<String> { base.iter().chain(rest).map(|s| s.to_string()).collect() };
    let call = |v: Vec<String>| diras(&v.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
    ingest(w, &[]);
    call(with(&["rank", "--corpus", &s(w.join("corpus")), "--out", &s(w.join("r.jsonl"))]));
    call(with(&["sample", "--corpus", &s(w.join("corpus")), "--rankings", &s(w.join("r.jsonl")), "--out", &s(w.join("p.jsonl"))]));
    let annotate = |out: &str| {
        call(with(&["annotate", "--corpus", &s(w.join("corpus")), "--pairs", &s(w.join("p.jsonl")), "--out-dir", &s(w.join(out))]))
    };
    let first = annotate("a1");
    let second = annotate("a2");
    assert!(first["stats"]["gateway"]["network_calls"].as_u64().unwrap() > 0);
    assert_eq!(second["stats"]["gateway"]["network_calls"], 0);
    assert_eq!(second["stats"]["gateway"]["cache_hits"], first["stats"]["annotated"]);
    assert_eq!(
        std::fs::read(w.join("a1/annotations.jsonl")).unwrap(),
        std::fs::read(w.join("a2/annotations.jsonl")).unwrap()
    );
}

#[test]
fn distill_leak_exits_nonzero() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    ingest(w, &["--seed", "13"]);
    let split: Value = serde_json::from_str(&std::fs::read_to_string(w.join("corpus/split.json")).unwrap()).unwrap();
    let test_query = split["test_queries"][0].as_str().unwrap().to_string();
    let ann = serde_json::json!({
        "query_id": test_query, "doc_id": "r1-c1", "guess": "Yes", "confidence_ask": 0.9,
        "relevance_score": 0.9, "model": "teacher", "variant": "point-ask-d"
    });
    std::fs::write(w.join("a.jsonl"), format!("{ann}\n")).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_diras"))
        .args(["distill", "--corpus", &s(w.join("corpus")), "--annotations", &s(w.join("a.jsonl")), "--out-dir", &s(w.join("d"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let last: Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert!(last["error"].as_str().unwrap().contains("leakage"), "{err}");
    assert!(!w.join("d/train.jsonl").exists());
}

#[test]
fn distill_train_pairs_round_trip() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    ingest(w, &[]);
    let split: Value = serde_json::from_str(&std::fs::read_to_string(w.join("corpus/split.json")).unwrap()).unwrap();
    let q = split["train_queries"][0].as_str().unwrap();
    let chunks: Vec<diras::corpus::DocumentChunk> = read_jsonl(w.join("corpus/chunks.jsonl")).unwrap();
    let train_reports: Vec<&str> = split["train_reports"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let mut lines = String::new();
    for (i, c) in chunks.iter().filter(|c| train_reports.contains(&c.report_id.as_str())).take(4).enumerate() {
        let (guess, score) = if i % 2 == 0 { ("Yes", 0.875) } else { ("No", 0.1) };
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({"query_id": q, "doc_id": c.id, "guess": guess, "confidence_ask": 0.9,
                "relevance_score": score, "model": "teacher", "variant": "point-ask-d"})
        ));
    }
    std::fs::write(w.join("a.jsonl"), lines).unwrap();
    let summary = diras(&[
        "distill", "--corpus", &s(w.join("corpus")), "--annotations", &s(w.join("a.jsonl")), "--out-dir", &s(w.join("d")),
    ])
    .unwrap();
    assert_eq!(summary["records"], 4);
    let records = diras::distill::read_training_records(&w.join("d/train.jsonl")).unwrap();
    let variant = "point-ask-d".parse().unwrap();
    let parsed: Vec<f64> = records
        .iter()
        .map(|r| diras::prompting::parse_pointwise_response(&r.completion, &variant).unwrap().confidence)
        .collect();
    assert_eq!(parsed, [0.875, 0.9, 0.875, 0.9]);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(w.join("d/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["yes"], 2);
    assert!(w.join("d/balance.json").exists());
}

#[test]
fn help_lists_every_config_key() {
    let help = Cli::command().render_long_help().to_string();
    let defaults = serde_json::to_value(diras::cli::Config::default()).unwrap();
    for key in defaults.as_object().unwrap().keys() {
        let flag = format!("--{}", key.replace('_', "-"));
        assert!(help.contains(&flag), "missing {flag}");
    }
}

#[test]
fn bad_config_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diras.toml");
    std::fs::write(&cfg, "temperature = 0.7\n").unwrap();
    let err = diras(&["--config", &s(&cfg), "benchmark", "--a", "x", "--b", "y"]).unwrap_err();
    assert!(format!("{err:#}").contains("temperature"), "{err:#}");
    assert!(Cli::try_parse_from(["diras", "evaluate", "--no-such-flag"]).is_err());
}

#[test]
fn define_fixed_and_generated() {
    let server = mock();
    let url = server.base_url();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    ingest(w, &[]);
    let fixed = w.join("fixed.jsonl");
    let v = diras(&["define", "--corpus", &s(w.join("corpus")), "--out", &s(&fixed), "--fixed", "--overwrite"]).unwrap();
    assert_eq!(v["definitions"], 4);
    let qs: Vec<diras::corpus::Query> = read_jsonl(&fixed).unwrap();
    assert!(qs.iter().all(|q| q.definition.as_ref().unwrap().provenance == diras::corpus::Provenance::Fixed));

    // definitions already present are kept without --overwrite
    let v = diras(&["--teacher-base-url", &url, "--cache-dir", &s(w.join("c")), "define", "--corpus", &s(w.join("corpus")),
        "--out", &s(w.join("kept.jsonl"))]).unwrap();
    assert_eq!(v["definitions"], 0);
    let v = diras(&["--teacher-base-url", &url, "--cache-dir", &s(w.join("c")), "define", "--corpus", &s(w.join("corpus")),
        "--out", &s(w.join("gen.jsonl")), "--overwrite"]).unwrap();
    assert_eq!(v["definitions"], 4);
    let qs: Vec<diras::corpus::Query> = read_jsonl(w.join("gen.jsonl")).unwrap();
    let d = qs[0].definition.as_ref().unwrap();
    assert!(d.meaning.starts_with("The question \""));
    assert_eq!(d.examples.len(), 3);
}

#[test]
fn sweep_audit_and_benchmark() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let fx = fixtures().join("eval");
    let (anns, gold) = (s(fx.join("annotations.jsonl")), s(fx.join("gold.jsonl")));

    let v = diras(&["sweep", "--annotations", &anns, "--gold", &gold, "--out", &s(w.join("sweep.csv")), "--steps", "4"]).unwrap();
    assert_eq!(v["pairs"], 24);
    let csv = std::fs::read_to_string(w.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("theta,"));

    let v = diras(&["audit", "--annotations", &anns, "--gold", &gold, "--out", &s(w.join("dis.jsonl"))]).unwrap();
    let n = v["disagreements"].as_u64().unwrap();
    let dis: Vec<Value> = read_jsonl(w.join("dis.jsonl")).unwrap();
    assert_eq!(dis.len() as u64, n);
    let audited: String = dis
        .into_iter()
        .map(|mut d| {
            d["human_verdict"] = "model".into();
            format!("{d}\n")
        })
        .collect();
    std::fs::write(w.join("verdicts.jsonl"), audited).unwrap();
    let v = diras(&["audit", "--annotations", &anns, "--gold", &gold, "--out", &s(w.join("dis2.jsonl")),
        "--verdicts", &s(w.join("verdicts.jsonl")), "--table-out", &s(w.join("table.json"))]).unwrap();
    assert!(v["table"]["fraction_above"].as_f64().is_some());
    assert!(w.join("table.json").exists());

    let v = diras(&["benchmark", "--a", &anns, "--b", &anns, "--from-annotations", "--out", &s(w.join("b.json"))]).unwrap();
    assert_eq!(v["mean_tau"], 1.0);
}

#[test]
fn rerank_keeps_every_document() {
    let server = mock();
    let url = server.base_url();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let cache = s(w.join("cache"));
    ingest(w, &[]);
    diras(&["--embedding-base-url", &url, "--cache-dir", &cache, "rank", "--corpus", &s(w.join("corpus")), "--out", &s(w.join("r.jsonl"))]).unwrap();
    let v = diras(&["--teacher-base-url", &url, "--cache-dir", &cache, "rerank", "--corpus", &s(w.join("corpus")),
        "--rankings", &s(w.join("r.jsonl")), "--out", &s(w.join("rr.jsonl")), "--window", "4", "--step", "2", "--top", "8"]).unwrap();
    // fixture replies are pointwise answers, so every window is unparseable
    assert!(v["malformed_windows"].as_u64().unwrap() > 0);
    let before: Vec<diras::retrieval::Ranking> = read_jsonl(w.join("r.jsonl")).unwrap();
    let after: Vec<diras::retrieval::Ranking> = read_jsonl(w.join("rr.jsonl")).unwrap();
    for (b, a) in before.iter().zip(&after) {
        assert_eq!(b.doc_ids().collect::<Vec<_>>(), a.doc_ids().collect::<Vec<_>>());
    }
}
