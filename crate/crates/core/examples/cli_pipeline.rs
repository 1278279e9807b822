// The whole command-line pipeline in process: ingest, rank, sample,
// annotate and evaluate the climate corpus against the fixture server.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Parser;
use diras::cli::{run, Cli};
use diras::gateway::mock::{MockFixtures, MockServer};

/// Runs the pipeline into `work` and returns the paths of the annotation
/// file and the report.
pub fn pipeline(server_url: &str, work: &Path, parallelism: usize) -> anyhow::Result<(PathBuf, PathBuf)> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/climate");
    let w = |p: &str| work.join(p).display().to_string();
    let f = |p: &str| fixtures.join(p).display().to_string();
    let par = parallelism.to_string();
    let cache = w("cache");
    let common = [
        "diras",
        "--teacher-base-url",
        server_url,
        "--embedding-base-url",
        server_url,
        "--cache-dir",
        &cache,
        "--parallelism",
        &par,
        "--k",
        "5",
        "--per-side",
        "4",
    ];
    let steps: Vec<Vec<String>> = vec![
        vec!["ingest".into(), "--queries".into(), f("queries.jsonl"), "--chunks".into(), f("chunks.jsonl"),
             "--gold".into(), f("gold.jsonl"), "--out-dir".into(), w("corpus")],
        vec!["rank".into(), "--corpus".into(), w("corpus"), "--out".into(), w("rankings.jsonl")],
        vec!["sample".into(), "--corpus".into(), w("corpus"), "--rankings".into(), w("rankings.jsonl"),
             "--out".into(), w("pairs.jsonl")],
        vec!["annotate".into(), "--corpus".into(), w("corpus"), "--pairs".into(), w("pairs.jsonl"),
             "--out-dir".into(), w("annotated")],
        vec!["evaluate".into(), "--annotations".into(), w("annotated/annotations.jsonl"), "--gold".into(),
             w("corpus/gold.jsonl"), "--out".into(), w("report.json")],
    ];
    let env = BTreeMap::new();
    for step in steps {
        let args = common.iter().map(|s| s.to_string()).chain(step);
        let summary = run(Cli::try_parse_from(args)?, &env)?;
        println!("{summary}");
    }
    Ok((work.join("annotated/annotations.jsonl"), work.join("report.json")))
}

pub fn run_example() -> anyhow::Result<String> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock");
    let server = MockServer::start(MockFixtures::load(&fixtures)?)?;
    let work = tempfile::tempdir()?;
    let (_, report) = pipeline(&server.base_url(), work.path(), 4)?;
    Ok(std::fs::read_to_string(report)?)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    println!("{}", run_example()?);
    Ok(())
}
