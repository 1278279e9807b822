// nDCG, MAP and Kendall's tau for two queries with graded gains.

use std::collections::BTreeMap;

use diras::metrics::{kendall_tau, map, ndcg, QueryRun, RunAndGold};

fn query(id: &str, rows: &[(&str, f64, f64)]) -> QueryRun {
    let mut predicted = BTreeMap::new();
    let mut gold = BTreeMap::new();
    for &(doc, score, gain) in rows {
        predicted.insert(doc.to_string(), score);
        gold.insert(doc.to_string(), gain);
    }
    QueryRun {
        query_id: id.into(),
        predicted,
        gold,
    }
}

pub fn run_example() -> anyhow::Result<(f64, f64, f64)> {
    let run = RunAndGold {
        queries: vec![
            query("q1", &[("a", 0.9, 1.0), ("b", 0.7, 0.0), ("c", 0.4, 0.5), ("d", 0.1, 0.0)]),
            query("q2", &[("e", 0.8, 0.0), ("f", 0.6, 1.0), ("g", 0.2, 1.0)]),
        ],
    };
    let n = ndcg(&run, None)?;
    let m = map(&run, None, 0.0)?;
    for (q, v) in &n.per_query {
        println!("{q}: nDCG {v:.4}");
    }
    println!("macro nDCG {:.4}, MAP {:.4}", n.mean, m.mean);

    let tau = kendall_tau(&["a", "b", "c", "d"], &["a", "c", "b", "d"])?;
    println!("Kendall tau between two orderings: {tau:.4}");
    Ok((n.mean, m.mean, tau))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
