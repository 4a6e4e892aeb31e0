use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use desireme::eval::{
    evaluate as score, paired_ttest_bonferroni, retrieve_batch, trec, Metric, MetricResult, RunList,
    DEFAULT_SUITE,
};
use desireme::{demb, Similarity, Vector};
use serde::Serialize;

use super::{load_store, require_embeddings, require_input, require_output, write_file, Context};
use crate::args::{CompareArgs, EvaluateArgs, RetrieveArgs};
use crate::config::{echo, DEFAULT_K};
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct RetrieveEcho {
    queries: String,
    docs: String,
    k: usize,
    similarity: String,
}

pub fn retrieve(a: RetrieveArgs, ctx: &Context) -> Result<()> {
    require_embeddings(&a.queries)?;
    require_embeddings(&a.docs)?;
    require_output(&a.output)?;
    let k = a.k.or(ctx.file.retrieve.k).unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let similarity = match a.similarity {
        Some(s) => s.into(),
        None => ctx.file.similarity()?.unwrap_or(Similarity::Dot),
    };
    echo(
        "retrieve",
        &RetrieveEcho {
            queries: a.queries.display().to_string(),
            docs: a.docs.display().to_string(),
            k,
            similarity: similarity.to_string(),
        },
    );
    if a.tag.is_empty() || a.tag.contains(char::is_whitespace) {
        return Err(CliError::usage("--tag must be a single non-empty word"));
    }

    let store = load_store(&a.docs)?;
    let (ids, matrix) = demb::load(&a.queries)?;
    if matrix.cols() != store.dim() {
        return Err(CliError::usage(format!(
            "query dimension {} differs from document dimension {}",
            matrix.cols(),
            store.dim()
        )));
    }
    let queries: Vec<(String, Vector<f32>)> = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, Vector::from_vec(matrix.row(i).to_vec())))
        .collect();
    let run = retrieve_batch(&queries, &store, k, similarity)?;
    trec::save_run(&a.output, &run, &a.tag)?;
    println!("queries={} k={k}", run.len());
    Ok(())
}

fn parse_metrics(names: &[String]) -> Result<Vec<Metric>> {
    if names.is_empty() {
        return Ok(DEFAULT_SUITE.to_vec());
    }
    names
        .iter()
        .map(|n| n.trim().parse().map_err(|e: desireme::Error| CliError::usage(e.to_string())))
        .collect()
}

/// File-name-safe metric name, e.g. `NDCG_10`.
fn slug(m: Metric) -> String {
    format!("{}_{}", m.name(), m.cutoff())
}

fn write_records(dir: &Path, results: &[MetricResult]) -> Result<()> {
    let per_query_dir = dir.join("per_query");
    fs::create_dir_all(&per_query_dir).map_err(|e| CliError::io(&per_query_dir, e))?;
    let mut records = Vec::new();
    for r in results {
        let rel = format!("per_query/{}.tsv", slug(r.metric));
        write_file(&dir.join(&rel), |w| {
            for (q, v) in &r.per_query {
                writeln!(w, "{q}\t{v}")?;
            }
            Ok(())
        })?;
        records.push(format!("{}\t{}\t{}\t{rel}", r.metric.name(), r.metric.cutoff(), r.mean));
    }
    write_file(&dir.join("metrics.tsv"), |w| {
        writeln!(w, "metric\tcutoff\tmean\tper_query")?;
        for line in &records {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_input(&a.run)?;
    require_input(&a.qrels)?;
    if let Some(dir) = &a.output_dir {
        require_output(&dir.join("metrics.tsv"))?;
    }
    let metrics = parse_metrics(&a.metrics)?;
    let run = trec::read_run(&a.run)?;
    let qrels = trec::read_qrels(&a.qrels)?;
    let results = metrics
        .iter()
        .map(|&m| score(&run, &qrels, m))
        .collect::<desireme::Result<Vec<_>>>()?;

    let width = results.iter().map(|r| r.metric.to_string().len()).max().unwrap_or(6).max(6);
    println!("{:<width$}  {:>8}", "metric", "value");
    for r in &results {
        println!("{:<width$}  {:>8.4}", r.metric.to_string(), r.mean);
    }
    println!("{:<width$}  {:>8}", "queries", results[0].per_query.len());
    if let Some(dir) = &a.output_dir {
        write_records(dir, &results)?;
    }
    Ok(())
}

fn check_same_queries(a: &RunList, b: &RunList) -> Result<()> {
    let qa: BTreeSet<&String> = a.query_ids().collect();
    let qb: BTreeSet<&String> = b.query_ids().collect();
    let diff: Vec<&String> = qa.symmetric_difference(&qb).copied().collect();
    if diff.is_empty() {
        return Ok(());
    }
    const SHOWN: usize = 20;
    let mut listed: Vec<&str> = diff.iter().take(SHOWN).map(|s| s.as_str()).collect();
    if diff.len() > SHOWN {
        listed.push("...");
    }
    Err(CliError::usage(format!(
        "runs cover different queries ({} not shared): {}",
        diff.len(),
        listed.join(" ")
    )))
}

pub fn compare(a: CompareArgs, ctx: &Context) -> Result<()> {
    require_input(&a.baseline)?;
    require_input(&a.run)?;
    require_input(&a.qrels)?;
    let metrics = parse_metrics(&a.metrics)?;
    let comparisons = a.comparisons.or(ctx.file.compare.comparisons).unwrap_or(1);
    if comparisons == 0 {
        return Err(CliError::usage("--comparisons must be at least 1"));
    }
    let base = trec::read_run(&a.baseline)?;
    let run = trec::read_run(&a.run)?;
    check_same_queries(&base, &run)?;
    let qrels = trec::read_qrels(&a.qrels)?;

    let width = metrics.iter().map(|m| m.to_string().len()).max().unwrap_or(6).max(6);
    println!(
        "{:<width$}  {:>8}  {:>8}  {:>9}  {:>10}",
        "metric", "baseline", "run", "diff", "p"
    );
    for m in metrics {
        let rb = score(&base, &qrels, m)?;
        let rr = score(&run, &qrels, m)?;
        let xs: Vec<f64> = rr.per_query.values().copied().collect();
        let ys: Vec<f64> = rb.per_query.values().copied().collect();
        let (p, mark) = match paired_ttest_bonferroni(&xs, &ys, comparisons) {
            Ok(t) => (format!("{:.3e}", t.corrected_p), if t.significant { "*" } else { "" }),
            Err(e) if e.is_numerical() => {
                log::warn!("{m}: {e}");
                ("n/a".to_string(), "")
            }
            Err(e) => return Err(e.into()),
        };
        println!(
            "{:<width$}  {:>8.4}  {:>8.4}  {:>+9.4}  {:>10}{mark}",
            m.to_string(),
            rb.mean,
            rr.mean,
            rr.mean - rb.mean,
            p
        );
    }
    println!("* corrected p < 0.001 ({comparisons} comparison(s), two-sided paired t-test)");
    Ok(())
}
