//! Binary-relevance ranking metrics at a rank cutoff.
//!
//! Conventions: a query in the run but not in the qrels is an error; a
//! judged query missing from the run scores 0; queries without any relevant
//! document are left out of the mean.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{QrelSet, RunList, ScoredDoc};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Map(usize),
    Mrr(usize),
    Recall(usize),
    Ndcg(usize),
    PrecisionAt1,
}

/// MAP@100, MRR@100, R@100, NDCG@10, NDCG@3, P@1.
pub const DEFAULT_SUITE: [Metric; 6] = [
    Metric::Map(100),
    Metric::Mrr(100),
    Metric::Recall(100),
    Metric::Ndcg(10),
    Metric::Ndcg(3),
    Metric::PrecisionAt1,
];

impl Metric {
    pub fn cutoff(self) -> usize {
        match self {
            Metric::Map(k) | Metric::Mrr(k) | Metric::Recall(k) | Metric::Ndcg(k) => k,
            Metric::PrecisionAt1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Map(_) => "MAP",
            Metric::Mrr(_) => "MRR",
            Metric::Recall(_) => "R",
            Metric::Ndcg(_) => "NDCG",
            Metric::PrecisionAt1 => "P",
        }
    }

    /// Score of one ranking against its relevant set (non-empty).
    pub fn score(self, ranking: &[ScoredDoc], relevant: &BTreeSet<String>) -> f64 {
        let k = self.cutoff();
        let top = &ranking[..ranking.len().min(k)];
        let is_rel = |d: &ScoredDoc| relevant.contains(&d.doc_id);
        let r = relevant.len();
        match self {
            Metric::Ndcg(_) => {
                let dcg: f64 = top
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| is_rel(d))
                    .map(|(i, _)| discount(i + 1))
                    // Not `sum()`: an empty float sum is -0.0.
                    .fold(0.0, |acc, g| acc + g);
                let idcg: f64 = (1..=r.min(k)).map(discount).sum();
                dcg / idcg
            }
            Metric::Map(_) => {
                let mut hits = 0usize;
                let mut sum = 0.0;
                for (i, d) in top.iter().enumerate() {
                    if is_rel(d) {
                        hits += 1;
                        sum += hits as f64 / (i + 1) as f64;
                    }
                }
                sum / r as f64
            }
            Metric::Mrr(_) => top
                .iter()
                .position(is_rel)
                .map_or(0.0, |i| 1.0 / (i + 1) as f64),
            Metric::Recall(_) => top.iter().filter(|d| is_rel(d)).count() as f64 / r as f64,
            Metric::PrecisionAt1 => f64::from(u8::from(top.first().is_some_and(is_rel))),
        }
    }
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name(), self.cutoff())
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `NAME@K` (case-insensitive) for MAP, MRR, R, NDCG, and `P@1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown metric '{s}' (expected e.g. NDCG@10, MAP@100, P@1)"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(Error::invalid("metric cutoff must be at least 1"));
        }
        match name.to_ascii_uppercase().as_str() {
            "MAP" => Ok(Metric::Map(k)),
            "MRR" => Ok(Metric::Mrr(k)),
            "R" | "RECALL" => Ok(Metric::Recall(k)),
            "NDCG" => Ok(Metric::Ndcg(k)),
            "P" if k == 1 => Ok(Metric::PrecisionAt1),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric: Metric,
    /// Judged queries with at least one relevant document.
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Scores `run` against `qrels`.
pub fn evaluate(run: &RunList, qrels: &QrelSet, metric: Metric) -> Result<MetricResult> {
    if metric.cutoff() == 0 {
        return Err(Error::invalid("metric cutoff must be at least 1"));
    }
    if let Some(q) = run.query_ids().find(|q| !qrels.contains_query(q)) {
        return Err(Error::invalid(format!("run query '{q}' has no relevance judgments")));
    }
    let judged: Vec<(&String, &BTreeSet<String>)> = qrels.iter().filter(|(_, rel)| !rel.is_empty()).collect();
    if judged.is_empty() {
        return Err(Error::invalid("no query has a relevant document"));
    }
    let scores: Vec<f64> = judged
        .par_iter()
        .map(|(q, rel)| run.ranking(q).map_or(0.0, |r| metric.score(r, rel)))
        .collect();
    // Summed serially in query order so the mean is parallelism-independent.
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let per_query = judged.into_iter().map(|(q, _)| q.clone()).zip(scores).collect();
    Ok(MetricResult { metric, per_query, mean })
}

pub fn evaluate_suite(run: &RunList, qrels: &QrelSet, metrics: &[Metric]) -> Result<Vec<MetricResult>> {
    metrics.iter().map(|&m| evaluate(run, qrels, m)).collect()
}

pub fn ndcg_at_k(run: &RunList, qrels: &QrelSet, k: usize) -> Result<MetricResult> {
    evaluate(run, qrels, Metric::Ndcg(k))
}

pub fn map_at_k(run: &RunList, qrels: &QrelSet, k: usize) -> Result<MetricResult> {
    evaluate(run, qrels, Metric::Map(k))
}

pub fn mrr_at_k(run: &RunList, qrels: &QrelSet, k: usize) -> Result<MetricResult> {
    evaluate(run, qrels, Metric::Mrr(k))
}

pub fn recall_at_k(run: &RunList, qrels: &QrelSet, k: usize) -> Result<MetricResult> {
    evaluate(run, qrels, Metric::Recall(k))
}

pub fn p_at_1(run: &RunList, qrels: &QrelSet) -> Result<MetricResult> {
    evaluate(run, qrels, Metric::PrecisionAt1)
}
