//! Dense retrieval, ranking metrics, significance testing, and the synthetic
//! benchmark.

pub mod metrics;
mod store;
pub mod synth;
pub mod trec;
pub mod ttest;

use std::collections::{BTreeMap, BTreeSet};
use std::cmp::Ordering;

pub use metrics::{
    evaluate, evaluate_suite, map_at_k, mrr_at_k, ndcg_at_k, p_at_1, recall_at_k, Metric, MetricResult,
    DEFAULT_SUITE,
};
pub use store::{retrieve, retrieve_batch, EmbeddingStore};
pub use synth::{synth_benchmark, SynthBenchmark, SynthConfig, SynthQuery};
pub use ttest::{paired_ttest_bonferroni, PairedTTest, SIGNIFICANCE_LEVEL};

use crate::error::{Error, Result};

/// Binary relevance judgments: query id to the set of relevant doc ids.
/// A query may be present with no relevant documents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QrelSet {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a judgment; non-positive relevance only registers the query.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, relevant: bool) {
        let entry = self.map.entry(query_id.to_string()).or_default();
        if relevant {
            entry.insert(doc_id.to_string());
        }
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.map.get(query_id)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.map.contains_key(query_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<Q: Into<String>, D: Into<String>> FromIterator<(Q, D)> for QrelSet {
    fn from_iter<I: IntoIterator<Item = (Q, D)>>(iter: I) -> Self {
        let mut q = QrelSet::new();
        for (query, doc) in iter {
            q.map.entry(query.into()).or_default().insert(doc.into());
        }
        q
    }
}

/// One retrieved document.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        ScoredDoc {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Canonical ranking order: descending score, then ascending doc id.
/// Scores are finite here; `-0.0` and `0.0` tie.
pub(crate) fn canonical_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Ranked retrieval output per query, always in canonical order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunList {
    map: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RunList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a query's ranking, sorting it canonically. Rejects duplicate
    /// doc ids, non-finite scores and repeated queries.
    pub fn insert(&mut self, query_id: impl Into<String>, mut docs: Vec<ScoredDoc>) -> Result<()> {
        let query_id = query_id.into();
        if self.map.contains_key(&query_id) {
            return Err(Error::invalid(format!("run already contains query '{query_id}'")));
        }
        if let Some(d) = docs.iter().find(|d| !d.score.is_finite()) {
            return Err(Error::invalid(format!(
                "query '{query_id}': non-finite score for '{}'",
                d.doc_id
            )));
        }
        let mut seen = BTreeSet::new();
        for d in &docs {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::invalid(format!(
                    "query '{query_id}' ranks '{}' more than once",
                    d.doc_id
                )));
            }
        }
        docs.sort_by(canonical_order);
        self.map.insert(query_id, docs);
        Ok(())
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.map.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<ScoredDoc>)> {
        self.map.iter()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
