use std::collections::HashSet;

use rayon::prelude::*;

use super::{canonical_order, RunList, ScoredDoc};
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{Matrix, Similarity, Vector};

const PARALLEL_MIN_DOCS: usize = 4096;

/// Precomputed document embeddings, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<S> {
    ids: Vec<String>,
    matrix: Matrix<S>,
}

impl<S: Scalar> EmbeddingStore<S> {
    pub fn new(ids: Vec<String>, matrix: Matrix<S>) -> Result<Self> {
        check_dim("embedding store ids vs rows", matrix.rows(), ids.len())?;
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id '{id}'")));
            }
        }
        Ok(EmbeddingStore { ids, matrix })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|d| d == id)
    }

    pub fn embedding(&self, index: usize) -> Vector<S> {
        Vector::from_vec(self.matrix.row(index).to_vec())
    }
}

/// Exhaustive top-`k` search. Ties are ordered by ascending doc id; returns
/// `min(k, N)` results.
pub fn retrieve<S: Scalar>(
    query: &Vector<S>,
    store: &EmbeddingStore<S>,
    k: usize,
    similarity: Similarity,
) -> Result<Vec<ScoredDoc>> {
    if store.is_empty() {
        return Err(Error::invalid("cannot retrieve from an empty store"));
    }
    if k == 0 {
        return Err(Error::invalid("retrieval depth k must be at least 1"));
    }
    check_dim("query vs store dimension", store.dim(), query.dim())?;

    // Each score is independent, so the parallel path yields the same list.
    let score = |i: usize| {
        let score = similarity.score(query.as_slice(), store.matrix.row(i)).as_f64();
        ScoredDoc::new(store.ids[i].as_str(), score)
    };
    let mut scored: Vec<ScoredDoc> = if store.len() >= PARALLEL_MIN_DOCS {
        (0..store.len()).into_par_iter().map(score).collect()
    } else {
        (0..store.len()).map(score).collect()
    };
    if let Some(bad) = scored.iter().find(|d| !d.score.is_finite()) {
        return Err(Error::numerical(format!("non-finite score for document '{}'", bad.doc_id)));
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, canonical_order);
        scored.truncate(k);
    }
    scored.sort_by(canonical_order);
    Ok(scored)
}

/// Retrieves for many queries in parallel; the result does not depend on
/// the thread count.
pub fn retrieve_batch<S: Scalar>(
    queries: &[(String, Vector<S>)],
    store: &EmbeddingStore<S>,
    k: usize,
    similarity: Similarity,
) -> Result<RunList> {
    let rankings = queries
        .par_iter()
        .map(|(_, q)| retrieve(q, store, k, similarity))
        .collect::<Result<Vec<_>>>()?;
    let mut run = RunList::new();
    for ((id, _), docs) in queries.iter().zip(rankings) {
        run.insert(id.clone(), docs)?;
    }
    Ok(run)
}
