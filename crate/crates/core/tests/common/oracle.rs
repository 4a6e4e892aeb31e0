//! Brute-force reference for the ranking metrics. Works from raw
//! `(query, doc, score)` triples and ranks by repeated selection of the best
//! remaining document, so it shares no code with the library's sorting.

use std::collections::{BTreeMap, BTreeSet};

use desireme::eval::{Metric, QrelSet, RunList, ScoredDoc};
use desireme::Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub triples: Vec<(String, String, f64)>,
    /// query → relevant docs (possibly empty).
    pub judged: BTreeMap<String, BTreeSet<String>>,
}

impl Instance {
    pub fn random(rng: &mut Rng) -> Instance {
        let n_queries = 1 + rng.below(10) as usize;
        let n_docs = 1 + rng.below(20) as usize;
        let docs: Vec<String> = (0..n_docs).map(|i| format!("doc{i}")).collect();
        let mut triples = Vec::new();
        let mut judged = BTreeMap::new();
        for q in 0..n_queries {
            let qid = format!("q{q}");
            let mut rel = BTreeSet::new();
            for d in &docs {
                if rng.uniform() < 0.25 {
                    rel.insert(d.clone());
                }
            }
            // Judged documents need not be in the corpus.
            if rng.uniform() < 0.2 {
                rel.insert(format!("ghost{q}"));
            }
            judged.insert(qid.clone(), rel);
            // Some judged queries are absent from the run.
            if rng.uniform() < 0.1 {
                continue;
            }
            for d in &docs {
                if rng.uniform() < 0.8 {
                    // Few distinct values so ties are common.
                    let score = rng.below(6) as f64 * 0.5 - 1.0;
                    triples.push((qid.clone(), d.clone(), score));
                }
            }
        }
        Instance { triples, judged }
    }

    pub fn run(&self) -> RunList {
        let mut by_query: BTreeMap<&str, Vec<ScoredDoc>> = BTreeMap::new();
        for (q, d, s) in &self.triples {
            by_query.entry(q).or_default().push(ScoredDoc::new(d.clone(), *s));
        }
        let mut run = RunList::new();
        for (q, docs) in by_query {
            run.insert(q, docs).unwrap();
        }
        run
    }

    pub fn qrels(&self) -> QrelSet {
        let mut q = QrelSet::new();
        for (qid, rel) in &self.judged {
            q.insert(qid, "", false);
            for d in rel {
                q.insert(qid, d, true);
            }
        }
        q
    }

    /// Relevance flags of ranks 1, 2, ... for `query`.
    fn ranked_relevance(&self, query: &str) -> Vec<bool> {
        let mut pool: Vec<(&str, f64)> = self
            .triples
            .iter()
            .filter(|(q, _, _)| q == query)
            .map(|(_, d, s)| (d.as_str(), *s))
            .collect();
        let rel = &self.judged[query];
        let mut flags = Vec::new();
        while !pool.is_empty() {
            let mut best = 0;
            for i in 1..pool.len() {
                let (d, s) = pool[i];
                let (bd, bs) = pool[best];
                if s > bs || (s == bs && d < bd) {
                    best = i;
                }
            }
            flags.push(rel.contains(pool[best].0));
            pool.remove(best);
        }
        flags
    }

    /// Per-query values and mean, over queries with a relevant document.
    pub fn metric(&self, metric: Metric) -> (BTreeMap<String, f64>, f64) {
        let mut per = BTreeMap::new();
        for (q, rel) in &self.judged {
            if rel.is_empty() {
                continue;
            }
            let flags = self.ranked_relevance(q);
            let r = rel.len();
            let value = match metric {
                Metric::Ndcg(k) => {
                    let mut dcg = 0.0;
                    for rank in 1..=k.min(flags.len()) {
                        if flags[rank - 1] {
                            dcg += 1.0 / ((rank + 1) as f64).log2();
                        }
                    }
                    let mut idcg = 0.0;
                    for rank in 1..=k.min(r) {
                        idcg += 1.0 / ((rank + 1) as f64).log2();
                    }
                    dcg / idcg
                }
                Metric::Map(k) => {
                    let mut hits = 0;
                    let mut sum = 0.0;
                    for rank in 1..=k.min(flags.len()) {
                        if flags[rank - 1] {
                            hits += 1;
                            sum += hits as f64 / rank as f64;
                        }
                    }
                    sum / r as f64
                }
                Metric::Mrr(k) => {
                    let mut v = 0.0;
                    for rank in 1..=k.min(flags.len()) {
                        if flags[rank - 1] {
                            v = 1.0 / rank as f64;
                            break;
                        }
                    }
                    v
                }
                Metric::Recall(k) => {
                    let mut hits = 0;
                    for rank in 1..=k.min(flags.len()) {
                        if flags[rank - 1] {
                            hits += 1;
                        }
                    }
                    hits as f64 / r as f64
                }
                Metric::PrecisionAt1 => {
                    if flags.first() == Some(&true) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            per.insert(q.clone(), value);
        }
        let mut sum = 0.0;
        for v in per.values() {
            sum += v;
        }
        let mean = sum / per.len() as f64;
        (per, mean)
    }

    pub fn has_judged_query(&self) -> bool {
        self.judged.values().any(|r| !r.is_empty())
    }
}
