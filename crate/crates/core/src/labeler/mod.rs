//! Query-domain labels from document categories.
//!
//! A query is labeled with every top-level category reachable from any
//! category of any of its relevant documents, walking child→parent edges
//! breadth-first. Top-level categories end a path; all of them that are
//! reached are collected.

mod io;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::AddAssign;

use rayon::prelude::*;

pub use io::{
    parse_category_graph, parse_doc_categories, parse_label_file, parse_top_categories, read_category_graph,
    read_doc_categories, read_label_file, read_top_categories, write_label_file,
};

use crate::domain::DomainLabelVector;
use crate::error::{Error, Result};
use crate::eval::QrelSet;

pub const DEFAULT_MAX_DEPTH: usize = 50;

/// Child→parent category edges plus the ordered top-level categories, whose
/// positions are the domain indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryGraph {
    parents: HashMap<String, Vec<String>>,
    known: HashSet<String>,
    top_categories: Vec<String>,
    top_index: HashMap<String, usize>,
    max_depth: usize,
}

impl CategoryGraph {
    pub fn new(edges: impl IntoIterator<Item = (String, String)>, top_categories: Vec<String>) -> Result<Self> {
        if top_categories.is_empty() {
            return Err(Error::invalid("no top-level categories"));
        }
        let mut top_index = HashMap::with_capacity(top_categories.len());
        for (i, c) in top_categories.iter().enumerate() {
            if top_index.insert(c.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate top-level category '{c}'")));
            }
        }
        let mut parents: HashMap<String, Vec<String>> = HashMap::new();
        let mut known: HashSet<String> = top_categories.iter().cloned().collect();
        for (child, parent) in edges {
            known.insert(child.clone());
            known.insert(parent.clone());
            parents.entry(child).or_default().push(parent);
        }
        Ok(CategoryGraph {
            parents,
            known,
            top_categories,
            top_index,
            max_depth: DEFAULT_MAX_DEPTH,
        })
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn top_categories(&self) -> &[String] {
        &self.top_categories
    }

    pub fn num_domains(&self) -> usize {
        self.top_categories.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Breadth-first walk from `category`; returns the indices of the
    /// top-level categories reached.
    pub fn resolve(&self, category: &str) -> (BTreeSet<usize>, Warnings) {
        let mut tops = BTreeSet::new();
        let mut warnings = Warnings::default();
        if !self.known.contains(category) {
            warnings.unknown_categories += 1;
            return (tops, warnings);
        }
        let mut visited: HashSet<&str> = HashSet::new();
        let mut queue: VecDeque<(&str, usize)> = VecDeque::new();
        visited.insert(category);
        queue.push_back((category, 0));
        let mut truncated = false;
        while let Some((node, depth)) = queue.pop_front() {
            if let Some(&i) = self.top_index.get(node) {
                tops.insert(i);
                continue;
            }
            let Some(parents) = self.parents.get(node) else {
                continue;
            };
            if depth >= self.max_depth {
                truncated = true;
                continue;
            }
            for p in parents {
                if visited.insert(p.as_str()) {
                    queue.push_back((p.as_str(), depth + 1));
                }
            }
        }
        warnings.truncated_walks += usize::from(truncated);
        (tops, warnings)
    }
}

/// Non-fatal problems met while labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Warnings {
    pub unknown_categories: usize,
    pub missing_docs: usize,
    /// Walks that hit the depth cap with parents left unexplored.
    pub truncated_walks: usize,
}

impl AddAssign for Warnings {
    fn add_assign(&mut self, o: Self) {
        self.unknown_categories += o.unknown_categories;
        self.missing_docs += o.missing_docs;
        self.truncated_walks += o.truncated_walks;
    }
}

/// Categories assigned to each document. Empty lists are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocCategoryMap {
    map: HashMap<String, Vec<String>>,
}

impl DocCategoryMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, categories: Vec<String>) -> Result<()> {
        let doc_id = doc_id.into();
        if self.map.contains_key(&doc_id) {
            return Err(Error::invalid(format!("duplicate document '{doc_id}' in category map")));
        }
        self.map.insert(doc_id, categories);
        Ok(())
    }

    pub fn categories(&self, doc_id: &str) -> Option<&[String]> {
        self.map.get(doc_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Fraction of documents with at least one category.
    pub fn labeled_fraction(&self) -> f64 {
        if self.map.is_empty() {
            return 0.0;
        }
        self.map.values().filter(|c| !c.is_empty()).count() as f64 / self.map.len() as f64
    }
}

/// Top-level categories reachable from `category`, by name.
pub fn resolve_top_categories(category: &str, graph: &CategoryGraph) -> BTreeSet<String> {
    graph
        .resolve(category)
        .0
        .into_iter()
        .map(|i| graph.top_categories[i].clone())
        .collect()
}

fn label_counted<S: AsRef<str>>(
    relevant_doc_ids: &[S],
    doc_cats: &DocCategoryMap,
    graph: &CategoryGraph,
) -> (DomainLabelVector, Warnings) {
    let mut labels = DomainLabelVector::zeros(graph.num_domains());
    let mut warnings = Warnings::default();
    for doc in relevant_doc_ids {
        let Some(cats) = doc_cats.categories(doc.as_ref()) else {
            warnings.missing_docs += 1;
            continue;
        };
        for c in cats {
            let (tops, w) = graph.resolve(c);
            warnings += w;
            for i in tops {
                labels.set(i);
            }
        }
    }
    (labels, warnings)
}

/// Union of the top-level categories of all relevant documents, as a
/// multi-hot vector in top-category order.
pub fn label_query<S: AsRef<str>>(
    query_id: &str,
    relevant_doc_ids: &[S],
    doc_cats: &DocCategoryMap,
    graph: &CategoryGraph,
) -> Result<DomainLabelVector> {
    if relevant_doc_ids.is_empty() {
        return Err(Error::invalid(format!("query '{query_id}' has no relevant documents")));
    }
    Ok(label_counted(relevant_doc_ids, doc_cats, graph).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverageStats {
    /// Queries with at least one relevant document.
    pub queries: usize,
    /// Queries with at least one label.
    pub labeled: usize,
    /// Labels summed over labeled queries.
    pub total_labels: usize,
    pub warnings: Warnings,
}

impl CoverageStats {
    pub fn labeled_fraction(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.labeled as f64 / self.queries as f64
        }
    }

    /// Mean labels per labeled query.
    pub fn avg_labels(&self) -> f64 {
        if self.labeled == 0 {
            0.0
        } else {
            self.total_labels as f64 / self.labeled as f64
        }
    }
}

impl fmt::Display for CoverageStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "labeled={:.1}% avg_labels={:.2}",
            100.0 * self.labeled_fraction(),
            self.avg_labels()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    /// In query-id order.
    pub labels: Vec<(String, DomainLabelVector)>,
    pub stats: CoverageStats,
}

/// Labels every query that has a relevant document.
pub fn build_label_file(qrels: &QrelSet, doc_cats: &DocCategoryMap, graph: &CategoryGraph) -> Result<LabelFile> {
    if qrels.is_empty() {
        return Err(Error::invalid("qrels are empty"));
    }
    let judged: Vec<(&String, Vec<&str>)> = qrels
        .iter()
        .filter(|(_, rel)| !rel.is_empty())
        .map(|(q, rel)| (q, rel.iter().map(String::as_str).collect()))
        .collect();
    let labeled: Vec<(DomainLabelVector, Warnings)> = judged
        .par_iter()
        .map(|(_, docs)| label_counted(docs, doc_cats, graph))
        .collect();

    let mut stats = CoverageStats { queries: judged.len(), ..Default::default() };
    let mut labels = Vec::with_capacity(judged.len());
    for ((q, _), (v, w)) in judged.into_iter().zip(labeled) {
        stats.warnings += w;
        if !v.is_unlabeled() {
            stats.labeled += 1;
            stats.total_labels += v.count_ones();
        }
        labels.push((q.clone(), v));
    }
    Ok(LabelFile { labels, stats })
}
