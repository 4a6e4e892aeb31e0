//! Text formats: category graph (`child<TAB>parent`), top categories (one
//! per line, `#` comments), document categories (`doc<TAB>c1|c2|...`) and
//! label files (`query<TAB>bits`, `#` footer).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{CategoryGraph, DocCategoryMap, LabelFile};
use crate::domain::DomainLabelVector;
use crate::error::{Error, Result};

fn lines<'a, R: Read + 'a>(reader: R, origin: &'a str) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .map(move |(n, l)| l.map(|l| (n + 1, l)).map_err(|e| Error::io(origin, e)))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn parse_top_categories<R: Read>(reader: R, origin: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in lines(reader, origin) {
        let (_, line) = line?;
        let name = line.trim();
        if name.is_empty() || name.starts_with('#') {
            continue;
        }
        out.push(name.to_string());
    }
    Ok(out)
}

pub fn read_top_categories(path: &Path) -> Result<Vec<String>> {
    parse_top_categories(open(path)?, &path.display().to_string())
}

/// Reads the edges and builds the graph over `top_categories`.
pub fn parse_category_graph<R: Read>(reader: R, origin: &str, top_categories: Vec<String>) -> Result<CategoryGraph> {
    let mut edges = Vec::new();
    for line in lines(reader, origin) {
        let (n, line) = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((child, parent)) = line.split_once('\t') else {
            return Err(Error::format(origin, format!("line {n}: expected child<TAB>parent")));
        };
        edges.push((child.trim().to_string(), parent.trim().to_string()));
    }
    CategoryGraph::new(edges, top_categories).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn read_category_graph(path: &Path, top_categories: Vec<String>) -> Result<CategoryGraph> {
    parse_category_graph(open(path)?, &path.display().to_string(), top_categories)
}

pub fn parse_doc_categories<R: Read>(reader: R, origin: &str) -> Result<DocCategoryMap> {
    let mut map = DocCategoryMap::new();
    for line in lines(reader, origin) {
        let (n, line) = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (doc, cats) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let cats = cats
            .split('|')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        map.insert(doc.trim(), cats)
            .map_err(|e| Error::format(origin, format!("line {n}: {e}")))?;
    }
    Ok(map)
}

pub fn read_doc_categories(path: &Path) -> Result<DocCategoryMap> {
    parse_doc_categories(open(path)?, &path.display().to_string())
}

pub fn write_label_file<W: Write>(mut w: W, file: &LabelFile) -> std::io::Result<()> {
    for (q, v) in &file.labels {
        writeln!(w, "{q}\t{v}")?;
    }
    let s = &file.stats;
    writeln!(
        w,
        "# {s} queries={} unknown_categories={} missing_docs={} truncated_walks={}",
        s.queries, s.warnings.unknown_categories, s.warnings.missing_docs, s.warnings.truncated_walks
    )
}

/// Parses `query<TAB>bits` lines; `#` lines are skipped. All vectors must
/// have the same length.
pub fn parse_label_file<R: Read>(reader: R, origin: &str) -> Result<Vec<(String, DomainLabelVector)>> {
    let mut out: Vec<(String, DomainLabelVector)> = Vec::new();
    let mut seen = HashSet::new();
    for line in lines(reader, origin) {
        let (n, line) = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::format(origin, format!("line {n}: {m}"));
        let (q, bits) = line
            .split_once('\t')
            .ok_or_else(|| err("expected query<TAB>bitstring".into()))?;
        let v = DomainLabelVector::parse_bitstring(bits.trim()).map_err(|e| err(e.to_string()))?;
        if let Some((_, first)) = out.first() {
            if first.len() != v.len() {
                return Err(err(format!("label length {} differs from {}", v.len(), first.len())));
            }
        }
        if !seen.insert(q.to_string()) {
            return Err(err(format!("duplicate query '{q}'")));
        }
        out.push((q.to_string(), v));
    }
    Ok(out)
}

pub fn read_label_file(path: &Path) -> Result<Vec<(String, DomainLabelVector)>> {
    parse_label_file(open(path)?, &path.display().to_string())
}
