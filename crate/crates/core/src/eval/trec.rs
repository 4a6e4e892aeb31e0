//! TREC qrels (`query_id 0 doc_id rel`) and run
//! (`query_id Q0 doc_id rank score tag`) files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{QrelSet, RunList, ScoredDoc};
use crate::error::{Error, Result};

/// Parses qrels; a relevance above zero marks the document relevant.
pub fn parse_qrels<R: Read>(reader: R, origin: &str) -> Result<QrelSet> {
    let mut qrels = QrelSet::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [query, _, doc, rel] = fields[..] else {
            return Err(Error::format(origin, format!("line {}: expected 4 fields, got {}", n + 1, fields.len())));
        };
        let rel: i64 = rel
            .parse()
            .map_err(|_| Error::format(origin, format!("line {}: bad relevance '{rel}'", n + 1)))?;
        qrels.insert(query, doc, rel > 0);
    }
    Ok(qrels)
}

pub fn read_qrels(path: &Path) -> Result<QrelSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(file, &path.display().to_string())
}

pub fn write_qrels<W: Write>(mut w: W, qrels: &QrelSet) -> std::io::Result<()> {
    for (q, docs) in qrels.iter() {
        for d in docs {
            writeln!(w, "{q} 0 {d} 1")?;
        }
    }
    Ok(())
}

/// Parses a run. Rankings are re-sorted canonically, so the rank column is
/// only validated, not trusted.
pub fn parse_run<R: Read>(reader: R, origin: &str) -> Result<RunList> {
    let mut by_query: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [query, _, doc, rank, score, _] = fields[..] else {
            return Err(Error::format(origin, format!("line {}: expected 6 fields, got {}", n + 1, fields.len())));
        };
        rank.parse::<u64>()
            .map_err(|_| Error::format(origin, format!("line {}: bad rank '{rank}'", n + 1)))?;
        let score: f64 = score
            .parse()
            .map_err(|_| Error::format(origin, format!("line {}: bad score '{score}'", n + 1)))?;
        by_query.entry(query.to_string()).or_default().push(ScoredDoc::new(doc, score));
    }
    let mut run = RunList::new();
    for (q, docs) in by_query {
        run.insert(q, docs).map_err(|e| Error::format(origin, e.to_string()))?;
    }
    Ok(run)
}

pub fn read_run(path: &Path) -> Result<RunList> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_run(file, &path.display().to_string())
}

/// Writes in canonical order. Scores use the shortest representation that
/// round-trips exactly.
pub fn write_run<W: Write>(w: W, run: &RunList, tag: &str) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for (q, docs) in run.iter() {
        for (i, d) in docs.iter().enumerate() {
            writeln!(w, "{q} Q0 {} {} {} {tag}", d.doc_id, i + 1, d.score)?;
        }
    }
    w.flush()
}

pub fn save_run(path: &Path, run: &RunList, tag: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_run(file, run, tag).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_parse() {
        let q = parse_qrels("q1 0 d1 1\n\nq1 0 d2 0\nq2 0 d3 2\n".as_bytes(), "mem").unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.relevant("q1").unwrap().len(), 1);
        assert!(parse_qrels("q1 0 d1\n".as_bytes(), "mem").is_err());
        assert!(parse_qrels("q1 0 d1 x\n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn run_round_trip() {
        let mut run = RunList::new();
        run.insert("q1", vec![ScoredDoc::new("a", 0.1 + 0.2), ScoredDoc::new("b", -1e-300)])
            .unwrap();
        run.insert("q2", vec![ScoredDoc::new("c", 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_run(&mut buf, &run, "tag").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("q1 Q0 a 1 0.30000000000000004 tag\n"));
        assert_eq!(parse_run(&buf[..], "mem").unwrap(), run);
    }

    #[test]
    fn run_parse_errors() {
        assert!(parse_run("q Q0 a 1 0.5\n".as_bytes(), "mem").is_err());
        assert!(parse_run("q Q0 a x 0.5 t\n".as_bytes(), "mem").is_err());
        assert!(parse_run("q Q0 a 1 0.5 t\nq Q0 a 2 0.4 t\n".as_bytes(), "mem").is_err());
    }
}
