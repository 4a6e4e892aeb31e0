use desireme::eval::trec;
use desireme::labeler::{
    build_label_file, read_category_graph, read_doc_categories, read_top_categories, write_label_file,
};
use serde::Serialize;

use super::{require_input, require_output, write_file};
use crate::args::LabelArgs;
use crate::config::echo;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct Echo {
    graph: String,
    top_categories: String,
    doc_categories: String,
    qrels: String,
    max_depth: usize,
}

pub fn run(a: LabelArgs) -> Result<()> {
    for p in [&a.graph, &a.top_categories, &a.doc_categories, &a.qrels] {
        require_input(p)?;
    }
    require_output(&a.output)?;

    let tops = read_top_categories(&a.top_categories)?;
    let mut graph = read_category_graph(&a.graph, tops)?;
    if let Some(d) = a.max_depth {
        graph = graph.with_max_depth(d);
    }
    echo(
        "label",
        &Echo {
            graph: a.graph.display().to_string(),
            top_categories: a.top_categories.display().to_string(),
            doc_categories: a.doc_categories.display().to_string(),
            qrels: a.qrels.display().to_string(),
            max_depth: graph.max_depth(),
        },
    );
    let docs = read_doc_categories(&a.doc_categories)?;
    let qrels = trec::read_qrels(&a.qrels)?;
    if qrels.is_empty() {
        return Err(CliError::usage(format!("{}: no judgments", a.qrels.display())));
    }
    let file = build_label_file(&qrels, &docs, &graph)?;
    write_file(&a.output, |w| write_label_file(w, &file))?;

    let w = file.stats.warnings;
    if w.unknown_categories + w.missing_docs + w.truncated_walks > 0 {
        log::warn!(
            "unknown categories: {}, documents without categories entry: {}, depth-capped walks: {}",
            w.unknown_categories,
            w.missing_docs,
            w.truncated_walks
        );
    }
    println!(
        "queries={} {} labeled_docs={:.1}%",
        file.stats.queries,
        file.stats,
        100.0 * docs.labeled_fraction()
    );
    Ok(())
}
