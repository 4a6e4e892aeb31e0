use std::collections::HashMap;
use std::io::Write as _;

use desireme::eval::trec;
use desireme::labeler::read_label_file;
use desireme::moe::checkpoint;
use desireme::training::train;
use desireme::{DomainLabelVector, TrainingExample};

use super::{load_store, require_embeddings, require_input, require_output, write_file, Context};
use crate::args::TrainArgs;
use crate::config::{echo, resolve_train_config, TrainEcho};
use crate::error::{CliError, Result};

pub fn run(a: TrainArgs, ctx: &Context) -> Result<()> {
    require_embeddings(&a.queries)?;
    require_embeddings(&a.docs)?;
    require_input(&a.qrels)?;
    require_input(&a.labels)?;
    require_output(&a.output)?;
    if let Some(log) = &a.log {
        require_output(log)?;
    }
    let config = resolve_train_config(&a.hyper, &ctx.file, ctx.seed)?;
    echo("train", &TrainEcho::from(&config));

    let queries = load_store(&a.queries)?;
    let docs = load_store(&a.docs)?;
    if queries.dim() != docs.dim() {
        return Err(CliError::usage(format!(
            "query dimension {} differs from document dimension {}",
            queries.dim(),
            docs.dim()
        )));
    }
    let qrels = trec::read_qrels(&a.qrels)?;
    let labels: HashMap<String, DomainLabelVector> = read_label_file(&a.labels)?.into_iter().collect();
    let num_domains = labels
        .values()
        .next()
        .map(DomainLabelVector::len)
        .ok_or_else(|| CliError::usage(format!("{}: no labels", a.labels.display())))?;

    let query_rows: HashMap<&str, usize> = queries.ids().iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let doc_rows: HashMap<&str, usize> = docs.ids().iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let (mut no_embedding, mut no_doc, mut unlabeled) = (0usize, 0usize, 0usize);
    let mut examples = Vec::new();
    for (q, rel) in qrels.iter() {
        let Some(&qi) = query_rows.get(q.as_str()) else {
            no_embedding += usize::from(!rel.is_empty());
            continue;
        };
        let label = match labels.get(q) {
            Some(l) => l.clone(),
            None => {
                unlabeled += 1;
                DomainLabelVector::zeros(num_domains)
            }
        };
        for d in rel {
            let Some(&di) = doc_rows.get(d.as_str()) else {
                no_doc += 1;
                continue;
            };
            examples.push(TrainingExample::new(q.clone(), queries.embedding(qi), docs.embedding(di), label.clone())?);
        }
    }
    if no_embedding + no_doc + unlabeled > 0 {
        log::warn!(
            "skipped {no_embedding} queries without embeddings and {no_doc} pairs without document embeddings; \
             {unlabeled} queries had no label line and train with all-zero labels"
        );
    }
    log::info!("training on {} query-document pairs, {} domains", examples.len(), num_domains);

    let outcome = train(&examples, &config)?;
    checkpoint::save(&outcome.params, &a.output)?;
    if let Some(log) = &a.log {
        write_file(log, |w| {
            for r in &outcome.log {
                writeln!(w, "{r}")?;
            }
            Ok(())
        })?;
    }
    match outcome.best_epoch {
        Some(e) => println!("best_epoch={e} epochs={}", outcome.log.len()),
        None => println!("best_epoch=none epochs=0"),
    }
    Ok(())
}
