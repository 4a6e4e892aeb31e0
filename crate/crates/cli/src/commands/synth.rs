use std::fs;
use std::io::Write as _;
use std::path::Path;

use desireme::eval::{synth_benchmark, trec, SynthConfig, SynthQuery};
use desireme::{demb, Matrix, Vector};
use serde::Serialize;

use super::{require_output, write_file, Context};
use crate::args::SynthArgs;
use crate::config::echo;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct Echo {
    output: String,
    num_domains: usize,
    docs_per_domain: usize,
    queries_per_domain: usize,
    train_queries_per_domain: usize,
    dim: usize,
    noise: f64,
    offset_scale: f64,
    spread: f64,
    out_of_domain: bool,
    seed: u64,
}

fn stack(rows: &[Vector<f32>], dim: usize) -> Result<Matrix<f32>> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, dim));
    }
    let data = rows.iter().flat_map(|v| v.iter().copied()).collect();
    Ok(Matrix::new(rows.len(), dim, data)?)
}

fn save_queries(path: &Path, queries: &[(String, Vector<f32>)], dim: usize) -> Result<()> {
    let ids: Vec<String> = queries.iter().map(|(id, _)| id.clone()).collect();
    let rows: Vec<Vector<f32>> = queries.iter().map(|(_, v)| v.clone()).collect();
    Ok(demb::save(path, &ids, &stack(&rows, dim)?)?)
}

fn save_labels(path: &Path, queries: &[SynthQuery]) -> Result<()> {
    write_file(path, |w| {
        for q in queries {
            writeln!(w, "{}\t{}", q.id, q.labels)?;
        }
        Ok(())
    })
}

pub fn run(a: SynthArgs, ctx: &Context) -> Result<()> {
    require_output(&a.output)?;
    let d = SynthConfig::default();
    let config = SynthConfig {
        num_domains: a.num_domains.unwrap_or(d.num_domains),
        docs_per_domain: a.docs_per_domain.unwrap_or(d.docs_per_domain),
        queries_per_domain: a.queries_per_domain.unwrap_or(d.queries_per_domain),
        train_queries_per_domain: a.train_queries_per_domain.unwrap_or(d.train_queries_per_domain),
        dim: a.dim.unwrap_or(d.dim),
        noise: a.noise.unwrap_or(d.noise),
        offset_scale: a.offset_scale.unwrap_or(d.offset_scale),
        spread: d.spread,
        out_of_domain: a.out_of_domain,
        seed: ctx.explicit_seed.unwrap_or(d.seed),
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    echo(
        "synth",
        &Echo {
            output: a.output.display().to_string(),
            num_domains: config.num_domains,
            docs_per_domain: config.docs_per_domain,
            queries_per_domain: config.queries_per_domain,
            train_queries_per_domain: config.train_queries_per_domain,
            dim: config.dim,
            noise: config.noise,
            offset_scale: config.offset_scale,
            spread: config.spread,
            out_of_domain: config.out_of_domain,
            seed: config.seed,
        },
    );
    let bench = synth_benchmark(&config)?;
    let dir = &a.output;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    demb::save(&dir.join("docs.demb"), bench.store.ids(), bench.store.matrix())?;
    let train: Vec<(String, Vector<f32>)> = bench.train.iter().map(|q| (q.id.clone(), q.vector.clone())).collect();
    save_queries(&dir.join("train_queries.demb"), &train, config.dim)?;
    save_queries(&dir.join("test_queries.demb"), &bench.test_queries(), config.dim)?;
    save_queries(&dir.join("oracle_queries.demb"), &bench.oracle_queries(), config.dim)?;
    write_file(&dir.join("train_qrels.txt"), |w| trec::write_qrels(w, &bench.train_qrels()))?;
    write_file(&dir.join("test_qrels.txt"), |w| trec::write_qrels(w, &bench.qrels))?;
    save_labels(&dir.join("train_labels.txt"), &bench.train)?;
    save_labels(&dir.join("test_labels.txt"), &bench.test)?;
    write_file(&dir.join("domains.txt"), |w| {
        for c in 0..config.num_domains {
            writeln!(w, "domain{c}")?;
        }
        Ok(())
    })?;
    println!(
        "docs={} train_queries={} test_queries={} dir={}",
        bench.store.len(),
        bench.train.len(),
        bench.test.len(),
        dir.display()
    );
    Ok(())
}
