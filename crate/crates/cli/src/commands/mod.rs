mod gradcheck;
mod label;
mod retrieval;
mod synth;
mod train;
mod transform;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use desireme::demb;
use desireme::eval::EmbeddingStore;

use crate::args::Command;
use crate::config::FileConfig;
use crate::error::{CliError, Result};

/// Settings shared by every command.
pub struct Context {
    pub file: FileConfig,
    /// Resolved seed: flag, then file, then 0.
    pub seed: u64,
    /// Seed from the flag or file only, for commands with their own default.
    pub explicit_seed: Option<u64>,
}

pub fn run(command: Command, ctx: &Context) -> Result<()> {
    match command {
        Command::Label(a) => label::run(a),
        Command::Train(a) => train::run(a, ctx),
        Command::Transform(a) => transform::run(a, ctx),
        Command::Retrieve(a) => retrieval::retrieve(a, ctx),
        Command::Evaluate(a) => retrieval::evaluate(a),
        Command::Compare(a) => retrieval::compare(a, ctx),
        Command::Gradcheck(a) => gradcheck::run(a, ctx),
        Command::Synth(a) => synth::run(a, ctx),
    }
}

pub fn require_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("input file not found: {}", path.display())))
    }
}

/// The parent directory of an output must already exist.
pub fn require_output(path: &Path) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "output directory does not exist: {}",
            parent.display()
        )))
    }
}

/// A DEMB input plus its id sidecar.
pub fn require_embeddings(path: &Path) -> Result<()> {
    require_input(path)?;
    require_input(&demb::ids_path(path))
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore<f32>> {
    let (ids, matrix) = demb::load(path)?;
    Ok(EmbeddingStore::new(ids, matrix)?)
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}
