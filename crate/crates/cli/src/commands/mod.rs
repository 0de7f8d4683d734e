mod eval;
mod ingest;
mod query;
mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ctsr_core::io::write_atomic;
use ctsr_core::{AnyModel, Checkpoint, CorpusIndex, SplitRatios};
use serde::Serialize;

use crate::cli::{Command, SplitArgs};

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Ingest(args) => ingest::ingest(args, command),
        Command::Synth(args) => ingest::synth(args, command),
        Command::Train(args) => train::train(args, command),
        Command::Eval(args) => eval::eval(args, command),
        Command::Query(args) => query::query(args, command),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(flatten)]
    command: &'a Command,
}

/// Echoes the fully resolved invocation so the run can be replayed.
fn write_manifest(path: &Path, command: &Command) -> Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// `corpus.json` -> `corpus.json.manifest.json`, for commands whose output is one file.
fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn ratios(args: &SplitArgs) -> Result<SplitRatios> {
    let r = SplitRatios {
        train: args.train_ratio,
        val: args.val_ratio,
        test: args.test_ratio,
    };
    r.validate()?;
    Ok(r)
}

fn load_corpus(path: &Path) -> Result<CorpusIndex> {
    CorpusIndex::load(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn load_model(path: &Path, corpus: &CorpusIndex) -> Result<AnyModel> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    if ckpt.common_length != corpus.length() {
        bail!(
            "checkpoint {} was trained on length {} but the corpus uses {}",
            path.display(),
            ckpt.common_length,
            corpus.length()
        );
    }
    Ok(AnyModel::from_checkpoint(&ckpt)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
