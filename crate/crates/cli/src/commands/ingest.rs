use anyhow::{Context, Result};
use ctsr_core::dataset::{build_corpus, generate, CorpusSummary, SynthConfig};

use super::{ratios, sibling_manifest, write_manifest};
use crate::cli::{Command, IngestArgs, SynthArgs};

pub fn ingest(args: &IngestArgs, command: &Command) -> Result<()> {
    if !args.archive.is_dir() {
        anyhow::bail!("archive directory {} does not exist", args.archive.display());
    }
    let corpus = build_corpus(&args.archive, ratios(&args.split)?, args.length, args.seed)
        .with_context(|| format!("ingesting {}", args.archive.display()))?;
    corpus.save(&args.out)?;
    write_manifest(&sibling_manifest(&args.out), command)?;
    print_summary(&corpus.summary());
    Ok(())
}

pub fn synth(args: &SynthArgs, command: &Command) -> Result<()> {
    let mut cfg = SynthConfig::new(args.seed, args.domains, args.classes, args.per_class, args.length);
    cfg.noise = args.noise;
    cfg.ratios = ratios(&args.split)?;
    let corpus = generate(&cfg)?;
    corpus.save(&args.out)?;
    write_manifest(&sibling_manifest(&args.out), command)?;
    print_summary(&corpus.summary());
    Ok(())
}

fn print_summary(s: &CorpusSummary) {
    println!("length\t{}", s.common_length);
    println!("datasets\t{}", s.datasets);
    println!("groups\t{}", s.groups);
    println!("train\t{}", s.train);
    println!("val\t{}", s.val);
    println!("test\t{}", s.test);
    println!("constant\t{}", s.constant_series);
}
