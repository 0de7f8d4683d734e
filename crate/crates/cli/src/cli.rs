use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ctsr", version, about = "Cross-domain time-series retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Build a corpus file from a UCR-style archive directory.
    Ingest(IngestArgs),
    /// Generate a synthetic multi-domain corpus file.
    Synth(SynthArgs),
    /// Train a neural scorer and keep the best checkpoint by validation NDCG@10.
    Train(TrainArgs),
    /// Evaluate scorers on the test queries and write metric tables.
    Eval(EvalArgs),
    /// Rank the database for one query.
    Query(QueryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ed,
    Dtw,
    Rn1d,
    Rn2d,
}

impl Method {
    pub fn is_neural(self) -> bool {
        matches!(self, Method::Rn1d | Method::Rn2d)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ed => "ed",
            Method::Dtw => "dtw",
            Method::Rn1d => "rn1d",
            Method::Rn2d => "rn2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Rn1d,
    Rn2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuerySplit {
    Val,
    Test,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.8)]
    pub train_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_ratio: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// One sub-directory per dataset, each holding TSV/CSV files with the label first.
    #[arg(long)]
    pub archive: PathBuf,
    /// Corpus file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub domains: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 60)]
    pub per_class: usize,
    #[arg(long, default_value_t = 128)]
    pub length: usize,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Rn2d)]
    pub model: ModelArg,
    /// Output directory for checkpoints, the training log and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Optimizer steps per epoch.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cap on validation queries scored after each epoch.
    #[arg(long, default_value_t = 500)]
    pub val_sample: usize,
    /// Record per-epoch wall-clock time in the log (makes it run-dependent).
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Methods to compare, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ed,dtw")]
    pub method: Vec<Method>,
    /// Checkpoints for the neural methods; each is matched by its stored kind.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Cutoffs: a list (`5,10`) or an inclusive range (`5..15`).
    #[arg(long = "ks", alias = "k", default_value = "10", value_parser = parse_ks)]
    pub ks: KList,
    #[arg(long, value_enum, default_value_t = QuerySplit::Test)]
    pub split: QuerySplit,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-query values and pairwise t-tests.
    #[arg(long)]
    pub per_query: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QueryArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Dtw)]
    pub method: Method,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// A series already in the corpus.
    #[arg(long, conflicts_with = "query_file", required_unless_present = "query_file")]
    pub series_id: Option<u64>,
    /// Plain text file with one value per line.
    #[arg(long)]
    pub query_file: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub top_k: usize,
    /// Optional CSV export of the printed table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct KList(pub Vec<usize>);

pub fn parse_ks(s: &str) -> Result<KList, String> {
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {s:?}"))?;
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| format!("bad cutoff {p:?}")))
            .collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err("cutoffs must be positive".into());
    }
    Ok(KList(ks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_lists_and_ranges() {
        assert_eq!(parse_ks("10").unwrap().0, vec![10]);
        assert_eq!(parse_ks("5,10, 15").unwrap().0, vec![5, 10, 15]);
        assert_eq!(parse_ks("5..15").unwrap().0, (5..=15).collect::<Vec<_>>());
        assert_eq!(parse_ks("3..=4").unwrap().0, vec![3, 4]);
        assert!(parse_ks("0").is_err());
        assert!(parse_ks("9..3").is_err());
        assert!(parse_ks("x").is_err());
    }

    #[test]
    fn command_line_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["ctsr", "eval", "--corpus", "c.json", "--method", "ed,rn2d", "--ks", "5..6", "--out", "o"]).unwrap();
        let Command::Eval(args) = cli.command else { panic!() };
        assert_eq!(args.method, vec![Method::Ed, Method::Rn2d]);
        assert_eq!(args.ks.0, vec![5, 6]);
        assert!(Cli::try_parse_from(["ctsr", "eval", "--corpus", "c", "--method", "knn", "--out", "o"]).is_err());
    }
}
