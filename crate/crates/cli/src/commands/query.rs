use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ctsr_core::dataset::{resample_linear, znormalize};
use ctsr_core::io::write_atomic;
use ctsr_core::metrics::rank_scores;
use ctsr_core::scorer::DistanceScorer;
use ctsr_core::{CorpusIndex, Scorer, Split, TimeSeries};

use super::{load_corpus, load_model, sibling_manifest, write_manifest};
use crate::cli::{Command, Method, QueryArgs};

/// Same tolerance the corpus uses to accept a stored series as normalized.
const NORMALIZED_TOLERANCE: f64 = 1e-9;

pub fn query(args: &QueryArgs, command: &Command) -> Result<()> {
    if args.top_k == 0 {
        bail!("--top-k must be positive");
    }
    let corpus = load_corpus(&args.corpus)?;
    let (values, known) = match (args.series_id, &args.query_file) {
        (Some(id), _) => {
            let s = corpus.get(id).with_context(|| format!("no series with id {id} in the corpus"))?;
            (s.values.clone(), Some(s))
        }
        (None, Some(path)) => (read_query_file(path, corpus.length())?, None),
        (None, None) => bail!("give --series-id or --query-file"),
    };

    let model = match (args.method.is_neural(), &args.checkpoint) {
        (true, Some(p)) => Some(load_model(p, &corpus)?),
        (true, None) => bail!("method {} needs --checkpoint", args.method.as_str()),
        (false, _) => None,
    };
    let scorer: Box<dyn Scorer + '_> = match (&model, args.method) {
        (Some(m), method) => {
            let m = m.as_pair_model();
            if m.kind() != method.as_str() {
                bail!("checkpoint holds a {} model, not {}", m.kind(), method.as_str());
            }
            m.scorer()
        }
        (None, Method::Ed) => Box::new(DistanceScorer::euclidean()),
        (None, _) => Box::new(DistanceScorer::dtw()),
    };

    // the query itself is never its own result
    let database: Vec<&TimeSeries> = corpus
        .split(Split::Train)
        .into_iter()
        .filter(|s| Some(s.series_id) != known.map(|k| k.series_id))
        .collect();
    let candidates: Vec<&[f64]> = database.iter().map(|s| s.values.as_slice()).collect();
    let scores = scorer.score_all(&values, &candidates)?;
    let ranked = rank_scores(known.map(|k| k.series_id), database.iter().map(|s| s.series_id).zip(scores).collect())?;

    let table = render(&corpus, &ranked.entries, known, args.top_k);
    print!("{table}");
    if let Some(out) = &args.out {
        write_atomic(out, table.as_bytes())?;
        write_manifest(&sibling_manifest(out), command)?;
    }
    Ok(())
}

/// `rank,series_id,dataset_id,class_label,score,relevant`; `relevant` is blank
/// when the query has no known group.
fn render(corpus: &CorpusIndex, entries: &[(u64, f64)], known: Option<&TimeSeries>, top_k: usize) -> String {
    let mut out = String::from("rank,series_id,dataset_id,class_label,score,relevant\n");
    for (rank, &(id, score)) in entries.iter().take(top_k).enumerate() {
        let s = corpus.get(id).expect("ranked ids come from the corpus");
        let relevant = known.map(|q| q.is_relevant_to(s).to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{}", rank + 1, id, s.dataset_id, s.class_label, score, relevant);
    }
    out
}

/// One value per line; blank lines are ignored. Series of another length are
/// resampled to `length`, and unnormalized input is z-normalized.
fn read_query_file(path: &Path, length: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: not a number: {line:?}", path.display(), i + 1))?;
        if !v.is_finite() {
            bail!("{}:{}: value is not finite", path.display(), i + 1);
        }
        values.push(v);
    }
    if values.len() < 2 {
        bail!("{}: a query needs at least two values", path.display());
    }
    if values.len() != length {
        log::warn!("query has {} values; resampling to the corpus length {length}", values.len());
        values = resample_linear(&values, length);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if mean.abs() < NORMALIZED_TOLERANCE && (std - 1.0).abs() < NORMALIZED_TOLERANCE {
        return Ok(values);
    }
    Ok(znormalize(&values).0)
}
