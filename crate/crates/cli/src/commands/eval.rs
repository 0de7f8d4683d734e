use anyhow::{bail, Result};
use ctsr_core::io::write_atomic;
use ctsr_core::metrics::evaluate;
use ctsr_core::scorer::DistanceScorer;
use ctsr_core::{AnyModel, Scorer, Split};

use super::{ensure_dir, load_corpus, load_model, write_manifest};
use crate::cli::{Command, EvalArgs, Method, QuerySplit};

pub fn eval(args: &EvalArgs, command: &Command) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let models: Vec<AnyModel> = args
        .checkpoint
        .iter()
        .map(|p| load_model(p, &corpus))
        .collect::<Result<_>>()?;
    let distance: Vec<(Method, DistanceScorer)> = vec![(Method::Ed, DistanceScorer::euclidean()), (Method::Dtw, DistanceScorer::dtw())];

    let mut scorers: Vec<Box<dyn Scorer + '_>> = Vec::new();
    for &method in &args.method {
        if scorers.iter().any(|s| s.name() == method.as_str()) {
            bail!("method {} listed twice", method.as_str());
        }
        if method.is_neural() {
            let model = models
                .iter()
                .map(AnyModel::as_pair_model)
                .find(|m| m.kind() == method.as_str());
            let Some(model) = model else {
                bail!("method {} needs a --checkpoint of that kind", method.as_str());
            };
            scorers.push(model.scorer());
        } else {
            let (_, s) = distance.iter().find(|(m, _)| *m == method).expect("distance method");
            scorers.push(Box::new(*s));
        }
    }

    let split = match args.split {
        QuerySplit::Val => Split::Val,
        QuerySplit::Test => Split::Test,
    };
    let queries = corpus.split(split);
    let database = corpus.split(Split::Train);
    let refs: Vec<&dyn Scorer> = scorers.iter().map(|s| s.as_ref()).collect();
    let report = evaluate(&queries, &database, &refs, &args.ks.0)?;

    ensure_dir(&args.out)?;
    write_manifest(&args.out.join("manifest.json"), command)?;
    let table = report.to_csv()?;
    write_atomic(&args.out.join("eval.csv"), table.as_bytes())?;
    if args.per_query {
        write_atomic(&args.out.join("per_query.csv"), report.per_query_csv()?.as_bytes())?;
        write_atomic(&args.out.join("ttest.csv"), report.ttest_csv()?.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}
