use anyhow::Result;
use ctsr_core::io::write_atomic;
use ctsr_core::models::PairModel;
use ctsr_core::training::{train as run_training, training_log_csv, EpochRecord, TrainOutcome};
use ctsr_core::{AnyModel, CorpusIndex, ModelKind, TrainConfig};

use super::{ensure_dir, load_corpus, write_manifest};
use crate::cli::{Command, ModelArg, TrainArgs};

pub fn train(args: &TrainArgs, command: &Command) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let config = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        steps_per_epoch: args.steps,
        learning_rate: args.lr,
        seed: args.seed,
        val_sample: args.val_sample,
        select_k: 10,
    };
    config.validate()?;
    ensure_dir(&args.out)?;
    write_manifest(&args.out.join("manifest.json"), command)?;

    let kind = match args.model {
        ModelArg::Rn1d => ModelKind::Rn1d,
        ModelArg::Rn2d => ModelKind::Rn2d,
    };
    let save_epoch = |r: &EpochRecord| {
        let path = args.out.join(format!("epoch_{:03}.ckpt", r.epoch));
        r.checkpoint.save(&path)?;
        println!("epoch {}\tloss {:.6}\tval_ndcg@10 {:.6}", r.epoch, r.mean_loss, r.val_ndcg);
        Ok(())
    };
    let outcome = match AnyModel::init(kind, args.seed) {
        AnyModel::Rn2d(mut m) => fit(&mut m, &corpus, &config, save_epoch)?,
        AnyModel::Rn1d(mut m) => fit(&mut m, &corpus, &config, save_epoch)?,
    };

    outcome.best().save(&args.out.join("best.ckpt"))?;
    let log = training_log_csv(&outcome.history, args.wall_clock);
    write_atomic(&args.out.join("train.csv"), log.as_bytes())?;
    match ctsr_core::training::select_best(&outcome.history) {
        Some(r) => println!("best epoch {} (val_ndcg@10 {:.6})", r.epoch, r.val_ndcg),
        None => println!("no epochs run; best.ckpt is the initialization"),
    }
    Ok(())
}

fn fit<M: PairModel>(
    model: &mut M,
    corpus: &CorpusIndex,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord) -> ctsr_core::Result<()>,
) -> Result<TrainOutcome> {
    Ok(run_training(model, corpus, config, on_epoch)?)
}
