//! Triplet training with the Bayesian personalized ranking loss and
//! validation-driven model selection.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::CorpusIndex;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_with, Metric};
use crate::models::PairModel;
use crate::series::{Split, TimeSeries};
use crate::tensor::tape::softplus;
use crate::tensor::{AdamConfig, Checkpoint, OptimizerState, Tape};

/// `(anchor, positive, negative)` series ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor_id: u64,
    pub positive_id: u64,
    pub negative_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Cap on the number of validation queries scored after each epoch.
    pub val_sample: usize,
    /// Cutoff of the NDCG used for model selection.
    pub select_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 30,
            steps_per_epoch: 200,
            learning_rate: 1e-3,
            seed: 0,
            val_sample: 500,
            select_k: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.steps_per_epoch == 0 || self.val_sample == 0 || self.select_k == 0 {
            return Err(Error::Invalid(format!("train config sizes must be positive: {self:?}")));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("bad learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Draws valid triplets from the training split.
#[derive(Debug, Clone)]
pub struct TripletSampler {
    train: Vec<u64>,
    /// Same-group training peers of each training series.
    peers: BTreeMap<u64, Vec<u64>>,
    group_of: BTreeMap<u64, usize>,
}

impl TripletSampler {
    pub fn new(corpus: &CorpusIndex) -> Result<Self> {
        let train: Vec<u64> = corpus.split_ids(Split::Train).to_vec();
        let mut peers = BTreeMap::new();
        let mut group_of = BTreeMap::new();
        for (g, ids) in corpus.groups().values().enumerate() {
            let members: Vec<u64> = ids
                .iter()
                .copied()
                .filter(|id| corpus.get(*id).map(|s| s.split) == Some(Split::Train))
                .collect();
            for &id in &members {
                peers.insert(id, members.iter().copied().filter(|&p| p != id).collect::<Vec<_>>());
                group_of.insert(id, g);
            }
        }
        let groups_in_train: std::collections::BTreeSet<usize> = group_of.values().copied().collect();
        if !peers.values().any(|p: &Vec<u64>| !p.is_empty()) {
            return Err(Error::Invalid("no training series has a relevant peer".into()));
        }
        if groups_in_train.len() < 2 {
            return Err(Error::Invalid("training split needs at least two relevance groups".into()));
        }
        Ok(Self { train, peers, group_of })
    }

    /// Anchor uniform over training series (redrawn while it has no peer),
    /// positive uniform over its peers, negative uniform over training series
    /// from other groups.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Triplet {
        let anchor = loop {
            let a = *self.train.choose(rng).expect("non-empty");
            if !self.peers[&a].is_empty() {
                break a;
            }
        };
        let positive = *self.peers[&anchor].choose(rng).expect("has peers");
        let g = self.group_of[&anchor];
        let negative = loop {
            let n = *self.train.choose(rng).expect("non-empty");
            if self.group_of[&n] != g {
                break n;
            }
        };
        Triplet {
            anchor_id: anchor,
            positive_id: positive,
            negative_id: negative,
        }
    }
}

/// Batch mean of `-ln sigmoid(pos[i] - neg[i])`.
pub fn bpr_loss(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() {
        return Err(Error::Empty("bpr batch"));
    }
    if pos_scores.len() != neg_scores.len() {
        return Err(Error::ShapeMismatch {
            axis: "negative scores",
            expected: pos_scores.len(),
            got: neg_scores.len(),
        });
    }
    let sum: f64 = pos_scores.iter().zip(neg_scores).map(|(p, n)| softplus(n - p)).sum();
    Ok(sum / pos_scores.len() as f64)
}

#[derive(Debug, Clone)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_ndcg: f64,
    pub wall_ms: u128,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: Checkpoint,
    pub initial_val_ndcg: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// The selected checkpoint, or the initialization when no epoch ran.
    pub fn best(&self) -> &Checkpoint {
        select_best(&self.history).map_or(&self.initial, |r| &r.checkpoint)
    }
}

/// The record with the highest validation NDCG; ties go to the earliest epoch.
pub fn select_best(history: &[EpochRecord]) -> Option<&EpochRecord> {
    let mut best: Option<&EpochRecord> = None;
    for r in history {
        match best {
            Some(b) if !(r.val_ndcg > b.val_ndcg) => {}
            _ => best = Some(r),
        }
    }
    best
}

/// Validation queries: every answerable validation series, or a seeded
/// sample of `cap` of them, in id order.
pub fn validation_queries(corpus: &CorpusIndex, cap: usize, seed: u64) -> Vec<&TimeSeries> {
    let mut queries = corpus.queries(Split::Val);
    if queries.len() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a11_da7e_0001);
        queries.shuffle(&mut rng);
        queries.truncate(cap);
        queries.sort_by_key(|s| s.series_id);
    }
    queries
}

/// Mean NDCG@k of `queries` against the training split.
pub fn validation_ndcg(model: &dyn PairModel, corpus: &CorpusIndex, queries: &[&TimeSeries], k: usize) -> Result<f64> {
    let database = corpus.split(Split::Train);
    let scorer = model.scorer();
    let result = evaluate_with(queries, &database, scorer.as_ref(), &[k])?;
    Ok(result.mean(Metric::Ndcg, k).unwrap_or(0.0))
}

/// Runs one optimizer step on a batch and returns the batch-mean loss.
///
/// Triplet gradients are computed independently (in parallel when threads are
/// available) and summed in batch order, so the update does not depend on
/// the thread count.
pub fn train_step<M: PairModel>(
    model: &mut M,
    corpus: &CorpusIndex,
    batch: &[Triplet],
    optimizer: &mut OptimizerState,
) -> Result<f64> {
    let m = batch.len();
    if m == 0 {
        return Err(Error::Empty("batch"));
    }
    let lookup = |id: u64| {
        corpus
            .get(id)
            .map(|s| s.values.as_slice())
            .ok_or_else(|| Error::Invalid(format!("unknown series id {id}")))
    };
    let mut grad_sum = vec![0.0; model.param_count()];
    let mut loss_sum = 0.0;
    let chunk = rayon::current_num_threads().max(1);
    for triplets in batch.chunks(chunk) {
        let model_ref: &M = model;
        let parts = triplets
            .par_iter()
            .map(|t| {
                let mut tape = Tape::new();
                let bound = model_ref.bind(&mut tape);
                let (pos, neg) = model_ref.triplet_scores(
                    &mut tape,
                    &bound,
                    lookup(t.anchor_id)?,
                    lookup(t.positive_id)?,
                    lookup(t.negative_id)?,
                )?;
                let loss = tape.bpr_loss(pos, neg)?;
                let scaled = tape.scale(loss, 1.0 / m as f64);
                tape.backward(scaled)?;
                Ok((tape.value(loss).data()[0], model_ref.collect_grads(&tape, &bound)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (loss, grads) in parts {
            loss_sum += loss;
            for (a, g) in grad_sum.iter_mut().zip(&grads) {
                *a += g;
            }
        }
    }
    let mean_loss = loss_sum / m as f64;
    if !mean_loss.is_finite() || grad_sum.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            triplets: batch
                .iter()
                .map(|t| (t.anchor_id as usize, t.positive_id as usize, t.negative_id as usize))
                .collect(),
        });
    }
    model.zero_grad();
    model.accumulate_grads(&grad_sum)?;
    optimizer.step_model(model)?;
    Ok(mean_loss)
}

/// Trains `model` for `config.epochs` epochs. After each epoch the model is
/// scored on validation queries against the training split, snapshotted, and
/// handed to `on_epoch` (for logging or persisting) before training resumes.
pub fn train<M: PairModel>(
    model: &mut M,
    corpus: &CorpusIndex,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let sampler = TripletSampler::new(corpus)?;
    let queries = validation_queries(corpus, config.val_sample, config.seed);
    if queries.is_empty() {
        return Err(Error::Invalid("corpus has no answerable validation queries".into()));
    }
    let kind = model.kind();
    let length = corpus.length();
    let initial = model.to_checkpoint(kind, length);
    let initial_val_ndcg = validation_ndcg(model, corpus, &queries, config.select_k)?;
    log::info!("epoch 0: val ndcg@{} {initial_val_ndcg:.4}", config.select_k);

    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut optimizer = OptimizerState::for_model(adam, model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for _ in 0..config.steps_per_epoch {
            let batch: Vec<Triplet> = (0..config.batch_size).map(|_| sampler.sample(&mut rng)).collect();
            loss_sum += train_step(model, corpus, &batch, &mut optimizer)?;
        }
        let val_ndcg = validation_ndcg(model, corpus, &queries, config.select_k)?;
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / config.steps_per_epoch as f64,
            val_ndcg,
            wall_ms: started.elapsed().as_millis(),
            checkpoint: model.to_checkpoint(kind, length),
        };
        log::info!(
            "epoch {epoch}: loss {:.4} val ndcg@{} {:.4} ({} ms)",
            record.mean_loss,
            config.select_k,
            record.val_ndcg,
            record.wall_ms
        );
        on_epoch(&record)?;
        history.push(record);
    }
    Ok(TrainOutcome {
        initial,
        initial_val_ndcg,
        history,
    })
}

/// Training log as CSV: `epoch,mean_loss,val_ndcg10,wall_ms`. Wall-clock time
/// is left blank unless `with_wall_clock` is set, keeping the default log
/// reproducible byte for byte.
pub fn training_log_csv(history: &[EpochRecord], with_wall_clock: bool) -> String {
    let mut s = String::from("epoch,mean_loss,val_ndcg10,wall_ms\n");
    for r in history {
        let wall = if with_wall_clock { r.wall_ms.to_string() } else { String::new() };
        s.push_str(&format!("{},{},{},{}\n", r.epoch, r.mean_loss, r.val_ndcg, wall));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn record(epoch: usize, val: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            mean_loss: 0.5,
            val_ndcg: val,
            wall_ms: 0,
            checkpoint: Checkpoint {
                kind: "rn2d".into(),
                common_length: 8,
                params: vec![("x".into(), Tensor::scalar(epoch as f64))],
            },
        }
    }

    #[test]
    fn select_best_examples() {
        let h: Vec<_> = [0.5, 0.9, 0.7].iter().enumerate().map(|(i, &v)| record(i + 1, v)).collect();
        assert_eq!(select_best(&h).unwrap().epoch, 2);
        let flat: Vec<_> = (1..=4).map(|e| record(e, 0.6)).collect();
        assert_eq!(select_best(&flat).unwrap().epoch, 1);
        let rising: Vec<_> = (1..=4).map(|e| record(e, e as f64 / 10.0)).collect();
        assert_eq!(select_best(&rising).unwrap().epoch, 4);
        assert!(select_best(&[]).is_none());
    }

    #[test]
    fn bpr_fixed_points() {
        assert!((bpr_loss(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let margin_one = -(1.0 / (1.0 + (-1.0f64).exp())).ln();
        assert!((bpr_loss(&[1.0], &[0.0]).unwrap() - margin_one).abs() < 1e-12);
        assert!((margin_one - 0.313262).abs() < 1e-6);
        assert!(bpr_loss(&[], &[]).is_err());
        assert!(bpr_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bpr_decreases_toward_zero_with_margin() {
        let mut prev = f64::INFINITY;
        for m in [-5.0, -1.0, 0.0, 0.5, 1.0, 3.0, 10.0, 40.0] {
            let l = bpr_loss(&[m], &[0.0]).unwrap();
            assert!(l < prev && l > 0.0);
            prev = l;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn training_log_is_blank_on_wall_clock_by_default() {
        let log = training_log_csv(&[record(1, 0.25)], false);
        assert_eq!(log, "epoch,mean_loss,val_ndcg10,wall_ms\n1,0.5,0.25,\n");
    }
}
