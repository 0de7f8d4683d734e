//! Corpus construction, triplet sampling and training-loop properties.

use std::collections::BTreeMap;

use ctsr_core::dataset::{build_corpus, build_corpus_from_datasets, generate, synth_multidomain, RawDataset, SynthConfig};
use ctsr_core::models::Rn1dEncoder;
use ctsr_core::tensor::Parameterized;
use ctsr_core::training::{bpr_loss, select_best, training_log_csv, TripletSampler};
use ctsr_core::{euclidean_distance, train, CorpusIndex, Split, SplitRatios, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn write_archive(dir: &std::path::Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for dataset in ["Alpha", "Beta"] {
        let sub = dir.join(dataset);
        std::fs::create_dir_all(&sub).unwrap();
        // ten series per class, split across the TRAIN and TEST files
        for (file, rows) in [("TRAIN", 6), ("TEST", 4)] {
            let mut text = String::new();
            // lengths differ between files but not within one
            let n = rng.gen_range(20..40);
            for class in ["1", "2"] {
                for _ in 0..rows {
                    let vals: Vec<String> = (0..n).map(|_| format!("{:.4}", rng.gen_range(-1.0..1.0))).collect();
                    text.push_str(&format!("{class}\t{}\n", vals.join("\t")));
                }
            }
            std::fs::write(sub.join(format!("{dataset}_{file}.tsv")), text).unwrap();
        }
    }
}

#[test]
fn archive_ingest_arithmetic_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    write_archive(dir.path());
    let corpus = build_corpus(dir.path(), SplitRatios::default(), 64, 5).unwrap();
    let summary = corpus.summary();
    assert_eq!(summary.groups, 4);
    let counts: Vec<usize> = Split::ALL.iter().map(|&s| corpus.split_ids(s).len()).collect();
    assert_eq!(counts, vec![32, 4, 4]);
    let again = build_corpus(dir.path(), SplitRatios::default(), 64, 5).unwrap();
    assert_eq!(corpus.to_json().unwrap(), again.to_json().unwrap());
    let other = build_corpus(dir.path(), SplitRatios::default(), 64, 6).unwrap();
    assert_ne!(corpus.to_json().unwrap(), other.to_json().unwrap());

    let empty = tempfile::tempdir().unwrap();
    assert!(build_corpus(empty.path(), SplitRatios::default(), 64, 5).is_err());
    assert!(build_corpus(&dir.path().join("missing"), SplitRatios::default(), 64, 5).is_err());
}

#[test]
fn corpus_file_round_trips() {
    let corpus = synth_multidomain(3, 2, 2, 10, 32).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.json");
    corpus.save(&path).unwrap();
    let loaded = CorpusIndex::load(&path).unwrap();
    assert_eq!(loaded.series(), corpus.series());
    assert_eq!(loaded.length(), 32);
}

#[test]
fn split_shape_at_scale() {
    // three groups of 1000 land on the same 80/10/10 shape as a full archive
    let datasets: Vec<RawDataset> = vec![(
        "big".into(),
        (0..3000).map(|i| (format!("{}", i % 3), vec![i as f64, 1.0, 0.0])).collect(),
    )];
    let corpus = build_corpus_from_datasets(datasets, SplitRatios::default(), 3, 1).unwrap();
    let train = corpus.split_ids(Split::Train).len() as f64 / 3000.0;
    assert!((train - 0.8).abs() < 0.005);
    assert_eq!(corpus.split_ids(Split::Val).len(), corpus.split_ids(Split::Test).len());
}

#[test]
fn singleton_groups_train_only() {
    let datasets: Vec<RawDataset> = vec![("d".into(), vec![("lonely".into(), vec![0.0, 1.0]), ("x".into(), vec![1.0, 0.0]), ("x".into(), vec![2.0, 0.0])])];
    let corpus = build_corpus_from_datasets(datasets, SplitRatios::default(), 4, 0).unwrap();
    assert_eq!(corpus.get(0).unwrap().split, Split::Train);
    assert!(corpus.queries(Split::Val).iter().chain(corpus.queries(Split::Test).iter()).all(|s| s.series_id != 0));
}

#[test]
fn synthetic_groups_and_reproducibility() {
    let a = synth_multidomain(7, 4, 3, 20, 48).unwrap();
    assert_eq!(a.groups().len(), 12);
    let b = synth_multidomain(7, 4, 3, 20, 48).unwrap();
    assert_eq!(a.series(), b.series());
    let datasets: std::collections::BTreeSet<&str> = a.series().iter().map(|s| s.dataset_id.as_str()).collect();
    assert_eq!(datasets.len(), 4);
}

#[test]
fn distant_frequencies_separate_under_nearest_neighbour() {
    let mut cfg = SynthConfig::new(11, 1, 2, 80, 64);
    cfg.ratios = SplitRatios {
        train: 0.5,
        val: 0.0,
        test: 0.5,
    };
    let corpus = generate(&cfg).unwrap();
    let train = corpus.split(Split::Train);
    let test = corpus.split(Split::Test);
    let correct = test
        .iter()
        .filter(|q| {
            let nearest = train
                .iter()
                .min_by(|x, y| {
                    let dx = euclidean_distance(&q.values, &x.values).unwrap();
                    let dy = euclidean_distance(&q.values, &y.values).unwrap();
                    dx.total_cmp(&dy)
                })
                .unwrap();
            nearest.class_label == q.class_label
        })
        .count();
    let accuracy = correct as f64 / test.len() as f64;
    assert!(accuracy > 0.9, "1-NN accuracy {accuracy}");
}

fn raw_datasets() -> impl Strategy<Value = Vec<RawDataset>> {
    let group_sizes = prop::collection::vec(1usize..25, 1..6);
    (group_sizes, 1usize..3).prop_map(|(sizes, n_datasets)| {
        (0..n_datasets)
            .map(|d| {
                let records = sizes
                    .iter()
                    .enumerate()
                    .flat_map(|(g, &n)| (0..n).map(move |i| (format!("g{g}"), vec![i as f64, (g + d) as f64, 0.5])))
                    .collect();
                (format!("d{d}"), records)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_partition_and_series_are_normalized(datasets in raw_datasets(), seed in any::<u64>(), len in 2usize..40) {
        let total: usize = datasets.iter().map(|d| d.1.len()).sum();
        let corpus = build_corpus_from_datasets(datasets, SplitRatios::default(), len, seed).unwrap();
        let mut seen = vec![0u8; total];
        for split in Split::ALL {
            for &id in corpus.split_ids(split) {
                seen[id as usize] += 1;
                prop_assert_eq!(corpus.get(id).unwrap().split, split);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for ids in corpus.groups().values() {
            prop_assert!(ids.iter().any(|&id| corpus.get(id).unwrap().split == Split::Train));
        }
        for s in corpus.series() {
            prop_assert_eq!(s.values.len(), len);
            prop_assert!(s.values.iter().all(|v| v.is_finite()));
            let mean = s.values.iter().sum::<f64>() / len as f64;
            let std = (s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
            if s.constant {
                prop_assert!(s.values.iter().all(|&v| v == 0.0));
            } else {
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((std - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn relevance_is_an_equivalence() {
    let corpus = synth_multidomain(2, 3, 2, 5, 16).unwrap();
    let ids: Vec<u64> = corpus.series().iter().map(|s| s.series_id).collect();
    for &a in &ids {
        assert!(corpus.is_relevant(a, a));
        for &b in &ids {
            assert_eq!(corpus.is_relevant(a, b), corpus.is_relevant(b, a));
            if !corpus.is_relevant(a, b) {
                continue;
            }
            for &c in &ids {
                if corpus.is_relevant(b, c) {
                    assert!(corpus.is_relevant(a, c));
                }
            }
        }
    }
}

#[test]
fn sampler_draws_valid_uniform_deterministic_triplets() {
    let corpus = synth_multidomain(4, 2, 3, 12, 16).unwrap();
    let sampler = TripletSampler::new(&corpus).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut anchors: BTreeMap<u64, usize> = BTreeMap::new();
    let n = 10_000;
    for _ in 0..n {
        let t = sampler.sample(&mut rng);
        let (a, p, neg) = (corpus.get(t.anchor_id).unwrap(), corpus.get(t.positive_id).unwrap(), corpus.get(t.negative_id).unwrap());
        assert!([a, p, neg].iter().all(|s| s.split == Split::Train));
        assert_ne!(t.anchor_id, t.positive_id);
        assert!(a.is_relevant_to(p));
        assert!(!a.is_relevant_to(neg));
        *anchors.entry(t.anchor_id).or_default() += 1;
    }
    // every training series here has a peer, so anchors are uniform over the train split
    let train = corpus.split_ids(Split::Train).len();
    assert_eq!(anchors.len(), train);
    let expected = n as f64 / train as f64;
    let chi2: f64 = anchors.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((train - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");

    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| sampler.sample(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}

#[test]
fn bpr_fixed_points() {
    assert!((bpr_loss(&[0.3], &[0.3]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    let sigma = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((bpr_loss(&[1.0], &[0.0]).unwrap() + sigma.ln()).abs() < 1e-12);
    assert!((bpr_loss(&[1.0], &[0.0]).unwrap() - 0.313262).abs() < 1e-6);
    assert!(bpr_loss(&[], &[]).is_err());
}

fn tiny_config(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs,
        steps_per_epoch: 2,
        learning_rate: lr,
        seed: 3,
        val_sample: 4,
        select_k: 10,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let corpus = synth_multidomain(5, 2, 2, 10, 16).unwrap();
    let mut model = Rn1dEncoder::new(1);
    let before = model.to_checkpoint("rn1d", 16).to_bytes();
    let outcome = train(&mut model, &corpus, &tiny_config(0.0, 2), |_| Ok(())).unwrap();
    assert_eq!(model.to_checkpoint("rn1d", 16).to_bytes(), before);
    assert_eq!(outcome.history.len(), 2);
    assert_eq!(outcome.history[0].val_ndcg, outcome.initial_val_ndcg);
}

#[test]
fn zero_epochs_select_the_initialization() {
    let corpus = synth_multidomain(5, 2, 2, 10, 16).unwrap();
    let mut model = Rn1dEncoder::new(1);
    let outcome = train(&mut model, &corpus, &tiny_config(1e-3, 0), |_| Ok(())).unwrap();
    assert!(outcome.history.is_empty());
    assert!(select_best(&outcome.history).is_none());
    assert_eq!(outcome.best(), &outcome.initial);
    assert_eq!(training_log_csv(&outcome.history, false), "epoch,mean_loss,val_ndcg10,wall_ms\n");
}

#[test]
fn training_is_reproducible_and_moves_parameters() {
    let corpus = synth_multidomain(5, 2, 2, 10, 16).unwrap();
    let run = || {
        let mut model = Rn1dEncoder::new(1);
        let outcome = train(&mut model, &corpus, &tiny_config(1e-2, 2), |_| Ok(())).unwrap();
        (outcome.best().to_bytes(), training_log_csv(&outcome.history, false), model.to_checkpoint("rn1d", 16).to_bytes())
    };
    let first = run();
    assert_eq!(first, run());
    assert_ne!(first.2, Rn1dEncoder::new(1).to_checkpoint("rn1d", 16).to_bytes());
}
