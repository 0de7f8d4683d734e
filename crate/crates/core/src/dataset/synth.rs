//! Hermetic multi-domain corpus generator.
//!
//! Each domain draws from one generator family, cycling through:
//!
//! | family  | class parameter          |
//! |---------|--------------------------|
//! | sine    | frequency                |
//! | square  | duty cycle               |
//! | walk    | drift of the increments  |
//! | damped  | decay rate               |
//!
//! Every series gets a random phase or start, a random amplitude and additive
//! Gaussian noise, then goes through the same resample/normalize/split path as
//! ingested data. Domains past the fourth reuse a family with shifted parameters.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::corpus::{build_corpus_from_datasets, CorpusIndex, RawDataset, SplitRatios};
use crate::error::{Error, Result};

pub const FAMILIES: [&str; 4] = ["sine", "square", "walk", "damped"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_domains: usize,
    pub classes_per_domain: usize,
    pub series_per_class: usize,
    pub length: usize,
    /// Standard deviation of the additive noise, relative to unit amplitude.
    pub noise: f64,
    pub ratios: SplitRatios,
}

impl SynthConfig {
    pub fn new(seed: u64, n_domains: usize, classes_per_domain: usize, series_per_class: usize, length: usize) -> Self {
        Self {
            seed,
            n_domains,
            classes_per_domain,
            series_per_class,
            length,
            noise: 0.25,
            ratios: SplitRatios::default(),
        }
    }
}

/// Shorthand for [`generate`] with default noise and split ratios.
pub fn synth_multidomain(
    seed: u64,
    n_domains: usize,
    classes_per_domain: usize,
    series_per_class: usize,
    length: usize,
) -> Result<CorpusIndex> {
    generate(&SynthConfig::new(seed, n_domains, classes_per_domain, series_per_class, length))
}

pub fn generate(cfg: &SynthConfig) -> Result<CorpusIndex> {
    if cfg.n_domains == 0 || cfg.classes_per_domain == 0 || cfg.series_per_class == 0 {
        return Err(Error::Invalid("synthetic corpus needs at least one domain, class and series".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut datasets: Vec<RawDataset> = Vec::with_capacity(cfg.n_domains);
    for d in 0..cfg.n_domains {
        let family = d % FAMILIES.len();
        let generation = (d / FAMILIES.len()) as f64;
        // raw lengths differ per domain, as in a real archive
        let raw_len = cfg.length + (d % 3) * cfg.length / 4;
        let mut records = Vec::with_capacity(cfg.classes_per_domain * cfg.series_per_class);
        for c in 0..cfg.classes_per_domain {
            let frac = if cfg.classes_per_domain > 1 {
                c as f64 / (cfg.classes_per_domain - 1) as f64
            } else {
                0.5
            };
            for _ in 0..cfg.series_per_class {
                let values = match family {
                    0 => sine(&mut rng, raw_len, 3.0 + generation + 2.0 * frac),
                    1 => square(&mut rng, raw_len, 3.0 + generation, 0.2 + 0.5 * frac),
                    2 => walk(&mut rng, raw_len, (frac - 0.5) * (0.12 + 0.04 * generation)),
                    _ => damped(&mut rng, raw_len, 5.0 + generation, 0.5 + 4.5 * frac),
                };
                let noisy = values.into_iter().map(|v| v + noise.sample(&mut rng)).collect();
                records.push((format!("c{c}"), noisy));
            }
        }
        datasets.push((format!("{}{d}", FAMILIES[family]), records));
    }
    build_corpus_from_datasets(datasets, cfg.ratios, cfg.length, cfg.seed)
}

fn amplitude<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(0.7..1.3)
}

/// `cycles` periods across the series with a random phase.
fn sine<R: Rng>(rng: &mut R, n: usize, cycles: f64) -> Vec<f64> {
    let a = amplitude(rng);
    let phase = rng.gen_range(0.0..TAU);
    (0..n)
        .map(|i| a * (TAU * cycles * i as f64 / n as f64 + phase).sin())
        .collect()
}

fn square<R: Rng>(rng: &mut R, n: usize, cycles: f64, duty: f64) -> Vec<f64> {
    let a = amplitude(rng);
    let phase = rng.gen_range(0.0..1.0);
    (0..n)
        .map(|i| {
            let pos = (cycles * i as f64 / n as f64 + phase).fract();
            if pos < duty {
                a
            } else {
                -a
            }
        })
        .collect()
}

fn walk<R: Rng>(rng: &mut R, n: usize, drift: f64) -> Vec<f64> {
    let step = Normal::new(drift, 0.1).expect("valid");
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x += step.sample(rng);
            x
        })
        .collect()
}

/// An oscillation decaying at `decay` per unit time, starting at a random offset.
fn damped<R: Rng>(rng: &mut R, n: usize, cycles: f64, decay: f64) -> Vec<f64> {
    let a = amplitude(rng);
    let phase = rng.gen_range(0.0..TAU);
    let onset = rng.gen_range(0.0..0.25);
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            if t < onset {
                0.0
            } else {
                let s = t - onset;
                a * (-decay * s).exp() * (TAU * cycles * s + phase).sin()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Split;

    #[test]
    fn reproducible_and_sized() {
        let a = synth_multidomain(11, 4, 3, 10, 32).unwrap();
        let b = synth_multidomain(11, 4, 3, 10, 32).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.groups().len(), 12);
        assert_eq!(a.len(), 120);
        assert!(a.series().iter().all(|s| s.len() == 32));
        assert_eq!(a.split_ids(Split::Test).len(), 12);
    }

    #[test]
    fn extra_domains_wrap_families() {
        let c = synth_multidomain(1, 6, 2, 4, 16).unwrap();
        assert_eq!(c.groups().len(), 12);
        assert!(c.groups().keys().any(|(d, _)| d == "sine4"));
    }
}
