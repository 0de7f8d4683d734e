use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::{resample_linear, znormalize};
use super::ucr::parse_ucr_file;
use crate::error::{Error, Result};
use crate::series::{Split, TimeSeries};

/// Every stored series is resampled to this length unless told otherwise.
pub const DEFAULT_LENGTH: usize = 128;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;
const CORPUS_FORMAT: &str = "ctsr-corpus";
const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || self.train <= 0.0 {
            return Err(Error::Invalid(format!("bad split ratios {self:?}")));
        }
        if ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("split ratios {self:?} do not sum to 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for a group of `n`; train always keeps at least one member.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        if n <= 1 {
            return (n, 0, 0);
        }
        let mut val = (n as f64 * self.val).round() as usize;
        let mut test = (n as f64 * self.test).round() as usize;
        while val + test > n - 1 {
            if test >= val {
                test -= 1;
            } else {
                val -= 1;
            }
        }
        (n - val - test, val, test)
    }
}

pub type GroupKey = (String, String);

/// An immutable, preprocessed corpus with its split and relevance indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    length: usize,
    series: Vec<TimeSeries>,
    positions: BTreeMap<u64, usize>,
    groups: BTreeMap<GroupKey, Vec<u64>>,
    splits: BTreeMap<Split, Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    format: String,
    version: u32,
    common_length: usize,
    series: Vec<TimeSeries>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub common_length: usize,
    pub datasets: usize,
    pub groups: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub constant_series: usize,
}

impl CorpusIndex {
    /// Indexes already-preprocessed series, checking every corpus invariant.
    pub fn from_series(length: usize, series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut positions = BTreeMap::new();
        let mut groups: BTreeMap<GroupKey, Vec<u64>> = BTreeMap::new();
        let mut splits: BTreeMap<Split, Vec<u64>> = Split::ALL.iter().map(|&s| (s, Vec::new())).collect();
        for (pos, s) in series.iter().enumerate() {
            if positions.insert(s.series_id, pos).is_some() {
                return Err(Error::Invalid(format!("duplicate series id {}", s.series_id)));
            }
            check_stored_series(s, length)?;
            groups
                .entry((s.dataset_id.clone(), s.class_label.clone()))
                .or_default()
                .push(s.series_id);
            splits.get_mut(&s.split).expect("all splits present").push(s.series_id);
        }
        Ok(Self {
            length,
            series,
            positions,
            groups,
            splits,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&TimeSeries> {
        self.positions.get(&id).map(|&p| &self.series[p])
    }

    pub fn groups(&self) -> &BTreeMap<GroupKey, Vec<u64>> {
        &self.groups
    }

    pub fn split_ids(&self, split: Split) -> &[u64] {
        &self.splits[&split]
    }

    pub fn split(&self, split: Split) -> Vec<&TimeSeries> {
        self.split_ids(split).iter().map(|&id| self.get(id).expect("indexed")).collect()
    }

    pub fn is_relevant(&self, a: u64, b: u64) -> bool {
        match (self.get(a), self.get(b)) {
            (Some(x), Some(y)) => x.is_relevant_to(y),
            _ => false,
        }
    }

    /// Training-split members of `series`' relevance group, excluding itself.
    pub fn train_peers(&self, series: &TimeSeries) -> Vec<u64> {
        self.groups[&(series.dataset_id.clone(), series.class_label.clone())]
            .iter()
            .copied()
            .filter(|&id| id != series.series_id && self.get(id).map(|s| s.split) == Some(Split::Train))
            .collect()
    }

    /// Series of `split` usable as queries against the training split: those
    /// with at least one relevant training series other than themselves.
    pub fn queries(&self, split: Split) -> Vec<&TimeSeries> {
        self.split(split)
            .into_iter()
            .filter(|s| !self.train_peers(s).is_empty())
            .collect()
    }

    pub fn summary(&self) -> CorpusSummary {
        let datasets: std::collections::BTreeSet<&str> = self.series.iter().map(|s| s.dataset_id.as_str()).collect();
        CorpusSummary {
            common_length: self.length,
            datasets: datasets.len(),
            groups: self.groups.len(),
            train: self.splits[&Split::Train].len(),
            val: self.splits[&Split::Val].len(),
            test: self.splits[&Split::Test].len(),
            constant_series: self.series.iter().filter(|s| s.constant).count(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CorpusFile {
            format: CORPUS_FORMAT.into(),
            version: CORPUS_VERSION,
            common_length: self.length,
            series: self.series.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CorpusFile = serde_json::from_str(text)?;
        if file.format != CORPUS_FORMAT || file.version != CORPUS_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported corpus file {} v{}",
                file.format, file.version
            )));
        }
        Self::from_series(file.common_length, file.series)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::io::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn check_stored_series(s: &TimeSeries, length: usize) -> Result<()> {
    let bad = |why: String| Err(Error::Invalid(format!("series {}: {why}", s.series_id)));
    if s.len() != length {
        return bad(format!("length {} != corpus length {length}", s.len()));
    }
    if s.values.iter().any(|v| !v.is_finite()) {
        return bad("non-finite value".into());
    }
    let n = s.len() as f64;
    let mean = s.values.iter().sum::<f64>() / n;
    let std = (s.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let ok = if s.constant {
        s.values.iter().all(|&v| v == 0.0)
    } else {
        mean.abs() < NORMALIZATION_TOLERANCE && (std - 1.0).abs() < NORMALIZATION_TOLERANCE
    };
    if !ok {
        return bad(format!("not z-normalized (mean {mean:e}, std {std})"));
    }
    Ok(())
}

/// Raw series of one dataset: `(class_label, values)` in source order.
pub type RawDataset = (String, Vec<(String, Vec<f64>)>);

/// Resamples, normalizes and stratified-splits raw datasets. Series ids follow
/// input order; shuffling within each relevance group is driven by `seed`.
pub fn build_corpus_from_datasets(
    datasets: Vec<RawDataset>,
    ratios: SplitRatios,
    length: usize,
    seed: u64,
) -> Result<CorpusIndex> {
    ratios.validate()?;
    if length < 2 {
        return Err(Error::Invalid("common length must be at least 2".into()));
    }
    let mut series = Vec::new();
    for (dataset_id, records) in datasets {
        for (class_label, raw) in records {
            if raw.len() < 2 {
                return Err(Error::Invalid(format!(
                    "series {} of {dataset_id} has fewer than two values",
                    series.len()
                )));
            }
            let (values, constant) = znormalize(&resample_linear(&raw, length));
            series.push(TimeSeries {
                series_id: series.len() as u64,
                dataset_id: dataset_id.clone(),
                class_label,
                split: Split::Train,
                constant,
                values,
            });
        }
    }
    if series.is_empty() {
        return Err(Error::Empty("archive"));
    }

    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in series.iter().enumerate() {
        groups
            .entry((s.dataset_id.clone(), s.class_label.clone()))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        let (_, n_val, n_test) = ratios.counts(members.len());
        for &i in &members[..n_val] {
            series[i].split = Split::Val;
        }
        for &i in &members[n_val..n_val + n_test] {
            series[i].split = Split::Test;
        }
    }
    CorpusIndex::from_series(length, series)
}

/// Reads a UCR-style tree: one directory per dataset, every file inside it
/// (e.g. `*_TRAIN.tsv` and `*_TEST.tsv`) merged before re-splitting.
pub fn build_corpus(archive_dir: &Path, ratios: SplitRatios, length: usize, seed: u64) -> Result<CorpusIndex> {
    let mut dirs = read_dir_sorted(archive_dir)?;
    dirs.retain(|p| p.is_dir());
    let mut datasets = Vec::new();
    for dir in dirs {
        let dataset_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut records = Vec::new();
        for file in read_dir_sorted(&dir)?.into_iter().filter(|p| p.is_file()) {
            let parsed = parse_ucr_file(&file)?;
            if !parsed.rejected_lines.is_empty() {
                log::warn!(
                    "{}: skipped lines {:?} (fewer than two values)",
                    file.display(),
                    parsed.rejected_lines
                );
            }
            records.extend(parsed.records.into_iter().map(|r| (r.class_label, r.values)));
        }
        if records.is_empty() {
            log::warn!("dataset {dataset_id} has no usable series; skipped");
            continue;
        }
        datasets.push((dataset_id, records));
    }
    if datasets.is_empty() {
        return Err(Error::Empty("archive"));
    }
    build_corpus_from_datasets(datasets, ratios, length, seed)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(datasets: usize, classes: usize, per_class: usize) -> Vec<RawDataset> {
        (0..datasets)
            .map(|d| {
                let records = (0..classes)
                    .flat_map(|c| {
                        (0..per_class).map(move |i| {
                            let v = (0..20).map(|t| ((t * (c + 1) + i + d) as f64 * 0.3).sin()).collect();
                            (format!("{c}"), v)
                        })
                    })
                    .collect();
                (format!("ds{d}"), records)
            })
            .collect()
    }

    #[test]
    fn ratio_arithmetic() {
        let r = SplitRatios::default();
        assert_eq!(r.counts(10), (8, 1, 1));
        assert_eq!(r.counts(60), (48, 6, 6));
        assert_eq!(r.counts(1), (1, 0, 0));
        assert_eq!(r.counts(2), (2, 0, 0));
        let heavy = SplitRatios { train: 0.2, val: 0.4, test: 0.4 };
        assert_eq!(heavy.counts(2), (1, 1, 0));
        assert_eq!(heavy.counts(3), (1, 1, 1));
    }

    #[test]
    fn two_by_two_by_ten() {
        let c = build_corpus_from_datasets(toy(2, 2, 10), SplitRatios::default(), 32, 7).unwrap();
        let s = c.summary();
        assert_eq!((s.train, s.val, s.test, s.groups), (32, 4, 4, 4));
        let again = build_corpus_from_datasets(toy(2, 2, 10), SplitRatios::default(), 32, 7).unwrap();
        assert_eq!(c, again);
        let other = build_corpus_from_datasets(toy(2, 2, 10), SplitRatios::default(), 32, 8).unwrap();
        assert_ne!(c, other);
    }

    #[test]
    fn singleton_group_stays_in_training() {
        let mut data = toy(1, 1, 5);
        data[0].1.push(("lonely".into(), vec![1.0, 2.0, 0.5]));
        let c = build_corpus_from_datasets(data, SplitRatios::default(), 16, 0).unwrap();
        let lonely = c.series().iter().find(|s| s.class_label == "lonely").unwrap();
        assert_eq!(lonely.split, Split::Train);
        assert!(c.queries(Split::Train).iter().all(|s| s.class_label != "lonely"));
    }

    #[test]
    fn json_round_trip() {
        let c = build_corpus_from_datasets(toy(1, 2, 6), SplitRatios::default(), 24, 1).unwrap();
        let back = CorpusIndex::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_empty_archive_and_bad_series() {
        assert!(build_corpus_from_datasets(vec![], SplitRatios::default(), 16, 0).is_err());
        let bad = vec![("d".to_string(), vec![("1".to_string(), vec![1.0])])];
        assert!(build_corpus_from_datasets(bad, SplitRatios::default(), 16, 0).is_err());
    }

    #[test]
    fn constant_series_are_flagged() {
        let data = vec![(
            "d".to_string(),
            vec![("1".to_string(), vec![3.0; 10]), ("1".to_string(), vec![1.0, 2.0, 3.0])],
        )];
        let c = build_corpus_from_datasets(data, SplitRatios::default(), 8, 0).unwrap();
        assert_eq!(c.summary().constant_series, 1);
    }
}
