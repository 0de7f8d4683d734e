//! Corpus construction: archive ingestion, preprocessing, stratified splits,
//! relevance groups and a synthetic multi-domain generator.
//!
//! Relevance is binary: two series are relevant to each other exactly when
//! they share `(dataset_id, class_label)`. Series from different datasets are
//! never relevant, even when their class labels coincide.

pub mod corpus;
pub mod preprocess;
pub mod synth;
pub mod ucr;

pub use corpus::{build_corpus, build_corpus_from_datasets, CorpusIndex, CorpusSummary, RawDataset, SplitRatios, DEFAULT_LENGTH};
pub use preprocess::{resample_linear, znormalize, CONSTANT_STD};
pub use synth::{generate, synth_multidomain, SynthConfig};
pub use ucr::{parse_ucr_file, parse_ucr_str, serialize_ucr, UcrFile, UcrRecord};
