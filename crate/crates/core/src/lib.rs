//! Content-based time-series retrieval.
//!
//! Rank a multi-domain corpus of series against a query with parameter-free
//! scorers (Euclidean distance, DTW) or trained neural scorers (RN2D over the
//! pairwise distance matrix, a Siamese RN1D encoder), train the neural
//! scorers with a pairwise ranking loss, and evaluate rankings with
//! Prec@k, AP@k and NDCG@k.

pub mod dataset;
pub mod distance;
pub mod error;
pub mod io;
pub mod metrics;
pub mod models;
pub mod scorer;
pub mod series;
pub mod tensor;
pub mod training;

pub use dataset::{CorpusIndex, SplitRatios};
pub use distance::{dtw_distance, euclidean_distance, pairwise_abs_matrix, DistanceMatrix};
pub use error::{Error, Result};
pub use metrics::{EvalReport, Metric, RankedList};
pub use models::{AnyModel, ModelKind, PairModel, Rn1dEncoder, Rn2dModel};
pub use scorer::{DistanceScorer, Scorer};
pub use series::{Split, TimeSeries};
pub use tensor::{Checkpoint, Tensor};
pub use training::{train, Triplet, TrainConfig};
