//! Ranking, retrieval metrics, evaluation reports and significance tests.

pub mod eval;
pub mod ir;
pub mod rank;
pub mod stats;

pub use eval::{evaluate, evaluate_with, EvalReport, MethodResult, Metric, QueryCase};
pub use ir::{ap_at_k, ndcg_at_k, precision_at_k};
pub use rank::{rank, rank_scores, RankedList};
pub use stats::{welch_t_test, TTestResult};
