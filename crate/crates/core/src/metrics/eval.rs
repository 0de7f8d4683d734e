//! Evaluation of scorers over a query set.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::ir::{ap_at_k, ndcg_at_k, precision_at_k};
use super::rank::rank_scores;
use super::stats::welch_t_test;
use crate::error::{Error, Result};
use crate::scorer::Scorer;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Metric {
    Precision,
    AveragePrecision,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Precision, Metric::AveragePrecision, Metric::Ndcg];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Precision => "prec",
            Metric::AveragePrecision => "ap",
            Metric::Ndcg => "ndcg",
        }
    }

    pub fn compute(self, relevant: &[bool], total_relevant: usize, k: usize) -> Option<f64> {
        match self {
            Metric::Precision => (total_relevant > 0).then(|| precision_at_k(relevant, k)),
            Metric::AveragePrecision => ap_at_k(relevant, total_relevant, k),
            Metric::Ndcg => ndcg_at_k(relevant, total_relevant, k),
        }
    }
}

/// Relevance flags of one ranked query, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCase {
    pub query_id: u64,
    pub relevant: Vec<bool>,
    pub total_relevant: usize,
}

/// Per-query metric values of one method. Queries with no relevant item in
/// the database are left out of `values` and counted in `n_unanswerable`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: String,
    pub query_ids: Vec<u64>,
    pub n_unanswerable: usize,
    pub values: BTreeMap<(Metric, usize), Vec<f64>>,
}

impl MethodResult {
    pub fn from_cases(method: &str, cases: &[QueryCase], ks: &[usize]) -> Self {
        let mut values: BTreeMap<(Metric, usize), Vec<f64>> = BTreeMap::new();
        let mut query_ids = Vec::new();
        let mut n_unanswerable = 0;
        for case in cases {
            if case.total_relevant == 0 {
                n_unanswerable += 1;
                continue;
            }
            query_ids.push(case.query_id);
            for m in Metric::ALL {
                for &k in ks {
                    let v = m.compute(&case.relevant, case.total_relevant, k).expect("answerable");
                    values.entry((m, k)).or_default().push(v);
                }
            }
        }
        Self {
            method: method.to_string(),
            query_ids,
            n_unanswerable,
            values,
        }
    }

    pub fn per_query(&self, metric: Metric, k: usize) -> &[f64] {
        self.values.get(&(metric, k)).map_or(&[], Vec::as_slice)
    }

    /// Arithmetic mean over answerable queries, summed in query order.
    pub fn mean(&self, metric: Metric, k: usize) -> Option<f64> {
        let v = self.per_query(metric, k);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub methods: Vec<MethodResult>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    metric: &'static str,
    k: usize,
    mean: String,
    n_queries: usize,
    n_unanswerable: usize,
}

#[derive(Serialize)]
struct QueryRow<'a> {
    method: &'a str,
    query_id: u64,
    metric: &'static str,
    k: usize,
    value: f64,
}

#[derive(Serialize)]
struct TTestRow<'a> {
    method_a: &'a str,
    method_b: &'a str,
    metric: &'static str,
    k: usize,
    mean_a: f64,
    mean_b: f64,
    t: f64,
    df: f64,
    p: f64,
    significant: bool,
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// `method,metric,k,mean,n_queries,n_unanswerable`, one row per (method, metric, k).
    pub fn to_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for m in &self.methods {
            for metric in Metric::ALL {
                for &k in &self.ks {
                    rows.push(SummaryRow {
                        method: &m.method,
                        metric: metric.as_str(),
                        k,
                        mean: m.mean(metric, k).map(|v| v.to_string()).unwrap_or_default(),
                        n_queries: m.query_ids.len(),
                        n_unanswerable: m.n_unanswerable,
                    });
                }
            }
        }
        if rows.is_empty() {
            return Ok("method,metric,k,mean,n_queries,n_unanswerable\n".into());
        }
        csv_string(rows)
    }

    /// `method,query_id,metric,k,value` for every answerable query.
    pub fn per_query_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for m in &self.methods {
            for metric in Metric::ALL {
                for &k in &self.ks {
                    for (&query_id, &value) in m.query_ids.iter().zip(m.per_query(metric, k)) {
                        rows.push(QueryRow {
                            method: &m.method,
                            query_id,
                            metric: metric.as_str(),
                            k,
                            value,
                        });
                    }
                }
            }
        }
        if rows.is_empty() {
            return Ok("method,query_id,metric,k,value\n".into());
        }
        csv_string(rows)
    }

    /// Welch t-tests for every ordered method pair `(a, b)` with `a` listed first.
    pub fn ttest_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for (i, a) in self.methods.iter().enumerate() {
            for b in &self.methods[i + 1..] {
                for metric in Metric::ALL {
                    for &k in &self.ks {
                        let (xa, xb) = (a.per_query(metric, k), b.per_query(metric, k));
                        let Some(r) = welch_t_test(xa, xb) else { continue };
                        rows.push(TTestRow {
                            method_a: &a.method,
                            method_b: &b.method,
                            metric: metric.as_str(),
                            k,
                            mean_a: a.mean(metric, k).unwrap_or(f64::NAN),
                            mean_b: b.mean(metric, k).unwrap_or(f64::NAN),
                            t: r.t,
                            df: r.df,
                            p: r.p,
                            significant: r.significant,
                        });
                    }
                }
            }
        }
        if rows.is_empty() {
            return Ok("method_a,method_b,metric,k,mean_a,mean_b,t,df,p,significant\n".into());
        }
        csv_string(rows)
    }
}

/// Ranks the database for every query with one scorer. Work fans out over
/// queries; results come back in query order.
pub fn evaluate_with(
    queries: &[&TimeSeries],
    database: &[&TimeSeries],
    scorer: &dyn Scorer,
    ks: &[usize],
) -> Result<MethodResult> {
    let max_k = ks.iter().copied().max().ok_or(Error::Empty("k list"))?;
    if ks.contains(&0) {
        return Err(Error::Invalid("k must be positive".into()));
    }
    let values: Vec<&[f64]> = database.iter().map(|s| s.values.as_slice()).collect();
    let prepared = scorer.prepare(&values)?;
    let cases = queries
        .par_iter()
        .map(|q| {
            let scores = prepared.score_query(&q.values)?;
            let entries = database.iter().map(|s| s.series_id).zip(scores).collect();
            let ranked = rank_scores(Some(q.series_id), entries)?;
            let relevance: BTreeMap<u64, bool> =
                database.iter().map(|s| (s.series_id, s.is_relevant_to(q))).collect();
            let relevant = ranked.ids().take(max_k).map(|id| relevance[&id]).collect();
            let total_relevant = relevance.values().filter(|&&r| r).count();
            Ok(QueryCase {
                query_id: q.series_id,
                relevant,
                total_relevant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MethodResult::from_cases(scorer.name(), &cases, ks))
}

/// Evaluates every scorer on the same queries and database.
pub fn evaluate(
    queries: &[&TimeSeries],
    database: &[&TimeSeries],
    scorers: &[&dyn Scorer],
    ks: &[usize],
) -> Result<EvalReport> {
    let methods = scorers
        .iter()
        .map(|s| evaluate_with(queries, database, *s, ks))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        ks: ks.to_vec(),
        methods,
    })
}
