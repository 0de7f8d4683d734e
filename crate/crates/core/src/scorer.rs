//! Relevance score functions: higher means more relevant to the query.

use crate::distance::{dtw_distance, euclidean_distance};
use crate::error::{Error, Result};

/// A relevance score function `f(query, candidate)`.
///
/// Neural scorers are not required to be symmetric, so argument order is
/// fixed: the query (or training anchor) comes first.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, query: &[f64], candidate: &[f64]) -> Result<f64>;

    /// Scores one query against every candidate. Implementations override this
    /// when per-query work (binding parameters, embedding the query) can be shared.
    fn score_all(&self, query: &[f64], candidates: &[&[f64]]) -> Result<Vec<f64>> {
        candidates.iter().map(|c| self.score(query, c)).collect()
    }

    /// Precomputes whatever depends only on the database.
    fn prepare<'a>(&'a self, database: &[&'a [f64]]) -> Result<Box<dyn PreparedScorer + 'a>> {
        Ok(Box::new(Unprepared {
            scorer: self,
            database: database.to_vec(),
        }))
    }
}

/// A scorer bound to a fixed database.
pub trait PreparedScorer: Send + Sync {
    /// Scores in database order.
    fn score_query(&self, query: &[f64]) -> Result<Vec<f64>>;
}

struct Unprepared<'a, S: ?Sized> {
    scorer: &'a S,
    database: Vec<&'a [f64]>,
}

impl<S: Scorer + ?Sized> PreparedScorer for Unprepared<'_, S> {
    fn score_query(&self, query: &[f64]) -> Result<Vec<f64>> {
        self.scorer.score_all(query, &self.database)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    Euclidean,
    Dtw,
}

/// `f(q, x) = -distance(q, x)`.
#[derive(Debug, Clone, Copy)]
pub struct DistanceScorer {
    method: DistanceMethod,
}

impl DistanceScorer {
    pub fn new(method: DistanceMethod) -> Self {
        Self { method }
    }

    pub fn euclidean() -> Self {
        Self::new(DistanceMethod::Euclidean)
    }

    pub fn dtw() -> Self {
        Self::new(DistanceMethod::Dtw)
    }
}

impl Scorer for DistanceScorer {
    fn name(&self) -> &str {
        match self.method {
            DistanceMethod::Euclidean => "ed",
            DistanceMethod::Dtw => "dtw",
        }
    }

    fn score(&self, query: &[f64], candidate: &[f64]) -> Result<f64> {
        let d = match self.method {
            DistanceMethod::Euclidean => euclidean_distance(query, candidate)?,
            DistanceMethod::Dtw => dtw_distance(query, candidate)?,
        };
        // 0.0 - d rather than -d, so an exact match scores +0 instead of -0
        Ok(0.0 - d)
    }
}

pub(crate) fn check_finite(score: f64, what: &str) -> Result<f64> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::Invalid(format!("{what} produced a non-finite score")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_score_is_maximal_zero() {
        let q = [0.2, -1.0, 3.0, 0.5];
        for s in [DistanceScorer::euclidean(), DistanceScorer::dtw()] {
            let own = s.score(&q, &q).unwrap();
            assert_eq!(own, 0.0);
            assert!(own.is_sign_positive());
            assert!(s.score(&q, &[0.0, 0.0, 0.0, 0.0]).unwrap() < 0.0);
        }
    }

    #[test]
    fn prepared_matches_direct() {
        let db: Vec<Vec<f64>> = vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.5]];
        let refs: Vec<&[f64]> = db.iter().map(Vec::as_slice).collect();
        let s = DistanceScorer::dtw();
        let p = s.prepare(&refs).unwrap();
        let q = [0.5, 0.5];
        let direct: Vec<f64> = refs.iter().map(|c| s.score(&q, c).unwrap()).collect();
        assert_eq!(p.score_query(&q).unwrap(), direct);
    }
}
