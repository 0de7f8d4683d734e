use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scorer::Scorer;
use crate::series::TimeSeries;

/// Database ids ordered by descending score; ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: Option<u64>,
    pub entries: Vec<(u64, f64)>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Orders `(id, score)` pairs. Fails on non-finite scores or duplicate ids.
pub fn rank_scores(query_id: Option<u64>, mut entries: Vec<(u64, f64)>) -> Result<RankedList> {
    if let Some(&(id, s)) = entries.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Invalid(format!("non-finite score {s} for series {id}")));
    }
    entries.sort_by(|a, b| match b.1.partial_cmp(&a.1).expect("finite") {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    if has_duplicates(&entries) {
        return Err(Error::Invalid("duplicate series id in ranking".into()));
    }
    Ok(RankedList { query_id, entries })
}

fn has_duplicates(entries: &[(u64, f64)]) -> bool {
    let mut ids: Vec<u64> = entries.iter().map(|e| e.0).collect();
    ids.sort_unstable();
    ids.windows(2).any(|w| w[0] == w[1])
}

/// Scores every database series against the query and ranks them.
pub fn rank(query: &TimeSeries, database: &[&TimeSeries], scorer: &dyn Scorer) -> Result<RankedList> {
    let values: Vec<&[f64]> = database.iter().map(|s| s.values.as_slice()).collect();
    let scores = scorer.score_all(&query.values, &values)?;
    let entries = database.iter().map(|s| s.series_id).zip(scores).collect();
    rank_scores(Some(query.series_id), entries)
}
