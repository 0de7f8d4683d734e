//! Parameter-free scorers: Euclidean distance, the pairwise absolute-difference
//! matrix and dynamic time warping over it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `entries[i * cols + j] = |a_i - b_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// The matrix as a single-channel `[w, h, 1]` feature map.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.rows, self.cols, 1], self.entries.clone()).expect("non-empty matrix")
    }
}

pub fn pairwise_abs_matrix(a: &[f64], b: &[f64]) -> Result<DistanceMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("pairwise matrix input"));
    }
    let mut entries = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        entries.extend(b.iter().map(|&y| (x - y).abs()));
    }
    Ok(DistanceMatrix {
        rows: a.len(),
        cols: b.len(),
        entries,
    })
}

/// DTW with cost `|a_i - b_j|` and no warping window, in O(min(w, h)) memory.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("dtw input"));
    }
    // Keep the shorter series along the buffer axis.
    let (outer, inner) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0.0f64; inner.len()];
    let mut cur = vec![0.0; inner.len()];
    for (i, &x) in outer.iter().enumerate() {
        for (j, &y) in inner.iter().enumerate() {
            let cost = (x - y).abs();
            cur[j] = cost
                + match (i, j) {
                    (0, 0) => 0.0,
                    (0, _) => cur[j - 1],
                    (_, 0) => prev[j],
                    _ => prev[j].min(cur[j - 1]).min(prev[j - 1]),
                };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[inner.len() - 1])
}

/// Full accumulated-cost matrix, applying the DTW recursion in place on `D`.
/// Kept for checking the rolling-buffer version; `get(w-1, h-1)` is the distance.
pub fn dtw_accumulated(a: &[f64], b: &[f64]) -> Result<DistanceMatrix> {
    let mut d = pairwise_abs_matrix(a, b)?;
    let (w, h) = (d.rows, d.cols);
    for i in 0..w {
        for j in 0..h {
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => d.get(0, j - 1),
                (_, 0) => d.get(i - 1, 0),
                _ => d.get(i - 1, j).min(d.get(i, j - 1)).min(d.get(i - 1, j - 1)),
            };
            d.entries[i * h + j] += best;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&[0.0, 3.0, 4.0], &[0.0; 3]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        let err = euclidean_distance(&[1.0, 2.0], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("2 vs 1"));
    }

    #[test]
    fn pairwise_matrix_example() {
        let d = pairwise_abs_matrix(&[1.0, 2.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_eq!((d.rows(), d.cols()), (3, 2));
        assert_eq!(d.entries(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let s = pairwise_abs_matrix(&[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0]).unwrap();
        assert!((0..3).all(|i| s.get(i, i) == 0.0));
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0]).unwrap(), 2.0);
        assert_eq!(dtw_distance(&[4.0, -1.0, 0.5], &[4.0, -1.0, 0.5]).unwrap(), 0.0);
        assert!(dtw_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn rolling_and_full_matrix_agree() {
        let a = [0.1, 2.0, -1.3, 0.7, 0.0];
        let b = [1.0, -0.5, 0.2];
        let full = dtw_accumulated(&a, &b).unwrap();
        assert_eq!(dtw_distance(&a, &b).unwrap(), full.get(4, 2));
        assert_eq!(dtw_distance(&b, &a).unwrap(), full.get(4, 2));
    }
}
