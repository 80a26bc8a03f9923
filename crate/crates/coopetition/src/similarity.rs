//! Pairwise Hamming distances, reciprocal similarity, empirical distribution
//! and the percentile sparsification step.

use std::io::Write;

use rayon::prelude::*;

use crate::affiliation::AffiliationMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Plain,
    Weighted,
}

/// Symmetric pairwise distance matrix, upper triangle only.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    mode: DistanceMode,
    /// row-major upper triangle: (i, j) with i < j at offset(i, j)
    values: Vec<f64>,
}

fn tri_offset(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.values[tri_offset(self.n, i, j)]
        } else {
            self.values[tri_offset(self.n, j, i)]
        }
    }
}

/// Count of positions where two equal-length binary vectors differ.
pub fn hamming(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "hamming over vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Sum of weights over differing positions.
pub fn weighted_hamming(a: &[bool], b: &[bool], w: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != w.len() {
        return Err(Error::Dimension(format!(
            "weighted hamming over lengths {}, {}, {}",
            a.len(),
            b.len(),
            w.len()
        )));
    }
    if let Some((idx, &bad)) = w.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeWeight {
            index: idx,
            weight: bad,
        });
    }
    Ok(a.iter()
        .zip(b)
        .zip(w)
        .filter(|((x, y), _)| x != y)
        .map(|(_, &wj)| wj)
        .sum())
}

fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

fn weighted_hamming_words(a: &[u64], b: &[u64], w: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (word_idx, (x, y)) in a.iter().zip(b).enumerate() {
        let mut bits = x ^ y;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            sum += w[word_idx * 64 + b];
            bits &= bits - 1;
        }
    }
    sum
}

/// All-pairs distances. Rows are partitioned across workers; each cell is a
/// pure function of two immutable rows, so output is schedule-independent.
pub fn pairwise_distances(
    m: &AffiliationMatrix,
    mode: DistanceMode,
    weights: Option<&[f64]>,
) -> Result<DistanceMatrix> {
    let n = m.n_entities();
    let default_weights;
    let weights = match (mode, weights) {
        (DistanceMode::Plain, _) => None,
        (DistanceMode::Weighted, Some(w)) => {
            if w.len() != m.n_features() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} features",
                    w.len(),
                    m.n_features()
                )));
            }
            if let Some((idx, &bad)) = w.iter().enumerate().find(|(_, &x)| x < 0.0) {
                return Err(Error::NegativeWeight {
                    index: idx,
                    weight: bad,
                });
            }
            Some(w)
        }
        (DistanceMode::Weighted, None) => {
            // default weighting: per-feature attendance counts
            default_weights = m
                .feature_counts()
                .into_iter()
                .map(|c| c as f64)
                .collect::<Vec<_>>();
            Some(default_weights.as_slice())
        }
    };

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = m.row_words(i);
            (i + 1..n)
                .map(|j| {
                    let b = m.row_words(j);
                    match weights {
                        None => hamming_words(a, b) as f64,
                        Some(w) => weighted_hamming_words(a, b, w),
                    }
                })
                .collect()
        })
        .collect();

    Ok(DistanceMatrix {
        n,
        mode,
        values: rows.concat(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDistancePolicy {
    /// identical profiles get similarity 1.0
    CapToOne,
    /// identical profiles are omitted from the matrix and the CDF sample
    ExcludePair,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum SparsityState {
    Dense,
    Thresholded { cutoff: f64, retained_fraction: f64 },
}

/// Pairwise similarity, dense before the percentile cutoff and sparse after.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    /// (i, j, s) with i < j, lexicographic order
    pairs: Vec<(usize, usize, f64)>,
    state: SparsityState,
}

impl SimilarityMatrix {
    /// Build a dense matrix directly from upper-triangle pairs.
    pub fn from_pairs(n: usize, mut pairs: Vec<(usize, usize, f64)>) -> Self {
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Self {
            n,
            pairs,
            state: SparsityState::Dense,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn state(&self) -> &SparsityState {
        &self.state
    }

    pub fn is_thresholded(&self) -> bool {
        matches!(self.state, SparsityState::Thresholded { .. })
    }

    /// Upper triangle dump: `entity_a,entity_b,similarity`, 10 significant digits.
    pub fn write_csv<W: Write>(&self, entity_ids: &[String], mut out: W) -> Result<()> {
        writeln!(out, "entity_a,entity_b,similarity")?;
        for &(i, j, s) in &self.pairs {
            writeln!(out, "{},{},{:.9e}", entity_ids[i], entity_ids[j], s)?;
        }
        Ok(())
    }
}

/// s(i, j) = 1 / d(i, j), with zero distances handled by policy.
pub fn reciprocal_similarity(d: &DistanceMatrix, policy: ZeroDistancePolicy) -> SimilarityMatrix {
    let n = d.n();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dist = d.get(i, j);
            if dist == 0.0 {
                match policy {
                    ZeroDistancePolicy::CapToOne => pairs.push((i, j, 1.0)),
                    ZeroDistancePolicy::ExcludePair => {}
                }
            } else {
                pairs.push((i, j, (1.0 / dist).min(1.0)));
            }
        }
    }
    SimilarityMatrix {
        n,
        pairs,
        state: SparsityState::Dense,
    }
}

/// Empirical distribution of the upper-triangle similarity values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// F(x) = fraction of the sample <= x.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(s: &SimilarityMatrix) -> Result<EmpiricalCdf> {
    let mut sorted: Vec<f64> = s
        .pairs
        .iter()
        .map(|&(_, _, v)| v)
        .filter(|v| v.is_finite())
        .collect();
    if sorted.is_empty() {
        return Err(Error::EmptySample("no finite similarity values".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(EmpiricalCdf { sorted })
}

/// Order-statistic cutoff: with k = ceil((1-q)*N), the k-th largest value is
/// the smallest value to keep; the returned cutoff is the (k+1)-th largest
/// when it exists (else below the sample minimum), so that keeping values
/// strictly greater than the cutoff retains at most k entries.
pub fn quantile_cutoff(cdf: &EmpiricalCdf, q: f64) -> f64 {
    assert!((0.0..1.0).contains(&q), "quantile must lie in [0, 1)");
    let n = cdf.sorted.len();
    // ceil((1-q)*N), guarding against float noise around whole numbers
    let x = (1.0 - q) * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        x.ceil() as usize
    };
    let k = k.clamp(1, n);
    if k >= n {
        cdf.sorted[0] - 1.0
    } else {
        // (k+1)-th largest = sorted[n - k - 1]
        cdf.sorted[n - k - 1]
    }
}

/// Retain exactly the pairs with s(i, j) > cutoff.
pub fn sparsify(s: &SimilarityMatrix, cutoff: f64) -> SimilarityMatrix {
    let total = s.pairs.len();
    let pairs: Vec<_> = s
        .pairs
        .iter()
        .copied()
        .filter(|&(_, _, v)| v > cutoff)
        .collect();
    let retained_fraction = if total == 0 {
        0.0
    } else {
        pairs.len() as f64 / total as f64
    };
    SimilarityMatrix {
        n: s.n,
        pairs,
        state: SparsityState::Thresholded {
            cutoff,
            retained_fraction,
        },
    }
}
