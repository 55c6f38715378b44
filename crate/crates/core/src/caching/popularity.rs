use std::cmp::Ordering;

use super::{CachingError, FeatureVector};

/// Aggregate request share of each feature over a request history.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePopularity {
    weights: Vec<f64>,
    ranking: Vec<usize>,
    counted: usize,
    counts: Option<Vec<u64>>,
}

impl FeaturePopularity {
    /// L1-normalized feature counts. All zero when the history is cold.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Feature indices by decreasing weight, lower index first on ties.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// Number of history entries that were accumulated.
    pub fn requests(&self) -> usize {
        self.counted
    }

    /// True when no feature was ever observed, so no normalization happened.
    pub fn is_cold(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    /// Raw per-feature counts, when built from a history.
    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    /// Builds a popularity vector from explicit weights (used by tests and
    /// callers that already hold a preference profile).
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let ranking = descending_order(&weights);
        Self {
            weights,
            ranking,
            counted: 0,
            counts: None,
        }
    }
}

fn descending_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Sums the feature vectors of every requested content and normalizes the
/// totals to unit L1 mass.
pub fn extract_feature_popularity<'a, I>(
    history: I,
    dims: usize,
) -> Result<FeaturePopularity, CachingError>
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    let mut counts = vec![0u64; dims];
    let mut counted = 0;
    for features in history {
        if features.len() != dims {
            return Err(CachingError::Dimension {
                expected: dims,
                found: features.len(),
            });
        }
        for l in features.indices() {
            counts[l] += 1;
        }
        counted += 1;
    }

    let total: u64 = counts.iter().sum();
    let weights = if total == 0 {
        vec![0.0; dims]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    let ranking = descending_order(&weights);
    Ok(FeaturePopularity {
        weights,
        ranking,
        counted,
        counts: Some(counts),
    })
}

/// Cosine similarity between a content's features and the popularity weights.
///
/// Computed against the feature-aligned (unsorted) weights. Zero when either
/// side is the zero vector.
///
/// Evaluated as `sqrt(dot^2 / (|f|^2 |q|^2))`: with integer-valued weights
/// every intermediate is exact up to the final division, so equal cosines
/// come out as equal floats and rank ties stay ties.
pub fn content_correlation(features: &FeatureVector, weights: &[f64]) -> Result<f64, CachingError> {
    if features.len() != weights.len() {
        return Err(CachingError::Dimension {
            expected: weights.len(),
            found: features.len(),
        });
    }
    let ones = features.count_ones();
    let norm_q_sq: f64 = weights.iter().map(|w| w * w).sum();
    if ones == 0 || norm_q_sq == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = features.indices().map(|l| weights[l]).sum();
    let cos = (dot * dot / (ones as f64 * norm_q_sq)).sqrt();
    // Parallel vectors land within a few ulps of 1; report them as exactly 1.
    if cos >= 1.0 - 4.0 * f64::EPSILON {
        Ok(1.0)
    } else {
        Ok(cos.max(0.0))
    }
}
