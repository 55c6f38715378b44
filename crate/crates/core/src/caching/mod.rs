//! Feature-based popularity estimation and cache prefetch.
//!
//! A provider reads the request history, adds up the feature vectors of all
//! requested contents into a feature-popularity profile, scores each of its
//! own contents by cosine similarity to that profile and prefetches the
//! best-scoring `Z` contents.

mod feature;
mod popularity;
mod prefetch;

use thiserror::Error;

use crate::ids::{ContentId, CpId};

pub use feature::FeatureVector;
pub use popularity::{content_correlation, extract_feature_popularity, FeaturePopularity};
pub use prefetch::{
    cache_lookup, random_order, random_prefetch, rank_and_prefetch, score_library,
    write_correlation_dump, CacheState, ContentLibrary, CorrelationVector, Lookup,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CachingError {
    #[error("feature vector has length {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("feature index {index} out of range for length {len}")]
    FeatureIndex { index: usize, len: usize },
    #[error("invalid character {0:?} in feature bitstring")]
    BadBitstring(char),
    #[error("{0} appears twice in one library")]
    DuplicateContent(ContentId),
    #[error("{content} is not in the library of {cp_id}")]
    ForeignContent { cp_id: CpId, content: ContentId },
}
