use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{content_correlation, CachingError, FeaturePopularity, FeatureVector};
use crate::ids::{ContentId, CpId};

/// The contents one provider owns.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentLibrary {
    cp_id: CpId,
    contents: Vec<(ContentId, FeatureVector)>,
}

impl ContentLibrary {
    pub fn new(
        cp_id: CpId,
        contents: Vec<(ContentId, FeatureVector)>,
    ) -> Result<Self, CachingError> {
        let mut seen = BTreeSet::new();
        for (id, f) in &contents {
            if !seen.insert(*id) {
                return Err(CachingError::DuplicateContent(*id));
            }
            if f.len() != contents[0].1.len() {
                return Err(CachingError::Dimension {
                    expected: contents[0].1.len(),
                    found: f.len(),
                });
            }
        }
        Ok(Self { cp_id, contents })
    }

    pub fn cp_id(&self) -> CpId {
        self.cp_id
    }

    pub fn contents(&self) -> &[(ContentId, FeatureVector)] {
        &self.contents
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.contents.iter().map(|(id, _)| *id)
    }

    pub fn features(&self, id: ContentId) -> Option<&FeatureVector> {
        self.contents.iter().find(|(c, _)| *c == id).map(|(_, f)| f)
    }
}

/// Correlation of every library content with the feature popularity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationVector {
    scores: BTreeMap<ContentId, f64>,
}

impl CorrelationVector {
    pub fn get(&self, id: ContentId) -> Option<f64> {
        self.scores.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ContentId, f64)> + '_ {
        self.scores.iter().map(|(&id, &s)| (id, s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Content ids by decreasing correlation; lower id first on ties.
    pub fn ranking(&self) -> Vec<ContentId> {
        let mut ids: Vec<(ContentId, f64)> = self.iter().collect();
        ids.sort_by(|(ia, sa), (ib, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then(ia.cmp(ib))
        });
        ids.into_iter().map(|(id, _)| id).collect()
    }
}

/// Scores against the raw counts when the popularity has them. Cosine is
/// scale invariant, and integer weights keep exact ties exact.
pub fn score_library(
    library: &ContentLibrary,
    popularity: &FeaturePopularity,
) -> Result<CorrelationVector, CachingError> {
    let counts: Option<Vec<f64>> = popularity
        .counts()
        .map(|c| c.iter().map(|&n| n as f64).collect());
    let weights = counts.as_deref().unwrap_or(popularity.weights());
    let scores = library
        .contents
        .iter()
        .map(|(id, f)| Ok((*id, content_correlation(f, weights)?)))
        .collect::<Result<_, CachingError>>()?;
    Ok(CorrelationVector { scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
}

/// Edge cache contents of one provider.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheState {
    cp_id: CpId,
    capacity: usize,
    resident: BTreeSet<ContentId>,
    owned: BTreeSet<ContentId>,
}

impl CacheState {
    /// Fills the cache with the first `capacity` ids of `order`.
    pub fn from_order(library: &ContentLibrary, order: &[ContentId], capacity: usize) -> Self {
        Self {
            cp_id: library.cp_id,
            capacity,
            resident: order.iter().take(capacity).copied().collect(),
            owned: library.ids().collect(),
        }
    }

    pub fn cp_id(&self) -> CpId {
        self.cp_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident(&self) -> &BTreeSet<ContentId> {
        &self.resident
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn lookup(&self, content: ContentId) -> Result<Lookup, CachingError> {
        if !self.owned.contains(&content) {
            return Err(CachingError::ForeignContent {
                cp_id: self.cp_id,
                content,
            });
        }
        Ok(if self.resident.contains(&content) {
            Lookup::Hit
        } else {
            Lookup::Miss
        })
    }
}

pub fn cache_lookup(cache: &CacheState, content: ContentId) -> Result<Lookup, CachingError> {
    cache.lookup(content)
}

/// Scores every content, sorts by correlation and caches the top `capacity`.
pub fn rank_and_prefetch(
    library: &ContentLibrary,
    popularity: &FeaturePopularity,
    capacity: usize,
) -> Result<CacheState, CachingError> {
    let ranking = score_library(library, popularity)?.ranking();
    Ok(CacheState::from_order(library, &ranking, capacity))
}

/// Library ids in a uniformly random order. Caching a prefix of it gives the
/// random baseline, with the Z-cache always a subset of the (Z+1)-cache.
pub fn random_order<R: Rng + ?Sized>(library: &ContentLibrary, rng: &mut R) -> Vec<ContentId> {
    let mut ids: Vec<ContentId> = library.ids().collect();
    ids.sort();
    ids.shuffle(rng);
    ids
}

pub fn random_prefetch<R: Rng + ?Sized>(
    library: &ContentLibrary,
    capacity: usize,
    rng: &mut R,
) -> CacheState {
    CacheState::from_order(library, &random_order(library, rng), capacity)
}

/// Writes `content_id<TAB>correlation<TAB>cached` rows in ranking order.
pub fn write_correlation_dump<W: Write>(
    out: &mut W,
    correlations: &CorrelationVector,
    cache: &CacheState,
) -> io::Result<()> {
    writeln!(out, "content_id\tcorrelation\tcached")?;
    for id in correlations.ranking() {
        let score = correlations.get(id).unwrap_or_default();
        let cached = u8::from(cache.resident.contains(&id));
        writeln!(out, "{}\t{:.12}\t{}", id.0, score, cached)?;
    }
    Ok(())
}
