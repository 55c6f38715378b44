use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{MovieRecord, RatingEvent, TraceError};
use crate::caching::ContentLibrary;
use crate::ids::{ContentId, CpId};

/// Disjoint per-provider movie sets drawn from a catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpAssignment {
    libraries: Vec<Vec<u32>>,
    owner: HashMap<u32, CpId>,
    seed: u64,
}

impl CpAssignment {
    pub fn providers(&self) -> usize {
        self.libraries.len()
    }

    /// Movie ids of one provider, in draw order.
    pub fn library(&self, cp: CpId) -> &[u32] {
        &self.libraries[cp.0 as usize]
    }

    pub fn owner_of(&self, movie_id: u32) -> Option<CpId> {
        self.owner.get(&movie_id).copied()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Builds each provider's [`ContentLibrary`] from the catalog features.
    pub fn content_libraries(&self, catalog: &[MovieRecord]) -> Vec<ContentLibrary> {
        let by_id: HashMap<u32, &MovieRecord> = catalog.iter().map(|m| (m.movie_id, m)).collect();
        self.libraries
            .iter()
            .enumerate()
            .map(|(cp, ids)| {
                let contents = ids
                    .iter()
                    .map(|id| (ContentId(*id), by_id[id].features.clone()))
                    .collect();
                ContentLibrary::new(CpId(cp as u32), contents).expect("assignment ids are unique")
            })
            .collect()
    }
}

/// Draws `m` pairwise-disjoint uniform random subsets of `per_cp` movies.
pub fn partition_libraries(
    catalog: &[MovieRecord],
    m: usize,
    per_cp: usize,
    seed: u64,
) -> Result<CpAssignment, TraceError> {
    let mut ids: Vec<u32> = catalog.iter().map(|r| r.movie_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let needed = m * per_cp;
    if ids.len() < needed {
        return Err(TraceError::Sizing {
            needed,
            available: ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let libraries: Vec<Vec<u32>> = ids[..needed]
        .chunks(per_cp.max(1))
        .take(m)
        .map(<[u32]>::to_vec)
        .collect();
    let libraries = if per_cp == 0 {
        vec![Vec::new(); m]
    } else {
        libraries
    };
    let owner = libraries
        .iter()
        .enumerate()
        .flat_map(|(cp, ids)| ids.iter().map(move |id| (*id, CpId(cp as u32))))
        .collect();
    Ok(CpAssignment {
        libraries,
        owner,
        seed,
    })
}

/// A request delivered to the provider that owns the movie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoutedRequest {
    pub timestamp: u64,
    pub user_id: u32,
    pub cp_id: CpId,
    pub content: ContentId,
}

/// Routes each event to the owner of its movie; events for unassigned
/// movies are dropped. Order is preserved.
pub fn route_requests(events: &[RatingEvent], assignment: &CpAssignment) -> Vec<RoutedRequest> {
    events
        .iter()
        .filter_map(|e| {
            assignment.owner_of(e.movie_id).map(|cp_id| RoutedRequest {
                timestamp: e.timestamp,
                user_id: e.user_id,
                cp_id,
                content: ContentId(e.movie_id),
            })
        })
        .collect()
}
