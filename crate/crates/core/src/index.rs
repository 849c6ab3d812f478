//! Inverted index for eps-radius region queries over one fingerprint matrix.
//!
//! Two fingerprints with no access point in common are at distance 2, so a
//! query only needs to look at fingerprints that share at least one AP with
//! it. The index keeps, per AP, the ascending list of fingerprints that
//! received it, plus every fingerprint's intra-fingerprint ranks so that
//! candidate distances never re-sort readings. Empty fingerprints are only
//! ever within eps of their empty neighbors, which [`EmptyRuns`] tracks.

use crate::distance::{intra_ranks, ranked_distance, RankedView};
use crate::error::{Error, Result};
use crate::model::{ApKey, FingerprintMatrix};

/// AP -> ascending fingerprint indices.
#[derive(Debug, Clone, Default)]
pub struct ApPostings {
    lists: Vec<Vec<u32>>,
}

impl ApPostings {
    pub fn get(&self, ap: ApKey) -> &[u32] {
        self.lists.get(ap.0 as usize).map_or(&[], Vec::as_slice)
    }

    /// APs with at least one posting.
    pub fn ap_count(&self) -> usize {
        self.lists.iter().filter(|l| !l.is_empty()).count()
    }
}

/// Flattened per-fingerprint AP keys and fractional ranks.
#[derive(Debug, Clone, Default)]
pub struct RankCache {
    offsets: Vec<usize>,
    keys: Vec<ApKey>,
    ranks: Vec<f64>,
}

impl RankCache {
    pub fn view(&self, i: usize) -> RankedView<'_> {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        RankedView {
            keys: &self.keys[a..b],
            ranks: &self.ranks[a..b],
        }
    }

    /// Number of APs in fingerprint `i`.
    pub fn k(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Sorted indices of empty fingerprints.
#[derive(Debug, Clone, Default)]
pub struct EmptyRuns {
    indices: Vec<usize>,
}

impl EmptyRuns {
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

#[derive(Debug, Clone)]
pub struct FingerprintIndex {
    pub postings: ApPostings,
    pub ranks: RankCache,
    pub empty: EmptyRuns,
    len: usize,
}

/// Per-thread scratch for candidate deduplication.
#[derive(Debug, Clone, Default)]
pub struct QueryScratch {
    stamp: Vec<u32>,
    generation: u32,
    candidates: Vec<u32>,
}

impl QueryScratch {
    fn reset(&mut self, len: usize) {
        if self.stamp.len() != len {
            self.stamp = vec![0; len];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.candidates.clear();
    }
}

/// Rejects eps outside `[0, 2)`.
pub fn validate_eps(eps: f64) -> Result<()> {
    if (0.0..2.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Config(format!("eps must lie in [0, 2), got {eps}")))
    }
}

impl FingerprintIndex {
    pub fn build(m: &FingerprintMatrix) -> Self {
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); m.ap_count()];
        let mut cache = RankCache {
            offsets: Vec::with_capacity(m.len() + 1),
            ..Default::default()
        };
        cache.offsets.push(0);
        let mut empty = Vec::new();
        for (i, f) in m.fingerprints().iter().enumerate() {
            if f.is_empty() {
                empty.push(i);
            }
            for r in f.readings() {
                lists[r.ap.0 as usize].push(i as u32);
                cache.keys.push(r.ap);
            }
            cache.ranks.extend(intra_ranks(f.readings()));
            cache.offsets.push(cache.keys.len());
        }
        Self {
            postings: ApPostings { lists },
            ranks: cache,
            empty: EmptyRuns { indices: empty },
            len: m.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All fingerprints within `eps` of fingerprint `q`, ascending.
    pub fn region_query(&self, q: usize, eps: f64) -> Result<Vec<usize>> {
        let mut scratch = QueryScratch::default();
        let mut out = Vec::new();
        self.region_query_with(q, eps, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`region_query`](Self::region_query);
    /// `out` is cleared first.
    pub fn region_query_with(
        &self,
        q: usize,
        eps: f64,
        scratch: &mut QueryScratch,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        if q >= self.len {
            return Err(Error::IndexRange {
                index: q,
                len: self.len,
            });
        }
        validate_eps(eps)?;
        out.clear();

        let query = self.ranks.view(q);
        if query.is_empty() {
            let lo = q.saturating_sub(1);
            let hi = (q + 1).min(self.len - 1);
            out.extend((lo..=hi).filter(|&i| i == q || self.empty.contains(i)));
            return Ok(());
        }

        scratch.reset(self.len);
        let generation = scratch.generation;
        for &ap in query.keys {
            for &i in self.postings.get(ap) {
                let slot = &mut scratch.stamp[i as usize];
                if *slot != generation {
                    *slot = generation;
                    scratch.candidates.push(i);
                }
            }
        }
        for &i in &scratch.candidates {
            let i = i as usize;
            if i == q || ranked_distance(query, self.ranks.view(i)).value <= eps {
                out.push(i);
            }
        }
        out.sort_unstable();
        Ok(())
    }
}
