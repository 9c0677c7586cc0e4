//! Path similarity over the hypernym taxonomy.
//!
//! The distance between two synsets is the length of the shortest path that
//! climbs from each of them to a common ancestor (hypernym and instance
//! hypernym edges), and the similarity is `1 / (distance + 1)`. Synsets with
//! no common ancestor have no similarity (`None`).

use std::collections::{HashMap, VecDeque};

use super::{SynsetId, WordNetDb};
use crate::error::Result;

/// `1 / (d + 1)`.
pub fn similarity_from_distance(d: usize) -> f64 {
    1.0 / (d as f64 + 1.0)
}

/// Largest distance whose similarity still reaches `alpha`.
pub fn max_distance_for(alpha: f64) -> usize {
    if alpha.is_nan() || alpha <= 0.0 {
        return usize::MAX;
    }
    let mut d = 0;
    while similarity_from_distance(d + 1) >= alpha {
        d += 1;
    }
    d
}

impl WordNetDb {
    /// Ancestors of a synset (including itself) with their shortest upward
    /// distance, in non-decreasing distance order.
    pub fn ancestors(&self, id: SynsetId) -> Result<Vec<(SynsetId, usize)>> {
        let start = self.position(id)?;
        Ok(self
            .ancestors_dense(start, usize::MAX)
            .into_iter()
            .map(|(p, d)| (self.synsets[p as usize].id, d))
            .collect())
    }

    fn ancestors_dense(&self, start: u32, max_depth: usize) -> Vec<(u32, usize)> {
        let mut seen = HashMap::new();
        seen.insert(start, 0usize);
        let mut order = vec![(start, 0usize)];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = seen[&u];
            if du == max_depth {
                continue;
            }
            for &p in &self.parents[u as usize] {
                if !seen.contains_key(&p) {
                    seen.insert(p, du + 1);
                    order.push((p, du + 1));
                    queue.push_back(p);
                }
            }
        }
        order
    }

    /// Shortest common-ancestor path length, or `None` when the two synsets
    /// share no ancestor.
    pub fn path_distance(&self, a: SynsetId, b: SynsetId) -> Result<Option<usize>> {
        let pa = self.position(a)?;
        let pb = self.position(b)?;
        if pa == pb {
            return Ok(Some(0));
        }
        let up_a: HashMap<u32, usize> = self.ancestors_dense(pa, usize::MAX).into_iter().collect();
        let mut best: Option<usize> = None;
        for (node, db) in self.ancestors_dense(pb, usize::MAX) {
            if best.is_some_and(|b| db >= b) {
                break;
            }
            if let Some(&da) = up_a.get(&node) {
                let d = da + db;
                if best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
        Ok(best)
    }

    /// `1 / (d + 1)` for the shortest path length `d`; `None` is the
    /// no-similarity sentinel for synsets without a common ancestor.
    pub fn path_similarity(&self, a: SynsetId, b: SynsetId) -> Result<Option<f64>> {
        Ok(self.path_distance(a, b)?.map(similarity_from_distance))
    }
}

/// Finds, for a query synset, the closest member of a fixed target set
/// (e.g. the classes of a vocabulary).
///
/// Every target's ancestors are indexed with the best `(distance, class)`
/// reaching them, so a query only walks its own ancestors.
#[derive(Debug)]
pub struct NearestClassIndex<'a> {
    db: &'a WordNetDb,
    below: HashMap<u32, (usize, usize)>,
}

impl<'a> NearestClassIndex<'a> {
    /// `targets[k]` is the synset of class `k`.
    pub fn new(db: &'a WordNetDb, targets: &[SynsetId]) -> Result<Self> {
        let mut below: HashMap<u32, (usize, usize)> = HashMap::new();
        for (class, &t) in targets.iter().enumerate() {
            let start = db.position(t)?;
            for (node, d) in db.ancestors_dense(start, usize::MAX) {
                below
                    .entry(node)
                    .and_modify(|cur| {
                        if (d, class) < *cur {
                            *cur = (d, class);
                        }
                    })
                    .or_insert((d, class));
            }
        }
        Ok(NearestClassIndex { db, below })
    }

    /// The `(distance, class)` of the closest target within `max_distance`,
    /// ties resolved towards the lower class index.
    pub fn nearest(&self, query: SynsetId, max_distance: usize) -> Result<Option<(usize, usize)>> {
        let start = self.db.position(query)?;
        let mut best: Option<(usize, usize)> = None;
        for (node, up) in self.db.ancestors_dense(start, max_distance) {
            if best.is_some_and(|(bd, _)| up > bd) {
                break;
            }
            if let Some(&(down, class)) = self.below.get(&node) {
                let cand = (up + down, class);
                if cand.0 <= max_distance && best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
        }
        Ok(best)
    }

    /// Like [`nearest`](Self::nearest) but returns the similarity.
    pub fn most_similar(&self, query: SynsetId, alpha: f64) -> Result<Option<(f64, usize)>> {
        Ok(self
            .nearest(query, max_distance_for(alpha))?
            .map(|(d, class)| (similarity_from_distance(d), class)))
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixture;
    use super::*;

    const ENTITY: SynsetId = SynsetId::new(10);
    const ANIMAL: SynsetId = SynsetId::new(100);
    const MAMMAL: SynsetId = SynsetId::new(200);
    const DOG: SynsetId = SynsetId::new(300);
    const CAT: SynsetId = SynsetId::new(400);
    const MAN: SynsetId = SynsetId::new(500);
    const PUPPY: SynsetId = SynsetId::new(600);
    const BOX: SynsetId = SynsetId::new(900);

    #[test]
    fn identity_parent_and_siblings() {
        let db = fixture::db();
        assert_eq!(db.path_similarity(DOG, DOG).unwrap(), Some(1.0));
        assert_eq!(db.path_similarity(DOG, MAMMAL).unwrap(), Some(0.5));
        assert_eq!(db.path_distance(DOG, CAT).unwrap(), Some(2));
        assert_eq!(db.path_distance(PUPPY, CAT).unwrap(), Some(3));
        assert_eq!(db.path_distance(MAN, PUPPY).unwrap(), Some(5));
        assert_eq!(db.path_distance(BOX, PUPPY).unwrap(), Some(4));
    }

    #[test]
    fn unknown_synset_is_an_error() {
        let db = fixture::db();
        assert!(db.path_similarity(DOG, SynsetId::new(12345)).is_err());
    }

    #[test]
    fn threshold_to_depth() {
        assert_eq!(max_distance_for(1.0), 0);
        assert_eq!(max_distance_for(0.5), 1);
        assert_eq!(max_distance_for(0.34), 1);
        assert_eq!(max_distance_for(1.0 / 3.0), 2);
        assert_eq!(max_distance_for(0.2), 4);
    }

    #[test]
    fn nearest_class_prefers_distance_then_index() {
        let db = fixture::db();
        let idx = NearestClassIndex::new(&db, &[CAT, MAMMAL, DOG]).unwrap();
        assert_eq!(idx.nearest(DOG, 10).unwrap(), Some((0, 2)));
        assert_eq!(idx.nearest(PUPPY, 10).unwrap(), Some((1, 2)));
        assert_eq!(idx.nearest(ANIMAL, 10).unwrap(), Some((1, 1)));
        assert_eq!(idx.nearest(ENTITY, 1).unwrap(), None);
        assert_eq!(idx.nearest(BOX, 1).unwrap(), None);
        assert_eq!(idx.nearest(BOX, 2).unwrap(), Some((2, 1)));
    }
}
