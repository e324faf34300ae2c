//! HNSW graph over unit vectors, searched by cosine similarity, with
//! post-filtering against a candidate mask and an exact fallback for
//! small candidate sets.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embed::dot;

pub const DEFAULT_M: usize = 32;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_EF_SEARCH: usize = 64;
/// Candidate sets smaller than this are scored exhaustively.
pub const BRUTE_FORCE_BELOW: usize = 1000;
const OVERFETCH: usize = 4;
const LEVEL_SEED: u64 = 0x6e75_6767_6574;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
            ef_search: DEFAULT_EF_SEARCH,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Scored(f32, u32);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    // higher similarity first, then lower ordinal
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Visited marks stamped with a per-search epoch, so clearing is O(1).
#[derive(Default)]
struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn with_len(n: usize) -> Self {
        Visited { marks: vec![0; n], epoch: 0 }
    }

    fn reset(&mut self, n: usize) {
        self.marks.resize(n, 0);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// True if `i` was not yet visited in this search.
    fn insert(&mut self, i: u32) -> bool {
        let m = &mut self.marks[i as usize];
        let fresh = *m != self.epoch;
        *m = self.epoch;
        fresh
    }
}

pub struct DenseIndex {
    params: HnswParams,
    dim: usize,
    vectors: Vec<f32>,
    /// `links[node][level]` = neighbors with their similarity to `node`,
    /// most similar first.
    links: Vec<Vec<Vec<Scored>>>,
    entry: Option<u32>,
    rng: ChaCha8Rng,
    scratch: Visited,
}

impl DenseIndex {
    pub fn new(dim: usize, params: HnswParams) -> Self {
        DenseIndex {
            params,
            dim,
            vectors: Vec::new(),
            links: Vec::new(),
            entry: None,
            rng: ChaCha8Rng::seed_from_u64(LEVEL_SEED),
            scratch: Visited::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn vector(&self, ord: u32) -> &[f32] {
        let i = ord as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    fn sim(&self, q: &[f32], ord: u32) -> f32 {
        dot(q, self.vector(ord))
    }

    fn random_level(&mut self) -> usize {
        let ml = 1.0 / (self.params.m.max(2) as f64).ln();
        let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        (-u.ln() * ml).floor() as usize
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    /// Inserts or replaces the vector of `ord`. Ordinals are dense; a
    /// replaced vector keeps its graph position and cached link scores.
    pub fn upsert(&mut self, ord: u32, vector: &[f32]) {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        let i = ord as usize;
        if i < self.links.len() {
            self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector);
            return;
        }
        assert_eq!(i, self.links.len(), "ordinals must be dense");
        self.vectors.extend_from_slice(vector);
        let level = self.random_level();
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(entry) = self.entry else {
            self.entry = Some(ord);
            return;
        };
        let top = self.links[entry as usize].len() - 1;
        let mut visited = std::mem::take(&mut self.scratch);
        let mut ep = vec![Scored(self.sim(vector, entry), entry)];
        for l in (level + 1..=top).rev() {
            ep = self.search_layer(vector, &ep, 1, l, &mut visited);
        }
        for l in (0..=level.min(top)).rev() {
            let found = self.search_layer(vector, &ep, self.params.ef_construction, l, &mut visited);
            let cap = self.max_links(l);
            let neighbors: Vec<Scored> = found.iter().take(self.params.m).copied().collect();
            for &Scored(sim, n) in &neighbors {
                let list = &mut self.links[n as usize][l];
                let at = list.partition_point(|x| *x > Scored(sim, ord));
                if at < cap {
                    list.insert(at, Scored(sim, ord));
                    list.truncate(cap);
                }
            }
            self.links[i][l] = neighbors;
            ep = found;
        }
        self.scratch = visited;
        if level > top {
            self.entry = Some(ord);
        }
    }

    /// Best-first search of one layer; result sorted by descending similarity.
    fn search_layer(&self, q: &[f32], entry: &[Scored], ef: usize, level: usize, visited: &mut Visited) -> Vec<Scored> {
        visited.reset(self.links.len());
        for s in entry {
            visited.insert(s.1);
        }
        let mut frontier: BinaryHeap<Scored> = entry.iter().copied().collect();
        let mut best: BinaryHeap<Reverse<Scored>> = entry.iter().copied().map(Reverse).collect();
        while best.len() > ef {
            best.pop();
        }
        while let Some(cur) = frontier.pop() {
            let worst = best.peek().map(|r| r.0 .0).unwrap_or(f32::NEG_INFINITY);
            if best.len() >= ef && cur.0 < worst {
                break;
            }
            let Some(neighbors) = self.links[cur.1 as usize].get(level) else {
                continue;
            };
            for &Scored(_, n) in neighbors {
                if !visited.insert(n) {
                    continue;
                }
                let s = Scored(self.sim(q, n), n);
                let worst = best.peek().map(|r| r.0 .0).unwrap_or(f32::NEG_INFINITY);
                if best.len() < ef || s.0 > worst {
                    frontier.push(s);
                    best.push(Reverse(s));
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = best.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    /// Approximate top `k` over the whole graph.
    pub fn search(&self, q: &[f32], k: usize, ef: usize) -> Vec<(u32, f32)> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let top = self.links[entry as usize].len() - 1;
        let mut visited = Visited::with_len(self.links.len());
        let mut ep = vec![Scored(self.sim(q, entry), entry)];
        for l in (1..=top).rev() {
            ep = self.search_layer(q, &ep, 1, l, &mut visited);
        }
        let mut found = self.search_layer(q, &ep, ef.max(k), 0, &mut visited);
        found.truncate(k);
        found.into_iter().map(|s| (s.1, s.0)).collect()
    }

    /// Exact top `k` among `candidates`.
    pub fn brute_force(&self, q: &[f32], candidates: &[u32], k: usize) -> Vec<(u32, f32)> {
        let mut scored: Vec<Scored> = candidates.iter().map(|&o| Scored(self.sim(q, o), o)).collect();
        scored.sort_by(|a, b| b.cmp(a));
        scored.truncate(k);
        scored.into_iter().map(|s| (s.1, s.0)).collect()
    }

    /// Top `k` among the masked candidates: exhaustive below
    /// [`BRUTE_FORCE_BELOW`] candidates, otherwise graph search with
    /// post-filtering, over-fetching 4x until `k` hits or the graph is
    /// exhausted.
    pub fn filtered_search(&self, q: &[f32], candidates: &[u32], mask: &[bool], k: usize) -> Vec<(u32, f32)> {
        if k == 0 || candidates.is_empty() {
            return Vec::new();
        }
        if candidates.len() < BRUTE_FORCE_BELOW {
            return self.brute_force(q, candidates, k);
        }
        let mut fetch = k * OVERFETCH;
        loop {
            let hits: Vec<(u32, f32)> = self
                .search(q, fetch, self.params.ef_search.max(fetch))
                .into_iter()
                .filter(|(o, _)| mask.get(*o as usize).copied().unwrap_or(false))
                .take(k)
                .collect();
            if hits.len() >= k || fetch >= self.len() {
                return hits;
            }
            fetch = (fetch * OVERFETCH).min(self.len());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::embed::{Embedder, HashedTrigramEmbedder};

    fn fixture(n: usize) -> (DenseIndex, Vec<Vec<f32>>) {
        let e = HashedTrigramEmbedder::default();
        let mut idx = DenseIndex::new(e.dim(), HnswParams::default());
        let vs: Vec<Vec<f32>> = (0..n).map(|i| e.embed(&format!("entity {i} works at company {}", i * 7 % 13))).collect();
        for (i, v) in vs.iter().enumerate() {
            idx.upsert(i as u32, v);
        }
        (idx, vs)
    }

    #[test]
    fn self_query_ranks_first() {
        let (idx, vs) = fixture(300);
        let hits = idx.search(&vs[17], 5, 64);
        assert_eq!(hits[0].0, 17);
        assert!((hits[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn filter_excludes_nearest() {
        let (idx, vs) = fixture(1200);
        let mut mask = vec![true; 1200];
        mask[5] = false;
        let cands: Vec<u32> = (0..1200).filter(|&o| o != 5).collect();
        let hits = idx.filtered_search(&vs[5], &cands, &mask, 10);
        assert_eq!(hits.len(), 10);
        assert!(hits.iter().all(|(o, _)| *o != 5));
        let small: Vec<u32> = (0..50).filter(|&o| o != 5).collect();
        let hits = idx.filtered_search(&vs[5], &small, &mask, 10);
        assert!(hits.iter().all(|(o, _)| *o != 5 && *o < 50));
    }

    #[test]
    fn empty_graph() {
        let idx = DenseIndex::new(4, HnswParams::default());
        assert!(idx.search(&[1.0, 0.0, 0.0, 0.0], 3, 64).is_empty());
    }
}
