//! Okapi BM25 over an inverted index of nugget texts.

use fnv::FnvHashMap;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Case-folds and splits on non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SparseIndex {
    k1: f64,
    b: f64,
    terms: FnvHashMap<String, u32>,
    /// Per term, `(ordinal, term frequency)` sorted by ordinal.
    postings: Vec<Vec<(u32, u32)>>,
    doc_terms: Vec<Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    total_len: u64,
}

impl Default for SparseIndex {
    fn default() -> Self {
        Self::new(DEFAULT_K1, DEFAULT_B)
    }
}

impl SparseIndex {
    pub fn new(k1: f64, b: f64) -> Self {
        SparseIndex {
            k1,
            b,
            terms: FnvHashMap::default(),
            postings: Vec::new(),
            doc_terms: Vec::new(),
            doc_len: Vec::new(),
            total_len: 0,
        }
    }

    /// Number of indexed documents.
    pub fn len(&self) -> usize {
        self.doc_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_len.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, |&t| self.postings[t as usize].len())
    }

    pub fn avg_len(&self) -> f64 {
        if self.doc_len.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.doc_len.len() as f64
        }
    }

    /// Indexes `text` under `ord`, replacing a previous text for the same
    /// ordinal. Ordinals are dense.
    pub fn upsert(&mut self, ord: u32, text: &str) {
        let i = ord as usize;
        if i < self.doc_len.len() {
            self.remove_postings(ord);
        } else {
            assert_eq!(i, self.doc_len.len(), "ordinals must be dense");
            self.doc_len.push(0);
            self.doc_terms.push(Vec::new());
        }
        let tokens = tokenize(text);
        let mut tf: FnvHashMap<u32, u32> = FnvHashMap::default();
        for tok in &tokens {
            let next = self.terms.len() as u32;
            let id = *self.terms.entry(tok.clone()).or_insert(next);
            if id as usize == self.postings.len() {
                self.postings.push(Vec::new());
            }
            *tf.entry(id).or_insert(0) += 1;
        }
        let mut terms: Vec<(u32, u32)> = tf.into_iter().collect();
        terms.sort_unstable();
        for &(term, count) in &terms {
            let list = &mut self.postings[term as usize];
            match list.last() {
                Some(&(last, _)) if last >= ord => {
                    let pos = list.partition_point(|&(o, _)| o < ord);
                    list.insert(pos, (ord, count));
                }
                _ => list.push((ord, count)),
            }
        }
        self.doc_len[i] = tokens.len() as u32;
        self.total_len += tokens.len() as u64;
        self.doc_terms[i] = terms;
    }

    fn remove_postings(&mut self, ord: u32) {
        let i = ord as usize;
        for &(term, _) in &self.doc_terms[i] {
            let list = &mut self.postings[term as usize];
            if let Ok(pos) = list.binary_search_by_key(&ord, |&(o, _)| o) {
                list.remove(pos);
            }
        }
        self.total_len -= self.doc_len[i] as u64;
        self.doc_len[i] = 0;
        self.doc_terms[i].clear();
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.doc_len.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 scores of every candidate (`mask[ord]`) containing at least one
    /// distinct query term. Corpus statistics cover the whole index.
    /// Unordered.
    pub fn score(&self, query_terms: &[String], mask: &[bool]) -> Vec<(u32, f64)> {
        let mut seen: Vec<u32> = Vec::new();
        for t in query_terms {
            if let Some(&id) = self.terms.get(t.as_str()) {
                if !seen.contains(&id) {
                    seen.push(id);
                }
            }
        }
        if seen.is_empty() {
            return Vec::new();
        }
        let avg = self.avg_len();
        let mut acc = vec![0.0f64; self.doc_len.len()];
        let mut touched = Vec::new();
        for id in seen {
            let list = &self.postings[id as usize];
            let idf = self.idf(list.len());
            for &(ord, tf) in list {
                let o = ord as usize;
                if !mask.get(o).copied().unwrap_or(false) {
                    continue;
                }
                let tf = tf as f64;
                let norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[o] as f64 / avg);
                if acc[o] == 0.0 {
                    touched.push(ord);
                }
                acc[o] += idf * tf * (self.k1 + 1.0) / (tf + norm);
            }
        }
        touched.into_iter().map(|o| (o, acc[o as usize])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_folds_and_splits() {
        assert_eq!(tokenize("Alice Ng, CEO-of Acme!"), vec!["alice", "ng", "ceo", "of", "acme"]);
        assert!(tokenize("  ,.; ").is_empty());
    }

    #[test]
    fn single_document_example() {
        let mut s = SparseIndex::default();
        s.upsert(0, "acme ceo");
        let scores = s.score(&tokenize("acme"), &[true]);
        assert_eq!(scores.len(), 1);
        assert!((scores[0].1 - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((scores[0].1 - 0.28768).abs() < 1e-5);
    }

    #[test]
    fn unknown_terms_and_masking() {
        let mut s = SparseIndex::default();
        s.upsert(0, "acme ceo");
        s.upsert(1, "acme ceo");
        assert!(s.score(&tokenize("zebra"), &[true, true]).is_empty());
        let scores = s.score(&tokenize("ceo"), &[true, true]);
        assert_eq!(scores[0].1, scores[1].1);
        let masked = s.score(&tokenize("ceo"), &[false, true]);
        assert_eq!(masked.len(), 1);
        assert_eq!(masked[0].0, 1);
    }

    #[test]
    fn replacing_text_updates_statistics() {
        let mut s = SparseIndex::default();
        s.upsert(0, "alpha beta");
        s.upsert(1, "alpha");
        assert_eq!(s.doc_freq("alpha"), 2);
        s.upsert(0, "gamma gamma gamma");
        assert_eq!(s.doc_freq("alpha"), 1);
        assert_eq!(s.doc_freq("beta"), 0);
        assert_eq!(s.doc_freq("gamma"), 1);
        assert!((s.avg_len() - 2.0).abs() < 1e-12);
    }
}
