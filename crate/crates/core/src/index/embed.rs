//! Text embedders. The reference implementation hashes character
//! 3-grams into a fixed number of signed buckets and L2-normalizes.

use std::hash::Hasher;

use fnv::FnvHasher;

pub const REFERENCE_DIM: usize = 64;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    /// Unit-length embedding of `text`.
    fn embed(&self, text: &str) -> Vec<f32>;
}

#[derive(Debug, Clone)]
pub struct HashedTrigramEmbedder {
    dim: usize,
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self::new(REFERENCE_DIM)
    }
}

impl HashedTrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedTrigramEmbedder { dim }
    }
}

impl Embedder for HashedTrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let folded: Vec<char> = std::iter::once(' ')
            .chain(text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut v = vec![0f64; self.dim];
        let mut buf = [0u8; 12];
        for w in folded.windows(3) {
            let mut h = FnvHasher::default();
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            h.write(&buf[..n]);
            let h = h.finish();
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut unit = vec![0f32; self.dim];
            unit[0] = 1.0;
            return unit;
        }
        v.into_iter().map(|x| (x / norm) as f32).collect()
    }
}

/// Eight independent partial sums so the loop vectorizes.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0f32; 8];
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}
