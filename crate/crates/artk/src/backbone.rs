//! Backbones: a counted n-gram language model and a seeded random-projection
//! text encoder.
//!
//! Both stand in for the trained networks of the full-size systems. The
//! n-gram model is the generator whose predictions get augmented; the
//! embedder supplies the fixed key space that retrieval happens in. Neither
//! has trainable parameters, so identical inputs and seeds give identical
//! behaviour on every run.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Distribution;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Token inventory with dense ids. The specials [`BOS`], [`EOS`], [`UNK`]
/// always occupy ids 0, 1, 2; corpus tokens follow in first-occurrence
/// order, so a vocabulary is a pure function of its corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_corpus<S: AsRef<str>>(corpus: &[Vec<S>]) -> Vocabulary {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for special in [BOS, EOS, UNK] {
            vocab.intern(special);
        }
        for sentence in corpus {
            for token in sentence {
                vocab.intern(token.as_ref());
            }
        }
        vocab
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    /// Id of `token`, or the id of [`UNK`] when it is out of vocabulary.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the specials are always present
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub const BOS_ID: u32 = 0;
    pub const EOS_ID: u32 = 1;
    pub const UNK_ID: u32 = 2;
}

#[derive(Debug, Default)]
struct ContextCounts {
    counts: HashMap<u32, u64>,
    total: u64,
}

/// Add-k smoothed n-gram language model with backoff to shorter contexts.
///
/// `next_distribution` conditions on the longest suffix of the (BOS-padded)
/// prefix that was seen in training, down to the empty context. Smoothing is
/// add-k over the full vocabulary: `p(w | c) = (count(c, w) + k) / (total(c)
/// + k * |V|)`. A model that has seen any corpus at all always has the empty
/// context, so the final uniform fallback only fires on an unfitted model.
#[derive(Debug)]
pub struct NGramLm {
    vocab: Vocabulary,
    order: usize,
    k: f64,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

impl NGramLm {
    /// Counts all orders up to `order` over `corpus`. Every sentence is
    /// padded with `order - 1` BOS tokens and one terminating EOS.
    pub fn train(corpus: &[Vec<String>], order: usize, k: f64) -> Result<NGramLm> {
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus"));
        }
        let mut lm = NGramLm::empty(Vocabulary::from_corpus(corpus), order, k)?;
        for sentence in corpus {
            let mut ids = vec![Vocabulary::BOS_ID; order - 1];
            ids.extend(sentence.iter().map(|t| lm.vocab.id(t)));
            ids.push(Vocabulary::EOS_ID);
            for pos in (order - 1)..ids.len() {
                let target = ids[pos];
                for ctx_len in 0..order {
                    let entry = lm
                        .counts
                        .entry(ids[pos - ctx_len..pos].to_vec())
                        .or_default();
                    *entry.counts.entry(target).or_insert(0) += 1;
                    entry.total += 1;
                }
            }
        }
        Ok(lm)
    }

    /// A model with counts not yet fitted; useful only to observe the
    /// uniform fallback.
    pub(crate) fn empty(vocab: Vocabulary, order: usize, k: f64) -> Result<NGramLm> {
        if order < 1 {
            return Err(Error::OutOfRange {
                what: "n-gram order",
                value: order as f64,
            });
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::OutOfRange {
                what: "smoothing constant",
                value: k,
            });
        }
        Ok(NGramLm {
            vocab,
            order,
            k,
            counts: HashMap::new(),
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Training count of `next` following `context` (exact context match,
    /// no backoff). Unknown tokens map to [`UNK`].
    pub fn ngram_count(&self, context: &[String], next: &str) -> u64 {
        let ctx: Vec<u32> = context.iter().map(|t| self.vocab.id(t)).collect();
        self.counts
            .get(&ctx)
            .and_then(|c| c.counts.get(&self.vocab.id(next)))
            .copied()
            .unwrap_or(0)
    }

    /// Distribution over the next token given `prefix`.
    pub fn next_distribution(&self, prefix: &[String]) -> Distribution {
        let mut ids = vec![Vocabulary::BOS_ID; self.order - 1];
        ids.extend(prefix.iter().map(|t| self.vocab.id(t)));
        for ctx_len in (0..self.order).rev() {
            let ctx = &ids[ids.len() - ctx_len..];
            if let Some(entry) = self.counts.get(ctx) {
                let v = self.vocab.len() as f64;
                let denom = entry.total as f64 + self.k * v;
                let probs: Vec<f64> = (0..self.vocab.len() as u32)
                    .map(|w| {
                        let c = entry.counts.get(&w).copied().unwrap_or(0) as f64;
                        (c + self.k) / denom
                    })
                    .collect();
                return Distribution::from_weights(probs)
                    .expect("add-k weights are positive and finite");
            }
        }
        Distribution::uniform(self.vocab.len()).expect("vocabulary is never empty")
    }
}

/// Deterministic text encoder: each token hashes to a fixed unit vector, a
/// prefix embeds as the decayed sum `sum_i gamma^(L-1-i) * v(t_i)` scaled to
/// unit length, so the most recent token dominates the key.
///
/// Token vectors come from a ChaCha stream seeded by `fnv1a(token) xor
/// seed`, so two embedders with the same `(dim, gamma, seed)` agree exactly,
/// with no stored table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrefixEmbedder {
    dim: usize,
    gamma: f64,
    seed: u64,
}

impl PrefixEmbedder {
    pub fn new(dim: usize, gamma: f64, seed: u64) -> Result<PrefixEmbedder> {
        if dim == 0 {
            return Err(Error::OutOfRange {
                what: "embedding dimension",
                value: 0.0,
            });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::OutOfRange {
                what: "decay gamma",
                value: gamma,
            });
        }
        Ok(PrefixEmbedder { dim, gamma, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The fixed unit vector for one token.
    pub fn token_vector(&self, token: &str) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ self.seed);
        let mut v = vec![0.0f64; self.dim];
        let mut i = 0;
        while i < self.dim {
            let (z0, z1) = gaussian_pair(&mut rng);
            v[i] = z0;
            if i + 1 < self.dim {
                v[i + 1] = z1;
            }
            i += 2;
        }
        normalize(&v).expect("gaussian vector has nonzero norm")
    }

    fn decayed_sum(&self, prefix: &[String]) -> Vec<f64> {
        let mut sum = vec![0.0f64; self.dim];
        let last = prefix.len() - 1;
        for (i, token) in prefix.iter().enumerate() {
            let w = self.gamma.powi((last - i) as i32);
            for (s, x) in sum.iter_mut().zip(self.token_vector(token)) {
                *s += w * f64::from(x);
            }
        }
        sum
    }

    /// Unit-length key for a non-empty prefix, recency-weighted by gamma.
    pub fn embed_prefix(&self, prefix: &[String]) -> Result<Vec<f32>> {
        if prefix.is_empty() {
            return Err(Error::Empty("prefix"));
        }
        normalize(&self.decayed_sum(prefix))
    }

    /// Unit-length order-insensitive key for a bag of tokens (questions,
    /// passages).
    pub fn embed_bag(&self, tokens: &[String]) -> Result<Vec<f32>> {
        if tokens.is_empty() {
            return Err(Error::Empty("token bag"));
        }
        let mut sum = vec![0.0f64; self.dim];
        for token in tokens {
            for (s, x) in sum.iter_mut().zip(self.token_vector(token)) {
                *s += f64::from(x);
            }
        }
        normalize(&sum)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Box-Muller transform over the rng's uniform stream.
fn gaussian_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

fn normalize(v: &[f64]) -> Result<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| (x / norm) as f32).collect())
}
