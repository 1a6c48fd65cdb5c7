//! Fusion: every way this crate combines a retrieved artefact with the
//! backbone's own signal.
//!
//! Early fusion rewrites the model input ([`prime`], [`prime_key_aware`]),
//! intermediate fusion reshapes a vector input ([`attention_sum`]) or
//! filters the output space ([`mask_filter`]), and late fusion mixes output
//! distributions ([`convex`], [`dynamic_gate`]). [`neighbor_softmax`] and
//! [`cache_weights`] turn retrieved candidates into the distribution those
//! mixers consume.

use serde::Serialize;

use crate::backbone::Vocabulary;
use crate::error::{Error, Result};
use crate::kb::CacheEntry;

/// How far a probability vector may drift from summing to exactly one.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Separator token spliced between text blocks under early fusion.
pub const DOC_SEP: &str = "[DOC]";
/// Separator token between a key and its value in key-aware priming.
pub const KV_SEP: &str = "[KV]";

/// A categorical distribution: non-negative, finite, sums to one within
/// [`DISTRIBUTION_TOLERANCE`]. Construction is the only validation point;
/// every fusion operator returns one of these, so invalid probability
/// vectors cannot propagate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Distribution> {
        if probs.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NotADistribution(format!(
                    "entry {i} is {p}"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::NotADistribution(format!("sums to {sum}")));
        }
        Ok(Distribution { probs })
    }

    /// Normalizes non-negative weights with positive total mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Distribution> {
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NotADistribution(format!(
                    "weight {i} is {w}"
                )));
            }
            total += w;
        }
        if weights.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if total <= 0.0 {
            return Err(Error::NotADistribution("zero total mass".into()));
        }
        Ok(Distribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(len: usize) -> Result<Distribution> {
        if len == 0 {
            return Err(Error::Empty("probability vector"));
        }
        Ok(Distribution {
            probs: vec![1.0 / len as f64; len],
        })
    }

    pub fn one_hot(len: usize, index: usize) -> Result<Distribution> {
        if index >= len {
            return Err(Error::OutOfRange {
                what: "one-hot index",
                value: index as f64,
            });
        }
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Ok(Distribution { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Index of the largest probability; first wins on exact ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// The `k` largest probabilities as `(index, prob)`, ties by index.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> =
            self.probs.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// Static interpolation `p = lambda * p_xi + (1 - lambda) * p_lm`.
///
/// At `lambda = 0` the result is bitwise equal to `p_lm`.
pub fn convex(p_xi: &Distribution, p_lm: &Distribution, lambda: f64) -> Result<Distribution> {
    if !(0.0..=1.0).contains(&lambda) || lambda.is_nan() {
        return Err(Error::OutOfRange {
            what: "lambda",
            value: lambda,
        });
    }
    if p_xi.len() != p_lm.len() {
        return Err(Error::LengthMismatch {
            left: p_xi.len(),
            right: p_lm.len(),
        });
    }
    let probs = p_xi
        .probs
        .iter()
        .zip(&p_lm.probs)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Distribution::new(probs)
}

/// Pools scored next-token candidates into a distribution:
/// `p(w)` is proportional to the sum of `exp(score)` over candidates whose
/// token is `w`. Scores are shifted by their maximum before exponentiation,
/// which leaves the distribution unchanged but keeps `exp` in range.
///
/// Works for both similarity scores and negated distances, since only score
/// differences matter.
pub fn neighbor_softmax(scored: &[(&str, f64)], vocab: &Vocabulary) -> Result<Distribution> {
    if scored.is_empty() {
        return Err(Error::Empty("scored candidates"));
    }
    let max = scored
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NotADistribution(format!(
            "non-finite candidate score {max}"
        )));
    }
    let mut weights = vec![0.0f64; vocab.len()];
    for (token, score) in scored {
        weights[vocab.id(token) as usize] += (score - max).exp();
    }
    Distribution::from_weights(weights)
}

/// Pools a dynamic cache into a next-token distribution: each entry with
/// stored key `r` and token `w` contributes `exp(theta * key . r)` to `w`'s
/// mass. Shift-by-max is applied to the dot products for stability.
pub fn cache_weights<'a, I>(
    entries: I,
    key: &[f32],
    theta: f64,
    vocab: &Vocabulary,
) -> Result<Distribution>
where
    I: IntoIterator<Item = &'a CacheEntry>,
{
    if !theta.is_finite() {
        return Err(Error::OutOfRange {
            what: "theta",
            value: theta,
        });
    }
    let mut scored: Vec<(u32, f64)> = Vec::new();
    for entry in entries {
        if entry.key.len() != key.len() {
            return Err(Error::DimMismatch {
                expected: key.len(),
                got: entry.key.len(),
            });
        }
        let dot: f64 = entry
            .key
            .iter()
            .zip(key)
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum();
        scored.push((vocab.id(&entry.token), theta * dot));
    }
    if scored.is_empty() {
        return Err(Error::Empty("cache"));
    }
    let max = scored
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights = vec![0.0f64; vocab.len()];
    for (id, score) in scored {
        weights[id as usize] += (score - max).exp();
    }
    Distribution::from_weights(weights)
}

/// Gate parameterization for [`dynamic_gate`].
#[derive(Debug, Clone)]
pub enum GateParams {
    /// One gate for the whole distribution: `g = sigmoid(w . key)`.
    /// `w` must have the key's dimension.
    Scalar(Vec<f32>),
    /// One gate per output coordinate, cycling the key's dimensions:
    /// coordinate `v` uses `g_v = sigmoid(w[v % d] * key[v % d])`.
    PerCoordinate(Vec<f32>),
}

impl GateParams {
    /// The all-zero scalar gate, which mixes both sources equally
    /// (`sigmoid(0) = 1/2`).
    pub fn neutral(dim: usize) -> GateParams {
        GateParams::Scalar(vec![0.0; dim])
    }
}

#[derive(Debug, Clone)]
pub struct GateOutcome {
    pub dist: Distribution,
    /// The gate value, or its mean in per-coordinate mode. Near 1 the
    /// backbone dominates; near 0 the artefact does.
    pub gate: f64,
}

/// Learned-gate mixing `z = (1 - g) * p_xi + g * p_lm`, where the gate is
/// computed from the retrieval key. The per-coordinate form is renormalized,
/// since coordinate-wise mixtures of two distributions need not sum to one.
pub fn dynamic_gate(
    p_xi: &Distribution,
    p_lm: &Distribution,
    key: &[f32],
    params: &GateParams,
) -> Result<GateOutcome> {
    if p_xi.len() != p_lm.len() {
        return Err(Error::LengthMismatch {
            left: p_xi.len(),
            right: p_lm.len(),
        });
    }
    if key.is_empty() {
        return Err(Error::Empty("key"));
    }
    match params {
        GateParams::Scalar(w) => {
            if w.len() != key.len() {
                return Err(Error::DimMismatch {
                    expected: key.len(),
                    got: w.len(),
                });
            }
            let dot: f64 = w
                .iter()
                .zip(key)
                .map(|(a, b)| f64::from(*a) * f64::from(*b))
                .sum();
            let g = sigmoid(dot);
            let probs = p_xi
                .probs
                .iter()
                .zip(&p_lm.probs)
                .map(|(a, b)| (1.0 - g) * a + g * b)
                .collect();
            Ok(GateOutcome {
                dist: Distribution::new(probs)?,
                gate: g,
            })
        }
        GateParams::PerCoordinate(w) => {
            if w.len() != key.len() {
                return Err(Error::DimMismatch {
                    expected: key.len(),
                    got: w.len(),
                });
            }
            let d = key.len();
            let mut gate_sum = 0.0;
            let mut weights = Vec::with_capacity(p_xi.len());
            for v in 0..p_xi.len() {
                let j = v % d;
                let g = sigmoid(f64::from(w[j]) * f64::from(key[j]));
                gate_sum += g;
                weights.push((1.0 - g) * p_xi.probs[v] + g * p_lm.probs[v]);
            }
            Ok(GateOutcome {
                dist: Distribution::from_weights(weights)?,
                gate: gate_sum / p_xi.len() as f64,
            })
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct MaskOutcome {
    pub dist: Distribution,
    /// True when the mask zeroed everything and the input came back
    /// unfiltered.
    pub fell_back: bool,
}

/// Filters a distribution to the coordinates an incidence vector marks,
/// renormalizing the survivors. An all-zero intersection falls back to the
/// unfiltered input rather than emitting a zero vector, and says so.
pub fn mask_filter(dist: &Distribution, mask: &crate::sparse::IncidenceVector) -> Result<MaskOutcome> {
    if dist.len() != mask.len() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: mask.len(),
        });
    }
    let weights: Vec<f64> = dist
        .probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if mask.get(i) { p } else { 0.0 })
        .collect();
    if weights.iter().sum::<f64>() > 0.0 {
        Ok(MaskOutcome {
            dist: Distribution::from_weights(weights)?,
            fell_back: false,
        })
    } else {
        Ok(MaskOutcome {
            dist: dist.clone(),
            fell_back: true,
        })
    }
}

/// Attention-weighted sum: each vector is weighted by its dot product with
/// the topic vector, `xi = sum_d (d . t) * d`.
pub fn attention_sum(vectors: &[Vec<f32>], topic: &[f32]) -> Result<Vec<f32>> {
    if vectors.is_empty() {
        return Err(Error::Empty("vectors"));
    }
    let dim = topic.len();
    let mut out = vec![0.0f64; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let w: f64 = v
            .iter()
            .zip(topic)
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum();
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * f64::from(*x);
        }
    }
    Ok(out.into_iter().map(|x| x as f32).collect())
}

/// Early fusion: splice retrieved text blocks ahead of the query, separated
/// by [`DOC_SEP`]. With no blocks the query passes through untouched.
pub fn prime(query: &[String], blocks: &[Vec<String>]) -> Vec<String> {
    let mut out = Vec::new();
    for block in blocks {
        out.extend(block.iter().cloned());
        out.push(DOC_SEP.to_string());
    }
    out.extend(query.iter().cloned());
    out
}

/// Key-aware early fusion: each block arrives as `key [KV] value`, blocks
/// separated by [`DOC_SEP`], query last.
pub fn prime_key_aware(query: &[String], pairs: &[(Vec<String>, Vec<String>)]) -> Vec<String> {
    let mut out = Vec::new();
    for (key, value) in pairs {
        out.extend(key.iter().cloned());
        out.push(KV_SEP.to_string());
        out.extend(value.iter().cloned());
        out.push(DOC_SEP.to_string());
    }
    out.extend(query.iter().cloned());
    out
}
