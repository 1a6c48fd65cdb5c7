//! Dense vector store with exact and partitioned k-nearest-neighbour
//! search, plus a versioned on-disk container.
//!
//! Exact search scans everything; approximate search probes the nearest of
//! sqrt(N) k-means partitions. Both rank by the same score (higher is
//! better): negated squared Euclidean distance for L2, the dot product for
//! inner product and cosine. Ties break toward earlier insertion, so search
//! results are a pure function of (contents, query, parameters).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ordered_float::NotNan;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ARTK";
const VERSION: u16 = 1;
/// File kind tag reserved for sparse indexes; see [`crate::sparse`].
pub(crate) const SPARSE_KIND: u8 = 3;

pub const KMEANS_ITERATIONS: usize = 10;
pub const DEFAULT_PROBES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    L2,
    InnerProduct,
    Cosine,
}

impl Metric {
    fn kind_byte(self) -> u8 {
        match self {
            Metric::L2 => 0,
            Metric::InnerProduct => 1,
            Metric::Cosine => 2,
        }
    }

    fn from_kind_byte(b: u8) -> Result<Metric> {
        match b {
            0 => Ok(Metric::L2),
            1 => Ok(Metric::InnerProduct),
            2 => Ok(Metric::Cosine),
            SPARSE_KIND => Err(Error::BadIndexFile(
                "sparse index file, expected dense".into(),
            )),
            other => Err(Error::BadIndexFile(format!("unknown kind byte {other}"))),
        }
    }

    /// Search score, higher is better. L2 negates the squared Euclidean
    /// distance; the other metrics use the dot product (cosine vectors are
    /// unit length by construction).
    pub fn score(self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::L2 => {
                -a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = f64::from(*x) - f64::from(*y);
                        d * d
                    })
                    .sum::<f64>()
            }
            Metric::InnerProduct | Metric::Cosine => a
                .iter()
                .zip(b)
                .map(|(x, y)| f64::from(*x) * f64::from(*y))
                .sum(),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::InnerProduct => "ip",
            Metric::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        match s {
            "l2" => Ok(Metric::L2),
            "ip" | "inner-product" => Ok(Metric::InnerProduct),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::BadInput(format!("unknown metric: {other}"))),
        }
    }
}

/// One search result: the stored payload, its score under the index metric,
/// and its insertion index.
#[derive(Debug, Clone, Serialize)]
pub struct Hit<P> {
    pub payload: P,
    pub score: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult<P> {
    pub hits: Vec<Hit<P>>,
    /// False when the probe path answered, and misses are possible.
    pub exact: bool,
}

#[derive(Debug, Clone)]
struct Partitions {
    centroids: Vec<f32>, // k * dim, row-major
    lists: Vec<Vec<u32>>,
    probes: usize,
}

/// An append-only collection of `(vector, payload)` rows under one metric.
#[derive(Debug, Clone)]
pub struct DenseIndex<P> {
    dim: usize,
    metric: Metric,
    vectors: Vec<f32>, // count * dim, row-major
    payloads: Vec<P>,
    partitions: Option<Partitions>,
}

impl<P> DenseIndex<P> {
    pub fn build(entries: Vec<(Vec<f32>, P)>, metric: Metric) -> Result<DenseIndex<P>> {
        let mut entries = entries.into_iter();
        let (first_vec, first_payload) = entries.next().ok_or(Error::Empty("entries"))?;
        let mut index = DenseIndex {
            dim: first_vec.len(),
            metric,
            vectors: Vec::new(),
            payloads: Vec::new(),
            partitions: None,
        };
        index.append(first_vec, first_payload)?;
        for (vector, payload) in entries {
            index.append(vector, payload)?;
        }
        Ok(index)
    }

    /// Adds one row. Cosine indexes store the unit-normalized vector. Any
    /// existing partitioning is dropped, since it no longer covers the
    /// collection.
    pub fn append(&mut self, mut vector: Vec<f32>, payload: P) -> Result<()> {
        if vector.len() != self.dim || self.dim == 0 {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadInput("non-finite vector component".into()));
        }
        if self.metric == Metric::Cosine {
            let norm = vector
                .iter()
                .map(|x| f64::from(*x) * f64::from(*x))
                .sum::<f64>()
                .sqrt();
            if norm < 1e-12 {
                return Err(Error::ZeroVector);
            }
            for x in &mut vector {
                *x = (f64::from(*x) / norm) as f32;
            }
        }
        self.vectors.extend_from_slice(&vector);
        self.payloads.push(payload);
        self.partitions = None;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn vector(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn payload(&self, index: usize) -> &P {
        &self.payloads[index]
    }

    pub fn is_partitioned(&self) -> bool {
        self.partitions.is_some()
    }

    fn check_key(&self, key: &[f32]) -> Result<()> {
        if key.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: key.len(),
            });
        }
        if key.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadInput("non-finite key component".into()));
        }
        Ok(())
    }

    /// Builds sqrt(N) k-means partitions (10 iterations, seeded) and
    /// answers subsequent [`knn`](Self::knn) calls by scanning only the
    /// `probes` nearest partitions.
    pub fn partition(&mut self, seed: u64, probes: usize) -> Result<()> {
        if probes == 0 {
            return Err(Error::OutOfRange {
                what: "probe count",
                value: 0.0,
            });
        }
        let n = self.len();
        let k = (n as f64).sqrt().ceil() as usize;
        let k = k.clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = rand::seq::index::sample(&mut rng, n, k).into_vec();
        picks.sort_unstable();
        let mut centroids: Vec<f32> = Vec::with_capacity(k * self.dim);
        for &p in &picks {
            centroids.extend_from_slice(self.vector(p));
        }

        let mut assignment = vec![0usize; n];
        for _ in 0..KMEANS_ITERATIONS {
            for (i, slot) in assignment.iter_mut().enumerate() {
                *slot = nearest_centroid(&centroids, self.dim, self.vector(i));
            }
            let mut sums = vec![0.0f64; k * self.dim];
            let mut sizes = vec![0usize; k];
            for (i, &c) in assignment.iter().enumerate() {
                sizes[c] += 1;
                for (s, x) in sums[c * self.dim..(c + 1) * self.dim]
                    .iter_mut()
                    .zip(self.vector(i))
                {
                    *s += f64::from(*x);
                }
            }
            for c in 0..k {
                if sizes[c] == 0 {
                    continue; // keep the stale centroid rather than divide by zero
                }
                for (dst, s) in centroids[c * self.dim..(c + 1) * self.dim]
                    .iter_mut()
                    .zip(&sums[c * self.dim..(c + 1) * self.dim])
                {
                    *dst = (s / sizes[c] as f64) as f32;
                }
            }
        }

        let mut lists = vec![Vec::new(); k];
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = nearest_centroid(&centroids, self.dim, self.vector(i));
            lists[*slot].push(i as u32);
        }
        self.partitions = Some(Partitions {
            centroids,
            lists,
            probes: probes.min(k),
        });
        Ok(())
    }
}

impl<P: Clone> DenseIndex<P> {
    /// Top-`count` rows by score. `count` larger than the collection is
    /// clamped. Partitioned indexes answer approximately and say so via
    /// [`SearchResult::exact`].
    pub fn knn(&self, key: &[f32], count: usize) -> Result<SearchResult<P>> {
        self.check_key(key)?;
        if count == 0 {
            return Err(Error::OutOfRange {
                what: "neighbour count",
                value: 0.0,
            });
        }
        match &self.partitions {
            None => {
                let top = top_k_scored(
                    (0..self.len()).map(|i| (i, self.metric.score(self.vector(i), key))),
                    count,
                );
                Ok(self.to_result(top, true))
            }
            Some(parts) => {
                let mut ranked: Vec<(usize, f64)> = parts
                    .centroids
                    .chunks_exact(self.dim)
                    .enumerate()
                    .map(|(c, centroid)| (c, Metric::L2.score(centroid, key)))
                    .collect();
                ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let top = top_k_scored(
                    ranked
                        .iter()
                        .take(parts.probes)
                        .flat_map(|(c, _)| parts.lists[*c].iter())
                        .map(|&i| {
                            let i = i as usize;
                            (i, self.metric.score(self.vector(i), key))
                        }),
                    count,
                );
                Ok(self.to_result(top, false))
            }
        }
    }

    fn to_result(&self, ranked: Vec<(usize, f64)>, exact: bool) -> SearchResult<P> {
        SearchResult {
            hits: ranked
                .into_iter()
                .map(|(index, score)| Hit {
                    payload: self.payloads[index].clone(),
                    score,
                    index,
                })
                .collect(),
            exact,
        }
    }
}

/// Min-heap top-k: keep the best `count` by (score desc, index asc).
fn top_k_scored(
    scored: impl Iterator<Item = (usize, f64)>,
    count: usize,
) -> Vec<(usize, f64)> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut heap: BinaryHeap<Reverse<(NotNan<f64>, Reverse<usize>)>> = BinaryHeap::new();
    for (index, score) in scored {
        let score = NotNan::new(score).expect("scores of finite vectors are finite");
        heap.push(Reverse((score, Reverse(index))));
        if heap.len() > count {
            heap.pop();
        }
    }
    let mut out: Vec<(usize, f64)> = heap
        .into_iter()
        .map(|Reverse((score, Reverse(index)))| (index, score.into_inner()))
        .collect();
    out.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Reference search: score every entry, sort, truncate. Deliberately not
/// routed through [`DenseIndex`] so the two implementations can check each
/// other. Applies the same cosine normalization and the same tie rule
/// (earlier entry first).
pub fn brute_force<P: Clone>(
    entries: &[(Vec<f32>, P)],
    key: &[f32],
    count: usize,
    metric: Metric,
) -> Result<SearchResult<P>> {
    if entries.is_empty() {
        return Err(Error::Empty("entries"));
    }
    let dim = entries[0].0.len();
    if key.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            got: key.len(),
        });
    }
    let mut hits = Vec::with_capacity(entries.len());
    for (index, (vector, payload)) in entries.iter().enumerate() {
        if vector.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: vector.len(),
            });
        }
        let score = if metric == Metric::Cosine {
            let norm = vector
                .iter()
                .map(|x| f64::from(*x) * f64::from(*x))
                .sum::<f64>()
                .sqrt();
            if norm < 1e-12 {
                return Err(Error::ZeroVector);
            }
            let unit: Vec<f32> = vector.iter().map(|x| (f64::from(*x) / norm) as f32).collect();
            metric.score(&unit, key)
        } else {
            metric.score(vector, key)
        };
        hits.push(Hit {
            payload: payload.clone(),
            score,
            index,
        });
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    hits.truncate(count);
    Ok(SearchResult { hits, exact: true })
}

fn nearest_centroid(centroids: &[f32], dim: usize, v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let score = Metric::L2.score(centroid, v);
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    best
}

impl<P: Serialize> DenseIndex<P> {
    /// Writes the container: `ARTK` magic, format version, metric tag,
    /// dimension, row count, packed little-endian vectors, then one
    /// length-prefixed JSON blob per payload. Partitions are not persisted;
    /// they are cheap to rebuild and seed-dependent.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&[self.metric.kind_byte()])?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for x in &self.vectors {
            out.write_all(&x.to_le_bytes())?;
        }
        for payload in &self.payloads {
            let blob = serde_json::to_vec(payload)?;
            out.write_all(&(blob.len() as u32).to_le_bytes())?;
            out.write_all(&blob)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<P: DeserializeOwned> DenseIndex<P> {
    pub fn load(path: &Path) -> Result<DenseIndex<P>> {
        let mut file = BufReader::new(File::open(path)?);
        let metric = Metric::from_kind_byte(read_header(&mut file)?)?;
        let dim = read_u32(&mut file)? as usize;
        let count = read_u64(&mut file)? as usize;
        if dim == 0 || count == 0 {
            return Err(Error::BadIndexFile("empty index".into()));
        }
        let mut vectors = vec![0.0f32; count * dim];
        let mut buf = [0u8; 4];
        for x in &mut vectors {
            file.read_exact(&mut buf)?;
            *x = f32::from_le_bytes(buf);
        }
        let mut payloads = Vec::with_capacity(count);
        for _ in 0..count {
            let len = read_u32(&mut file)? as usize;
            let mut blob = vec![0u8; len];
            file.read_exact(&mut blob)?;
            payloads.push(serde_json::from_slice(&blob)?);
        }
        Ok(DenseIndex {
            dim,
            metric,
            vectors,
            payloads,
            partitions: None,
        })
    }
}

/// Checks magic and version, returns the kind byte.
pub(crate) fn read_header<R: Read>(r: &mut R) -> Result<u8> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadIndexFile("bad magic".into()));
    }
    let mut version = [0u8; 2];
    r.read_exact(&mut version)?;
    let version = u16::from_le_bytes(version);
    if version != VERSION {
        return Err(Error::BadIndexFile(format!(
            "unsupported version {version}"
        )));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    Ok(kind[0])
}

pub(crate) fn write_header<W: Write>(w: &mut W, kind: u8) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_entries() -> Vec<(Vec<f32>, String)> {
        vec![
            (vec![0.0, 0.0], "origin".to_string()),
            (vec![3.0, 4.0], "far".to_string()),
            (vec![1.0, 1.0], "corner".to_string()),
        ]
    }

    #[test]
    fn l2_ranks_by_distance_with_insertion_ties() {
        let index = DenseIndex::build(toy_entries(), Metric::L2).unwrap();
        let result = index.knn(&[1.0, 0.0], 3).unwrap();
        // (0,0) and (1,1) are both at squared distance 1; (0,0) was inserted
        // first.
        let order: Vec<&str> = result.hits.iter().map(|h| h.payload.as_str()).collect();
        assert_eq!(order, ["origin", "corner", "far"]);
        assert_eq!(result.hits[0].score, -1.0);
        assert!(result.exact);
    }

    #[test]
    fn inner_product_ranks_by_dot() {
        let index = DenseIndex::build(toy_entries(), Metric::InnerProduct).unwrap();
        let result = index.knn(&[1.0, 0.0], 1).unwrap();
        assert_eq!(result.hits[0].payload, "far");
        assert_eq!(result.hits[0].score, 3.0);
    }

    #[test]
    fn cosine_normalizes_stored_vectors() {
        let index = DenseIndex::build(toy_entries()[1..].to_vec(), Metric::Cosine).unwrap();
        let result = index.knn(&[0.6, 0.8], 2).unwrap();
        assert_eq!(result.hits[0].payload, "far");
        assert!((result.hits[0].score - 1.0).abs() < 1e-6);
        let zero = DenseIndex::build(vec![(vec![0.0, 0.0], ())], Metric::Cosine);
        assert!(matches!(zero, Err(Error::ZeroVector)));
    }

    #[test]
    fn count_is_clamped_and_zero_rejected() {
        let index = DenseIndex::build(toy_entries(), Metric::L2).unwrap();
        assert_eq!(index.knn(&[0.0, 0.0], 10).unwrap().hits.len(), 3);
        assert!(index.knn(&[0.0, 0.0], 0).is_err());
        assert!(index.knn(&[0.0], 1).is_err());
    }

    #[test]
    fn build_rejects_empty_and_ragged_input() {
        assert!(DenseIndex::<()>::build(vec![], Metric::L2).is_err());
        let ragged = vec![(vec![1.0, 2.0], ()), (vec![1.0], ())];
        assert!(DenseIndex::build(ragged, Metric::L2).is_err());
        let nan = vec![(vec![f32::NAN, 0.0], ())];
        assert!(DenseIndex::build(nan, Metric::L2).is_err());
    }

    fn random_entries(n: usize, dim: usize, seed: u64) -> Vec<(Vec<f32>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (v, i)
            })
            .collect()
    }

    #[test]
    fn exact_knn_agrees_with_brute_force_on_all_metrics() {
        let entries = random_entries(200, 8, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for metric in [Metric::L2, Metric::InnerProduct, Metric::Cosine] {
            let index = DenseIndex::build(entries.clone(), metric).unwrap();
            for _ in 0..20 {
                let key: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let fast = index.knn(&key, 5).unwrap();
                let slow = brute_force(&entries, &key, 5, metric).unwrap();
                let fast_ids: Vec<usize> = fast.hits.iter().map(|h| h.payload).collect();
                let slow_ids: Vec<usize> = slow.hits.iter().map(|h| h.payload).collect();
                assert_eq!(fast_ids, slow_ids, "{metric:?}");
            }
        }
    }

    fn clustered_entries(seed: u64) -> Vec<(Vec<f32>, usize)> {
        // 10 tight clusters of 20 points each.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for c in 0..10 {
            let center: Vec<f32> = (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect();
            for _ in 0..20 {
                let v: Vec<f32> = center
                    .iter()
                    .map(|x| x + rng.gen_range(-0.1..0.1))
                    .collect();
                entries.push((v, c));
            }
        }
        entries
    }

    #[test]
    fn partitioned_search_is_well_formed_and_accurate_on_clusters() {
        let entries = clustered_entries(21);
        let mut index = DenseIndex::build(entries.clone(), Metric::L2).unwrap();
        index.partition(5, DEFAULT_PROBES).unwrap();
        assert!(index.is_partitioned());

        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut hits_at_1 = 0;
        for _ in 0..50 {
            let (v, _) = &entries[rng.gen_range(0..entries.len())];
            let key: Vec<f32> = v.iter().map(|x| x + 0.01).collect();
            let approx = index.knn(&key, 10).unwrap();
            assert!(!approx.exact);
            // Subset-of-database with correct scores, no duplicates.
            let mut seen = std::collections::HashSet::new();
            for hit in &approx.hits {
                assert!(seen.insert(hit.index));
                assert_eq!(hit.score, Metric::L2.score(index.vector(hit.index), &key));
            }
            let exact = brute_force(&entries, &key, 1, Metric::L2).unwrap();
            if approx.hits[0].index == exact.hits[0].index {
                hits_at_1 += 1;
            }
        }
        assert!(hits_at_1 >= 45, "recall@1 {hits_at_1}/50");
    }

    #[test]
    fn partitioning_is_seeded_and_append_invalidates_it() {
        let entries = clustered_entries(3);
        let mut a = DenseIndex::build(entries.clone(), Metric::L2).unwrap();
        let mut b = DenseIndex::build(entries.clone(), Metric::L2).unwrap();
        a.partition(9, 2).unwrap();
        b.partition(9, 2).unwrap();
        let key = vec![0.5f32; 6];
        let ra = a.knn(&key, 7).unwrap();
        let rb = b.knn(&key, 7).unwrap();
        let ids = |r: &SearchResult<usize>| r.hits.iter().map(|h| h.index).collect::<Vec<_>>();
        assert_eq!(ids(&ra), ids(&rb));

        a.append(vec![9.0; 6], 999).unwrap();
        assert!(!a.is_partitioned());
        assert!(a.knn(&key, 1).unwrap().exact);
    }

    #[test]
    fn container_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.artk");
        let index = DenseIndex::build(
            vec![
                (vec![1.0, 2.0], "a".to_string()),
                (vec![-0.5, 0.25], "b".to_string()),
            ],
            Metric::InnerProduct,
        )
        .unwrap();
        index.save(&path).unwrap();
        let loaded: DenseIndex<String> = DenseIndex::load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.metric(), Metric::InnerProduct);
        assert_eq!(loaded.vector(0), index.vector(0));
        assert_eq!(loaded.payload(1), "b");
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let bad_magic = dir.path().join("bad");
        std::fs::write(&bad_magic, b"NOPE").unwrap();
        assert!(matches!(
            DenseIndex::<String>::load(&bad_magic),
            Err(Error::BadIndexFile(_)) | Err(Error::Io(_))
        ));

        let truncated = dir.path().join("trunc");
        let full = dir.path().join("full");
        let index =
            DenseIndex::build(vec![(vec![1.0f32; 4], "x".to_string())], Metric::L2).unwrap();
        index.save(&full).unwrap();
        let bytes = std::fs::read(&full).unwrap();
        std::fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
        assert!(DenseIndex::<String>::load(&truncated).is_err());
    }
}
