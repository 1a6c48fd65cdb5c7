//! Sparse retrieval: an inverted index with BM25 ranking, TF-IDF term
//! vectors, term-incidence masks, and the tagged-claim query condenser used
//! for fact checking.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::backbone::Vocabulary;
use crate::dense::{read_header, read_u32, read_u64, write_header, SPARSE_KIND};
use crate::error::{Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term-at-a-time inverted index over tokenized documents.
///
/// Documents keep their build order as internal indexes `0..n`; external
/// string ids map both ways. Posting lists are sorted by document, term
/// iteration is lexicographic, so every ranking here is deterministic.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    id_to_idx: HashMap<String, u32>,
    total_length: u64,
}

impl InvertedIndex {
    pub fn build(docs: &[(String, Vec<String>)]) -> Result<InvertedIndex> {
        if docs.is_empty() {
            return Err(Error::Empty("documents"));
        }
        let mut index = InvertedIndex {
            postings: BTreeMap::new(),
            doc_ids: Vec::new(),
            doc_lengths: Vec::new(),
            id_to_idx: HashMap::new(),
            total_length: 0,
        };
        for (id, tokens) in docs {
            let doc = index.doc_ids.len() as u32;
            if index.id_to_idx.insert(id.clone(), doc).is_some() {
                return Err(Error::DuplicateDoc(id.clone()));
            }
            index.doc_ids.push(id.clone());
            index.doc_lengths.push(tokens.len() as u32);
            index.total_length += tokens.len() as u64;
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for token in tokens {
                *counts.entry(token).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                index
                    .postings
                    .entry(term.to_owned())
                    .or_default()
                    .push(Posting { doc, tf });
            }
        }
        Ok(index)
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.total_length as f64 / self.n_docs() as f64
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_index(&self, id: &str) -> Option<u32> {
        self.id_to_idx.get(id).copied()
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    /// Number of documents containing `term`.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Occurrences of `term` in document `doc`.
    pub fn tf(&self, term: &str, doc: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by_key(&doc, |p| p.doc)
                    .ok()
                    .map(|i| list[i].tf)
            })
            .unwrap_or(0)
    }

    fn check_doc(&self, doc: u32) -> Result<()> {
        if (doc as usize) < self.n_docs() {
            Ok(())
        } else {
            Err(Error::UnknownDoc(doc.to_string()))
        }
    }

    /// BM25 with `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, summed
    /// over the query's distinct terms.
    pub fn bm25(&self, query: &[String], doc: u32, k1: f64, b: f64) -> Result<f64> {
        self.check_doc(doc)?;
        let n = self.n_docs() as f64;
        let dl = f64::from(self.doc_length(doc));
        let mut seen: Vec<&str> = Vec::new();
        let mut score = 0.0;
        for term in query {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            let tf = f64::from(self.tf(term, doc));
            if tf == 0.0 {
                continue;
            }
            let df = self.df(term) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl()));
        }
        Ok(score)
    }

    /// BM25-ranked lookup over the union of the query terms' posting lists.
    /// Scores are positive for every candidate, so the result is non-empty
    /// exactly when some query term occurs in the collection. Ties break
    /// toward the earlier document.
    pub fn lookup(&self, query: &[String], top: usize) -> Vec<(u32, f64)> {
        let mut seen: Vec<&str> = Vec::new();
        let mut candidates: Vec<u32> = Vec::new();
        for term in query {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            if let Some(list) = self.postings.get(term) {
                for p in list {
                    if !candidates.contains(&p.doc) {
                        candidates.push(p.doc);
                    }
                }
            }
        }
        let mut ranked: Vec<(u32, f64)> = candidates
            .into_iter()
            .map(|doc| {
                let score = self
                    .bm25(query, doc, DEFAULT_K1, DEFAULT_B)
                    .expect("candidate docs exist");
                (doc, score)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(top);
        ranked
    }

    /// True when at least one document contains every term in `terms`.
    fn has_conjunctive_match(&self, terms: &[String]) -> bool {
        let mut lists: Vec<&Vec<Posting>> = Vec::with_capacity(terms.len());
        for term in terms {
            match self.postings.get(term) {
                Some(list) => lists.push(list),
                None => return false,
            }
        }
        lists.sort_by_key(|l| l.len());
        let (first, rest) = match lists.split_first() {
            Some(split) => split,
            None => return false,
        };
        'docs: for p in first.iter() {
            for list in rest {
                if list.binary_search_by_key(&p.doc, |q| q.doc).is_err() {
                    continue 'docs;
                }
            }
            return true;
        }
        false
    }

    /// Every document containing all of `terms`, ascending. Empty `terms`
    /// matches nothing.
    pub fn docs_containing_all(&self, terms: &[String]) -> Vec<u32> {
        if terms.is_empty() {
            return Vec::new();
        }
        let mut lists: Vec<&Vec<Posting>> = Vec::with_capacity(terms.len());
        for term in terms {
            match self.postings.get(term) {
                Some(list) => lists.push(list),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let (first, rest) = lists.split_first().expect("terms is non-empty");
        let mut out = Vec::new();
        'docs: for p in first.iter() {
            for list in rest {
                if list.binary_search_by_key(&p.doc, |q| q.doc).is_err() {
                    continue 'docs;
                }
            }
            out.push(p.doc);
        }
        // Posting lists are doc-ordered, so `out` already is.
        out
    }

    /// Query relaxation: drop trailing terms until some document matches
    /// the whole remaining prefix, then rank that prefix with [`lookup`]
    /// (union semantics). Returns the ranking and how many terms survived;
    /// `(empty, 0)` when no prefix matches at all.
    pub fn relaxed_lookup(&self, query: &[String], top: usize) -> (Vec<(u32, f64)>, usize) {
        for len in (1..=query.len()).rev() {
            if self.has_conjunctive_match(&query[..len]) {
                return (self.lookup(&query[..len], top), len);
            }
        }
        (Vec::new(), 0)
    }

    /// TF-IDF vector of a token sequence against this collection:
    /// `tf * ln((N + 1) / (df + 1))`. Terms occurring in every document get
    /// weight exactly zero and are dropped.
    pub fn tfidf(&self, tokens: &[String]) -> TermVector {
        let n = self.n_docs() as f64;
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for token in tokens {
            *counts.entry(token).or_insert(0) += 1;
        }
        let mut weights = BTreeMap::new();
        for (term, tf) in counts {
            let idf = ((n + 1.0) / (self.df(term) as f64 + 1.0)).ln();
            let w = f64::from(tf) * idf;
            if w != 0.0 {
                weights.insert(term.to_owned(), w);
            }
        }
        TermVector { weights }
    }

    /// Raw term-frequency vector of one stored document.
    pub fn doc_term_vector(&self, doc: u32) -> Result<TermVector> {
        self.check_doc(doc)?;
        let mut weights = BTreeMap::new();
        for (term, list) in &self.postings {
            if let Ok(i) = list.binary_search_by_key(&doc, |p| p.doc) {
                weights.insert(term.clone(), f64::from(list[i].tf));
            }
        }
        Ok(TermVector { weights })
    }

    /// Marks each vocabulary token that occurs in any of the listed
    /// documents. The bit vector is indexed by vocabulary id.
    pub fn incidence(&self, docs: &[u32], vocab: &Vocabulary) -> Result<IncidenceVector> {
        for &doc in docs {
            self.check_doc(doc)?;
        }
        let bits = (0..vocab.len() as u32)
            .map(|id| {
                let token = vocab.token(id);
                docs.iter().any(|&doc| self.tf(token, doc) > 0)
            })
            .collect();
        Ok(IncidenceVector { bits })
    }

    /// Writes the index into the shared container format under the sparse
    /// kind tag.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        write_header(&mut out, SPARSE_KIND)?;
        out.write_all(&(self.n_docs() as u64).to_le_bytes())?;
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lengths) {
            write_bytes(&mut out, id.as_bytes())?;
            out.write_all(&len.to_le_bytes())?;
        }
        out.write_all(&(self.postings.len() as u64).to_le_bytes())?;
        for (term, list) in &self.postings {
            write_bytes(&mut out, term.as_bytes())?;
            out.write_all(&(list.len() as u32).to_le_bytes())?;
            for p in list {
                out.write_all(&p.doc.to_le_bytes())?;
                out.write_all(&p.tf.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<InvertedIndex> {
        let mut file = BufReader::new(File::open(path)?);
        let kind = read_header(&mut file)?;
        if kind != SPARSE_KIND {
            return Err(Error::BadIndexFile(
                "dense index file, expected sparse".into(),
            ));
        }
        let n_docs = read_u64(&mut file)? as usize;
        if n_docs == 0 {
            return Err(Error::BadIndexFile("empty index".into()));
        }
        let mut index = InvertedIndex {
            postings: BTreeMap::new(),
            doc_ids: Vec::with_capacity(n_docs),
            doc_lengths: Vec::with_capacity(n_docs),
            id_to_idx: HashMap::new(),
            total_length: 0,
        };
        for i in 0..n_docs {
            let id = read_string(&mut file)?;
            let len = read_u32(&mut file)?;
            if index.id_to_idx.insert(id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateDoc(id));
            }
            index.doc_ids.push(id);
            index.doc_lengths.push(len);
            index.total_length += u64::from(len);
        }
        let n_terms = read_u64(&mut file)? as usize;
        for _ in 0..n_terms {
            let term = read_string(&mut file)?;
            let n_postings = read_u32(&mut file)? as usize;
            let mut list = Vec::with_capacity(n_postings);
            for _ in 0..n_postings {
                let doc = read_u32(&mut file)?;
                let tf = read_u32(&mut file)?;
                if doc as usize >= n_docs {
                    return Err(Error::BadIndexFile(format!(
                        "posting references doc {doc} of {n_docs}"
                    )));
                }
                list.push(Posting { doc, tf });
            }
            index.postings.insert(term, list);
        }
        Ok(index)
    }
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::BadIndexFile(e.to_string()))
}

/// Sparse non-negative term weights, sorted by term.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TermVector {
    weights: BTreeMap<String, f64>,
}

impl TermVector {
    /// Term-frequency vector of a token sequence (weight = occurrence
    /// count).
    pub fn from_counts(tokens: &[String]) -> TermVector {
        let mut weights = BTreeMap::new();
        for token in tokens {
            *weights.entry(token.clone()).or_insert(0.0) += 1.0;
        }
        TermVector { weights }
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Term-wise maximum, the union operation for query construction.
    pub fn union_max(&self, other: &TermVector) -> TermVector {
        let mut weights = self.weights.clone();
        for (term, &w) in &other.weights {
            let slot = weights.entry(term.clone()).or_insert(0.0);
            if w > *slot {
                *slot = w;
            }
        }
        TermVector { weights }
    }

    /// Projects onto a vocabulary as a dense vector; terms outside the
    /// vocabulary are dropped.
    pub fn to_dense(&self, vocab: &Vocabulary) -> Vec<f32> {
        let mut out = vec![0.0f32; vocab.len()];
        for (term, &w) in &self.weights {
            if let Some(id) = vocab.get(term) {
                out[id as usize] = w as f32;
            }
        }
        out
    }
}

/// A 0/1 mask over vocabulary coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceVector {
    bits: Vec<bool>,
}

impl IncidenceVector {
    pub fn from_bits(bits: Vec<bool>) -> IncidenceVector {
        IncidenceVector { bits }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn or(&self, other: &IncidenceVector) -> Result<IncidenceVector> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(IncidenceVector {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        })
    }
}

const CONTENT_TAGS: [&str; 5] = ["N", "NOUN", "V", "VERB", "ADJ"];

/// Condenses a tagged claim into a retrieval query: keep the tokens tagged
/// as nouns, verbs or adjectives (tags compared case-insensitively against
/// N/NOUN/V/VERB/ADJ), in claim order, then append the tokens of each
/// linked entity. Duplicates are kept; they carry weight downstream.
pub fn fakta_query(
    claim: &[String],
    tags: &[String],
    entities: &[String],
) -> Result<Vec<String>> {
    if claim.len() != tags.len() {
        return Err(Error::MisalignedTags {
            tokens: claim.len(),
            tags: tags.len(),
        });
    }
    let mut query: Vec<String> = claim
        .iter()
        .zip(tags)
        .filter(|(_, tag)| CONTENT_TAGS.contains(&tag.to_uppercase().as_str()))
        .map(|(token, _)| token.clone())
        .collect();
    for entity in entities {
        query.extend(crate::data::tokenize(entity));
    }
    Ok(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn docs(raw: &[(&str, &str)]) -> Vec<(String, Vec<String>)> {
        raw.iter()
            .map(|(id, text)| (id.to_string(), crate::data::tokenize(text)))
            .collect()
    }

    fn toy() -> InvertedIndex {
        InvertedIndex::build(&docs(&[("d0", "a b a"), ("d1", "b c")])).unwrap()
    }

    #[test]
    fn bm25_matches_hand_arithmetic() {
        let index = toy();
        // N = 2, avgdl = 2.5; query [a] on d0: df = 1, tf = 2, dl = 3.
        let idf = (1.0f64 + (2.0 - 1.0 + 0.5) / 1.5).ln();
        let tf_part = 2.0 * (1.2 + 1.0) / (2.0 + 1.2 * (1.0 - 0.75 + 0.75 * 3.0 / 2.5));
        let expect = idf * tf_part;
        let got = index
            .bm25(&["a".to_string()], 0, DEFAULT_K1, DEFAULT_B)
            .unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        assert!(index.bm25(&["a".to_string()], 9, DEFAULT_K1, DEFAULT_B).is_err());
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let index = toy();
        let once = index.bm25(&["a".to_string()], 0, DEFAULT_K1, DEFAULT_B).unwrap();
        let twice = index
            .bm25(&["a".to_string(), "a".to_string()], 0, DEFAULT_K1, DEFAULT_B)
            .unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn rarer_terms_dominate_ranking() {
        let index = InvertedIndex::build(&docs(&[
            ("common", "x y"),
            ("rare", "x q"),
            ("other", "x z"),
        ]))
        .unwrap();
        let ranked = index.lookup(&["x".to_string(), "q".to_string()], 3);
        assert_eq!(ranked[0].0, index.doc_index("rare").unwrap());
        assert_eq!(ranked.len(), 3); // union semantics keep the x-only docs
    }

    #[test]
    fn lookup_ignores_unknown_terms_and_breaks_ties_by_doc() {
        let index = InvertedIndex::build(&docs(&[("d0", "a b"), ("d1", "a b")])).unwrap();
        let ranked = index.lookup(&["a".to_string(), "zzz".to_string()], 10);
        assert_eq!(ranked.len(), 2);
        assert!(ranked[0].1 == ranked[1].1);
        assert_eq!(ranked[0].0, 0);
        assert!(index.lookup(&["zzz".to_string()], 10).is_empty());
    }

    #[test]
    fn relaxation_drops_trailing_terms_until_a_doc_matches_all() {
        let index = InvertedIndex::build(&docs(&[
            ("d0", "alpha beta gamma"),
            ("d1", "alpha delta"),
        ]))
        .unwrap();
        // "alpha beta" co-occur in d0, so nothing is dropped even though
        // the last term is unknown.
        let query = vec!["alpha".into(), "beta".into(), "zzz".into()];
        let (ranked, used) = index.relaxed_lookup(&query, 10);
        assert_eq!(used, 2);
        assert_eq!(ranked, index.lookup(&query[..2], 10));
        // "beta delta" never co-occur: relax down to "beta" alone.
        let query = vec!["beta".into(), "delta".into()];
        let (ranked, used) = index.relaxed_lookup(&query, 10);
        assert_eq!(used, 1);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, 0);
        // Nothing known at all.
        let (ranked, used) = index.relaxed_lookup(&["q1".into(), "q2".into()], 10);
        assert!(ranked.is_empty());
        assert_eq!(used, 0);
    }

    #[test]
    fn tfidf_drops_terms_present_everywhere() {
        let index = toy(); // "b" occurs in both docs
        let v = index.tfidf(&crate::data::tokenize("a b b zzz"));
        assert_eq!(v.weight("b"), 0.0);
        assert!((v.weight("a") - (3.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!((v.weight("zzz") - 3.0f64.ln()).abs() < 1e-12); // df = 0
        assert!(!v.is_empty());
    }

    #[test]
    fn doc_term_vector_recovers_counts() {
        let index = toy();
        let v = index.doc_term_vector(0).unwrap();
        assert_eq!(v.weight("a"), 2.0);
        assert_eq!(v.weight("b"), 1.0);
        assert_eq!(v.weight("c"), 0.0);
    }

    #[test]
    fn union_max_and_to_dense() {
        let a = TermVector::from_counts(&crate::data::tokenize("x x y"));
        let b = TermVector::from_counts(&crate::data::tokenize("y y z"));
        let u = a.union_max(&b);
        assert_eq!(u.weight("x"), 2.0);
        assert_eq!(u.weight("y"), 2.0);
        assert_eq!(u.weight("z"), 1.0);
        let vocab = Vocabulary::from_corpus(&[crate::data::tokenize("x z")]);
        let dense = u.to_dense(&vocab);
        assert_eq!(dense.len(), vocab.len());
        assert_eq!(dense[vocab.id("x") as usize], 2.0);
        assert_eq!(dense[vocab.id("z") as usize], 1.0);
    }

    #[test]
    fn incidence_marks_union_of_doc_tokens() {
        let index = toy();
        let vocab = Vocabulary::from_corpus(&[crate::data::tokenize("a b c")]);
        let m0 = index.incidence(&[0], &vocab).unwrap();
        assert!(m0.get(vocab.id("a") as usize));
        assert!(!m0.get(vocab.id("c") as usize));
        assert!(!m0.get(Vocabulary::UNK_ID as usize));
        assert!(index.incidence(&[7], &vocab).is_err());

        // Union property on random doc subsets.
        let corpus = docs(&[
            ("r0", "a b c"),
            ("r1", "c d"),
            ("r2", "e a"),
            ("r3", "f"),
        ]);
        let big = InvertedIndex::build(&corpus).unwrap();
        let vocab = Vocabulary::from_corpus(&[crate::data::tokenize("a b c d e f")]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let d1: Vec<u32> = (0..4).filter(|_| rng.gen_bool(0.5)).collect();
            let d2: Vec<u32> = (0..4).filter(|_| rng.gen_bool(0.5)).collect();
            let both: Vec<u32> = d1.iter().chain(&d2).copied().collect();
            let joint = big.incidence(&both, &vocab).unwrap();
            let split = big
                .incidence(&d1, &vocab)
                .unwrap()
                .or(&big.incidence(&d2, &vocab).unwrap())
                .unwrap();
            assert_eq!(joint, split);
        }
    }

    #[test]
    fn fakta_query_keeps_content_words_then_entities() {
        let claim = crate::data::tokenize("the big cat sat quietly");
        let tags: Vec<String> = ["DET", "ADJ", "N", "V", "ADV"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let entities = vec!["Garfield the cat".to_string()];
        let q = fakta_query(&claim, &tags, &entities).unwrap();
        assert_eq!(q, ["big", "cat", "sat", "Garfield", "the", "cat"]);

        let lower_tags: Vec<String> = tags.iter().map(|t| t.to_lowercase()).collect();
        assert_eq!(fakta_query(&claim, &lower_tags, &entities).unwrap(), q);

        assert!(matches!(
            fakta_query(&claim, &tags[..3], &entities),
            Err(Error::MisalignedTags { tokens: 5, tags: 3 })
        ));
    }

    #[test]
    fn duplicate_doc_ids_are_rejected() {
        let result = InvertedIndex::build(&docs(&[("d", "a"), ("d", "b")]));
        assert!(matches!(result, Err(Error::DuplicateDoc(_))));
        assert!(InvertedIndex::build(&[]).is_err());
    }

    #[test]
    fn container_round_trips_and_rejects_dense_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sparse.artk");
        let index = toy();
        index.save(&path).unwrap();
        let loaded = InvertedIndex::load(&path).unwrap();
        assert_eq!(loaded.n_docs(), 2);
        assert_eq!(loaded.doc_id(1), "d1");
        assert_eq!(loaded.tf("a", 0), 2);
        assert_eq!(loaded.avgdl(), index.avgdl());

        let dense_path = dir.path().join("dense.artk");
        crate::dense::DenseIndex::build(vec![(vec![1.0f32], "x".to_string())], crate::dense::Metric::L2)
            .unwrap()
            .save(&dense_path)
            .unwrap();
        assert!(matches!(
            InvertedIndex::load(&dense_path),
            Err(Error::BadIndexFile(_))
        ));
        assert!(matches!(
            crate::dense::DenseIndex::<String>::load(&path),
            Err(Error::BadIndexFile(_))
        ));
    }
}
