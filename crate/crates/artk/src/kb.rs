//! Knowledge bases: where retrieved values actually live.
//!
//! Three shapes cover the systems in this crate: a train-time memorized
//! store mapping prefix keys to next tokens, a bounded FIFO cache filled
//! while decoding, and a symbolic triple store with pattern matching and
//! local-subgraph expansion.

use std::collections::{BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::PrefixEmbedder;
use crate::dense::{DenseIndex, Metric};
use crate::error::{Error, Result};

/// Every next-token event of a training corpus, embedded and indexed: for
/// each sentence and each split point `i >= 1`, the key is the embedded
/// prefix and the payload is the token that followed.
#[derive(Debug)]
pub struct MemorizedKb {
    embedder: PrefixEmbedder,
    index: DenseIndex<String>,
}

impl MemorizedKb {
    /// Memorizes under L2, the usual choice for prefix keys.
    pub fn build(corpus: &[Vec<String>], embedder: PrefixEmbedder) -> Result<MemorizedKb> {
        MemorizedKb::build_with_metric(corpus, embedder, Metric::L2)
    }

    pub fn build_with_metric(
        corpus: &[Vec<String>],
        embedder: PrefixEmbedder,
        metric: Metric,
    ) -> Result<MemorizedKb> {
        let mut entries = Vec::new();
        for sentence in corpus {
            for i in 1..sentence.len() {
                let key = embedder.embed_prefix(&sentence[..i])?;
                entries.push((key, sentence[i].clone()));
            }
        }
        if entries.is_empty() {
            return Err(Error::Empty("memorized entries"));
        }
        Ok(MemorizedKb {
            embedder,
            index: DenseIndex::build(entries, metric)?,
        })
    }

    /// Number of memorized (prefix, next token) pairs: the sum over
    /// sentences of `len - 1`.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn embedder(&self) -> &PrefixEmbedder {
        &self.embedder
    }

    pub fn index(&self) -> &DenseIndex<String> {
        &self.index
    }

    pub fn index_mut(&mut self) -> &mut DenseIndex<String> {
        &mut self.index
    }
}

/// One remembered decoding step: the key at that position and the token
/// that followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub key: Vec<f32>,
    pub token: String,
}

impl CacheEntry {
    pub fn new(key: Vec<f32>, token: impl Into<String>) -> CacheEntry {
        CacheEntry {
            key,
            token: token.into(),
        }
    }
}

/// Bounded FIFO memory of recent decoding steps. When full, the oldest
/// entry leaves first.
#[derive(Debug, Clone)]
pub struct DynamicCache {
    entries: VecDeque<CacheEntry>,
    capacity: usize,
}

impl DynamicCache {
    pub fn new(capacity: usize) -> Result<DynamicCache> {
        if capacity == 0 {
            return Err(Error::OutOfRange {
                what: "cache capacity",
                value: 0.0,
            });
        }
        Ok(DynamicCache {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    /// Remembers one step, evicting the oldest entry when at capacity.
    /// Keys are expected to share one dimension; mixed dimensions surface
    /// as errors at scoring time.
    pub fn push(&mut self, key: Vec<f32>, token: impl Into<String>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(CacheEntry {
            key,
            token: token.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Entries newest first.
    pub fn iter(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.iter().rev()
    }
}

/// A directed labelled edge: `parent --relation--> entity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub parent: String,
    pub relation: String,
    pub entity: String,
}

impl Triple {
    pub fn new(
        parent: impl Into<String>,
        relation: impl Into<String>,
        entity: impl Into<String>,
    ) -> Triple {
        Triple {
            parent: parent.into(),
            relation: relation.into(),
            entity: entity.into(),
        }
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.parent, self.relation, self.entity)
    }
}

/// A triple query with at least one bound slot; a fully unbound pattern is
/// rejected at construction, so a match can never degenerate into a full
/// scan by accident.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriplePattern {
    parent: Option<String>,
    relation: Option<String>,
    entity: Option<String>,
}

impl TriplePattern {
    pub fn new(
        parent: Option<String>,
        relation: Option<String>,
        entity: Option<String>,
    ) -> Result<TriplePattern> {
        if parent.is_none() && relation.is_none() && entity.is_none() {
            return Err(Error::UnboundPattern);
        }
        Ok(TriplePattern {
            parent,
            relation,
            entity,
        })
    }

    /// The `(parent, relation, ?)` pattern used to follow an edge forward.
    pub fn outgoing(parent: impl Into<String>, relation: impl Into<String>) -> TriplePattern {
        TriplePattern {
            parent: Some(parent.into()),
            relation: Some(relation.into()),
            entity: None,
        }
    }

    pub fn parent(&self) -> Option<&str> {
        self.parent.as_deref()
    }

    pub fn relation(&self) -> Option<&str> {
        self.relation.as_deref()
    }

    pub fn entity(&self) -> Option<&str> {
        self.entity.as_deref()
    }

    pub fn matches(&self, t: &Triple) -> bool {
        self.parent.as_deref().is_none_or(|p| p == t.parent)
            && self.relation.as_deref().is_none_or(|r| r == t.relation)
            && self.entity.as_deref().is_none_or(|e| e == t.entity)
    }
}

fn match_into<'a>(triples: impl Iterator<Item = &'a Triple>, pattern: &TriplePattern) -> Vec<Triple> {
    triples.filter(|t| pattern.matches(t)).cloned().collect()
}

/// A deduplicated set of triples with the entity and relation inventories
/// kept alongside. Iteration order is the triples' own ordering, so every
/// match result is sorted and stable.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    entities: BTreeSet<String>,
    relations: BTreeSet<String>,
}

impl TripleStore {
    pub fn new() -> TripleStore {
        TripleStore::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> TripleStore {
        let mut store = TripleStore::new();
        for t in triples {
            store.insert(t);
        }
        store
    }

    /// Loads `parent<TAB>relation<TAB>entity` lines; `#` comments and blank
    /// lines are skipped.
    pub fn from_tsv(path: &Path) -> Result<TripleStore> {
        TripleStore::from_tsv_reader(BufReader::new(File::open(path)?), &path.display().to_string())
    }

    pub fn from_tsv_reader<R: BufRead>(reader: R, origin: &str) -> Result<TripleStore> {
        let mut store = TripleStore::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(Error::BadInput(format!(
                    "{origin}:{}: expected 3 tab-separated fields",
                    lineno + 1
                )));
            }
            store.insert(Triple::new(
                fields[0].trim(),
                fields[1].trim(),
                fields[2].trim(),
            ));
        }
        Ok(store)
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        self.entities.insert(t.parent.clone());
        self.entities.insert(t.entity.clone());
        self.relations.insert(t.relation.clone());
        self.triples.insert(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn contains_entity(&self, entity: &str) -> bool {
        self.entities.contains(entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(String::as_str)
    }

    /// All triples matching the pattern, sorted.
    pub fn kg_match(&self, pattern: &TriplePattern) -> Vec<Triple> {
        match_into(self.triples.iter(), pattern)
    }

    /// Triples touching `entity` on either side, sorted.
    pub fn incident(&self, entity: &str) -> Vec<Triple> {
        self.triples
            .iter()
            .filter(|t| t.parent == entity || t.entity == entity)
            .cloned()
            .collect()
    }
}

/// The slice of a [`TripleStore`] pulled in so far: grows monotonically as
/// entities are expanded, and answers the same pattern matches.
#[derive(Debug, Clone, Default)]
pub struct LocalGraph {
    triples: BTreeSet<Triple>,
}

impl LocalGraph {
    pub fn new() -> LocalGraph {
        LocalGraph::default()
    }

    /// Copies every edge leaving `entity` from the store into this graph;
    /// returns how many were new. Expanding the same entity again is a
    /// no-op, not an error.
    pub fn expand(&mut self, store: &TripleStore, entity: &str) -> Result<usize> {
        if !store.contains_entity(entity) {
            return Err(Error::UnknownEntity(entity.to_owned()));
        }
        let mut added = 0;
        for t in store.iter().filter(|t| t.parent == entity) {
            if self.triples.insert(t.clone()) {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn kg_match(&self, pattern: &TriplePattern) -> Vec<Triple> {
        match_into(self.triples.iter(), pattern)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| crate::data::tokenize(l)).collect()
    }

    #[test]
    fn memorized_kb_stores_one_entry_per_continuation() {
        let embedder = PrefixEmbedder::new(16, 0.7, 1).unwrap();
        let kb = MemorizedKb::build(&corpus(&["a b c", "b c d"]), embedder).unwrap();
        assert_eq!(kb.len(), 4);
        assert_eq!(kb.index().metric(), Metric::L2);

        // Querying with a stored prefix finds its continuation at distance
        // zero.
        let key = kb.embedder().embed_prefix(&corpus(&["a b"])[0]).unwrap();
        let hit = &kb.index().knn(&key, 1).unwrap().hits[0];
        assert_eq!(hit.payload, "c");
        assert_eq!(hit.score, 0.0);
    }

    #[test]
    fn memorized_kb_rejects_corpora_with_no_continuations() {
        let embedder = PrefixEmbedder::new(16, 0.7, 1).unwrap();
        let result = MemorizedKb::build(&corpus(&["a", "b"]), embedder);
        assert!(matches!(result, Err(Error::Empty("memorized entries"))));
    }

    #[test]
    fn cache_evicts_oldest_first() {
        let mut cache = DynamicCache::new(3).unwrap();
        for token in ["a", "b", "c", "d"] {
            cache.push(vec![1.0], token);
        }
        let newest_first: Vec<&str> = cache.iter().map(|e| e.token.as_str()).collect();
        assert_eq!(newest_first, ["d", "c", "b"]);
        assert_eq!(cache.len(), 3);
        cache.clear();
        assert!(cache.is_empty());
        assert!(DynamicCache::new(0).is_err());
    }

    fn zoo() -> TripleStore {
        TripleStore::from_triples([
            Triple::new("lion", "eats", "zebra"),
            Triple::new("lion", "eats", "gazelle"),
            Triple::new("zebra", "eats", "grass"),
            Triple::new("lion", "lives_in", "savanna"),
        ])
    }

    #[test]
    fn kg_match_requires_a_bound_slot_and_sorts_results() {
        let store = zoo();
        assert!(matches!(
            TriplePattern::new(None, None, None),
            Err(Error::UnboundPattern)
        ));
        let eats = store.kg_match(&TriplePattern::outgoing("lion", "eats"));
        let names: Vec<&str> = eats.iter().map(|t| t.entity.as_str()).collect();
        assert_eq!(names, ["gazelle", "zebra"]);

        let by_object =
            TriplePattern::new(None, None, Some("grass".into())).unwrap();
        assert_eq!(store.kg_match(&by_object).len(), 1);
        assert!(store.contains_entity("grass"));
        assert!(!store.contains_entity("tiger"));
    }

    #[test]
    fn insert_deduplicates() {
        let mut store = zoo();
        assert_eq!(store.len(), 4);
        assert!(!store.insert(Triple::new("lion", "eats", "zebra")));
        assert_eq!(store.len(), 4);
    }

    #[test]
    fn local_graph_expansion_is_idempotent_and_monotone() {
        let store = zoo();
        let mut local = LocalGraph::new();
        assert_eq!(local.expand(&store, "lion").unwrap(), 3);
        assert_eq!(local.expand(&store, "lion").unwrap(), 0);
        assert_eq!(local.len(), 3);
        // grass has no outgoing edges but is a known entity.
        assert_eq!(local.expand(&store, "grass").unwrap(), 0);
        assert!(matches!(
            local.expand(&store, "unicorn"),
            Err(Error::UnknownEntity(_))
        ));
        for t in local.iter() {
            assert!(store.contains(t));
        }
        let matched = local.kg_match(&TriplePattern::outgoing("lion", "eats"));
        assert_eq!(matched.len(), 2);
    }

    #[test]
    fn incident_sees_both_directions() {
        let store = zoo();
        let around_zebra = store.incident("zebra");
        assert_eq!(around_zebra.len(), 2);
    }

    #[test]
    fn tsv_parsing_skips_comments_and_reports_bad_lines() {
        let text = "# food web\nlion\teats\tzebra\n\nzebra\teats\tgrass\n";
        let store = TripleStore::from_tsv_reader(text.as_bytes(), "test.tsv").unwrap();
        assert_eq!(store.len(), 2);

        let bad = "lion\teats\n";
        let err = TripleStore::from_tsv_reader(bad.as_bytes(), "test.tsv").unwrap_err();
        assert!(err.to_string().contains("test.tsv:1"), "{err}");

        let multiword = "marie curie\tborn in\twarsaw\n";
        let store = TripleStore::from_tsv_reader(multiword.as_bytes(), "kg.tsv").unwrap();
        assert!(store.contains_entity("marie curie"));
    }
}
