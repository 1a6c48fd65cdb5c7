//! Reusable stage implementations for assembling pipelines out of the
//! crate's indexes and backbones.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::backbone::{NGramLm, PrefixEmbedder, Vocabulary};
use crate::dense::DenseIndex;
use crate::error::{Error, Result};
use crate::fusion;
use crate::kb::TripleStore;
use crate::pipeline::{
    Aggregator, Artefact, Candidate, Encoder, Key, KeyKind, Model, Output, Payload, Query,
    Retriever,
};
use crate::sparse::{InvertedIndex, TermVector};

fn wrong_key(got: &Key, expected: KeyKind) -> Error {
    Error::KeyKindMismatch {
        encoder: got.kind().name(),
        retriever: expected.name(),
    }
}

/// Keys a query by its raw term counts. The cheapest sparse encoder, and
/// fully faithful to the query text.
pub struct TermCountEncoder;

impl Encoder for TermCountEncoder {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Terms
    }

    fn encode(&self, query: &Query) -> Result<Key> {
        if query.text.is_empty() {
            return Err(Error::Empty("query text"));
        }
        Ok(Key::Terms(TermVector::from_counts(&query.text)))
    }
}

/// Keys a query by the recency-weighted prefix embedding of its text.
pub struct PrefixKeyEncoder {
    embedder: Arc<PrefixEmbedder>,
}

impl PrefixKeyEncoder {
    pub fn new(embedder: Arc<PrefixEmbedder>) -> Self {
        PrefixKeyEncoder { embedder }
    }
}

impl Encoder for PrefixKeyEncoder {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Dense
    }

    fn encode(&self, query: &Query) -> Result<Key> {
        Ok(Key::Dense(self.embedder.embed_prefix(&query.text)?))
    }
}

/// Keys a query by the order-insensitive bag embedding of its text.
pub struct BagKeyEncoder {
    embedder: Arc<PrefixEmbedder>,
}

impl BagKeyEncoder {
    pub fn new(embedder: Arc<PrefixEmbedder>) -> Self {
        BagKeyEncoder { embedder }
    }
}

impl Encoder for BagKeyEncoder {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Dense
    }

    fn encode(&self, query: &Query) -> Result<Key> {
        Ok(Key::Dense(self.embedder.embed_bag(&query.text)?))
    }
}

/// Keys a slot-filling query as the `(subject, relation, ?)` pattern.
pub struct SlotPatternEncoder;

impl Encoder for SlotPatternEncoder {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Pattern
    }

    fn encode(&self, query: &Query) -> Result<Key> {
        let slot = query
            .structured
            .as_ref()
            .ok_or(Error::Empty("structured query"))?;
        Ok(Key::Pattern(crate::kb::TriplePattern::outgoing(
            slot.subject.clone(),
            slot.relation.clone(),
        )))
    }
}

/// A knowledge base with nothing in it. Declares whatever key kind the
/// assembly needs.
pub struct EmptyRetriever {
    kind: KeyKind,
}

impl EmptyRetriever {
    pub fn new(kind: KeyKind) -> Self {
        EmptyRetriever { kind }
    }
}

impl Retriever for EmptyRetriever {
    fn key_kind(&self) -> KeyKind {
        self.kind
    }

    fn retrieve(&self, _key: &Key) -> Result<Vec<Candidate>> {
        Ok(Vec::new())
    }
}

/// How a dense index's string payloads should be presented as candidates.
#[derive(Debug, Clone, Copy)]
pub enum PayloadKind {
    Token,
    Doc,
    Answer,
}

impl PayloadKind {
    fn wrap(self, value: String) -> Payload {
        match self {
            PayloadKind::Token => Payload::Token(value),
            PayloadKind::Doc => Payload::Doc(value),
            PayloadKind::Answer => Payload::Answer(value),
        }
    }
}

/// k-nearest-neighbour retrieval from a dense index. Each candidate carries
/// the stored vector as its key and the index score.
pub struct DenseKnnRetriever {
    index: Arc<DenseIndex<String>>,
    count: usize,
    payload_kind: PayloadKind,
}

impl DenseKnnRetriever {
    pub fn new(index: Arc<DenseIndex<String>>, count: usize, payload_kind: PayloadKind) -> Self {
        DenseKnnRetriever {
            index,
            count,
            payload_kind,
        }
    }
}

impl Retriever for DenseKnnRetriever {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Dense
    }

    fn retrieve(&self, key: &Key) -> Result<Vec<Candidate>> {
        let Key::Dense(key) = key else {
            return Err(wrong_key(key, KeyKind::Dense));
        };
        let result = self.index.knn(key, self.count)?;
        Ok(result
            .hits
            .into_iter()
            .map(|hit| Candidate {
                key: Key::Dense(self.index.vector(hit.index).to_vec()),
                value: self.payload_kind.wrap(hit.payload),
                score: hit.score,
            })
            .collect())
    }
}

/// BM25-ranked document retrieval from an inverted index.
pub struct SparseLookupRetriever {
    index: Arc<InvertedIndex>,
    top: usize,
}

impl SparseLookupRetriever {
    pub fn new(index: Arc<InvertedIndex>, top: usize) -> Self {
        SparseLookupRetriever { index, top }
    }
}

impl Retriever for SparseLookupRetriever {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Terms
    }

    fn retrieve(&self, key: &Key) -> Result<Vec<Candidate>> {
        let Key::Terms(terms) = key else {
            return Err(wrong_key(key, KeyKind::Terms));
        };
        let query: Vec<String> = terms.terms().map(|(t, _)| t.to_owned()).collect();
        let ranked = self.index.lookup(&query, self.top);
        ranked
            .into_iter()
            .map(|(doc, score)| {
                Ok(Candidate {
                    key: Key::Terms(self.index.doc_term_vector(doc)?),
                    value: Payload::Doc(self.index.doc_id(doc).to_owned()),
                    score,
                })
            })
            .collect()
    }
}

/// Pattern-match retrieval from a triple store.
pub struct TripleMatchRetriever {
    store: Arc<TripleStore>,
}

impl TripleMatchRetriever {
    pub fn new(store: Arc<TripleStore>) -> Self {
        TripleMatchRetriever { store }
    }
}

impl Retriever for TripleMatchRetriever {
    fn key_kind(&self) -> KeyKind {
        KeyKind::Pattern
    }

    fn retrieve(&self, key: &Key) -> Result<Vec<Candidate>> {
        let Key::Pattern(pattern) = key else {
            return Err(wrong_key(key, KeyKind::Pattern));
        };
        Ok(self
            .store
            .kg_match(pattern)
            .into_iter()
            .map(|t| {
                let bound = crate::kb::TriplePattern::new(
                    Some(t.parent.clone()),
                    Some(t.relation.clone()),
                    Some(t.entity.clone()),
                )
                .expect("fully bound pattern");
                Candidate {
                    key: Key::Pattern(bound),
                    value: Payload::Triple(t),
                    score: 1.0,
                }
            })
            .collect())
    }
}

/// Pools token candidates into a next-token distribution with
/// [`fusion::neighbor_softmax`]. Needs at least one candidate; an empty
/// candidate set has no mass to pool.
pub struct NeighborSoftmaxAggregator {
    vocab: Arc<Vocabulary>,
}

impl NeighborSoftmaxAggregator {
    pub fn new(vocab: Arc<Vocabulary>) -> Self {
        NeighborSoftmaxAggregator { vocab }
    }
}

impl Aggregator for NeighborSoftmaxAggregator {
    fn aggregate(&self, candidates: &[Candidate], _key: &Key, _query: &Query) -> Result<Artefact> {
        let scored: Vec<(&str, f64)> = candidates
            .iter()
            .map(|c| match &c.value {
                Payload::Token(t) => Ok((t.as_str(), c.score)),
                other => Err(Error::BadInput(format!(
                    "neighbor softmax expects token payloads, got {other:?}"
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Artefact::Distribution(fusion::neighbor_softmax(
            &scored,
            &self.vocab,
        )?))
    }
}

/// Concatenates candidate texts, separated by [`fusion::DOC_SEP`], into one
/// text block. Doc payloads are resolved through the supplied text table;
/// answers and tokens splice in directly. No candidates make an empty
/// block.
pub struct ConcatTextAggregator {
    texts: Arc<BTreeMap<String, Vec<String>>>,
}

impl ConcatTextAggregator {
    pub fn new(texts: Arc<BTreeMap<String, Vec<String>>>) -> Self {
        ConcatTextAggregator { texts }
    }
}

impl Aggregator for ConcatTextAggregator {
    fn aggregate(&self, candidates: &[Candidate], _key: &Key, _query: &Query) -> Result<Artefact> {
        let mut block: Vec<String> = Vec::new();
        for candidate in candidates {
            let tokens = match &candidate.value {
                Payload::Doc(id) => self
                    .texts
                    .get(id)
                    .ok_or_else(|| Error::UnknownDoc(id.clone()))?
                    .clone(),
                Payload::Answer(text) => crate::data::tokenize(text),
                Payload::Token(t) => vec![t.clone()],
                Payload::Triple(t) => {
                    return Err(Error::BadInput(format!(
                        "text aggregation cannot splice triple {t}"
                    )))
                }
            };
            if !block.is_empty() {
                block.push(fusion::DOC_SEP.to_string());
            }
            block.extend(tokens);
        }
        Ok(Artefact::TextBlock(block))
    }
}

/// Ignores the candidates and emits an empty text block. Exists so stage
/// swaps can isolate the aggregator's contribution.
pub struct NullAggregator;

impl Aggregator for NullAggregator {
    fn aggregate(&self, _candidates: &[Candidate], _key: &Key, _query: &Query) -> Result<Artefact> {
        Ok(Artefact::TextBlock(Vec::new()))
    }
}

/// Keeps only the top-ranked candidate's answer text.
pub struct TopAnswerAggregator;

impl Aggregator for TopAnswerAggregator {
    fn aggregate(&self, candidates: &[Candidate], _key: &Key, _query: &Query) -> Result<Artefact> {
        let top = candidates.first().ok_or(Error::Empty("candidates"))?;
        let text = match &top.value {
            Payload::Answer(a) | Payload::Token(a) | Payload::Doc(a) => a,
            Payload::Triple(t) => &t.entity,
        };
        Ok(Artefact::TextBlock(crate::data::tokenize(text)))
    }
}

/// Echoes the query text, ignoring the artefact entirely. A backbone with
/// the retrieval turned off.
pub struct EchoModel;

impl Model for EchoModel {
    fn infer(&self, query: &Query, _artefact: &Artefact) -> Result<Output> {
        Ok(Output::Tokens(query.text.clone()))
    }
}

/// Early fusion: prepends the artefact's text block to the query.
pub struct PrimingModel;

impl Model for PrimingModel {
    fn infer(&self, query: &Query, artefact: &Artefact) -> Result<Output> {
        let Artefact::TextBlock(block) = artefact else {
            return Err(Error::BadInput(format!(
                "priming needs a text block, got {}",
                artefact.kind_name()
            )));
        };
        if block.is_empty() {
            return Ok(Output::Tokens(query.text.clone()));
        }
        Ok(Output::Tokens(fusion::prime(
            &query.text,
            std::slice::from_ref(block),
        )))
    }
}

/// Very-late fusion: interpolates the artefact distribution with the n-gram
/// backbone's own next-token distribution.
pub struct ConvexLmModel {
    lm: Arc<NGramLm>,
    lambda: f64,
}

impl ConvexLmModel {
    pub fn new(lm: Arc<NGramLm>, lambda: f64) -> Self {
        ConvexLmModel { lm, lambda }
    }
}

impl Model for ConvexLmModel {
    fn infer(&self, query: &Query, artefact: &Artefact) -> Result<Output> {
        let Artefact::Distribution(p_xi) = artefact else {
            return Err(Error::BadInput(format!(
                "convex fusion needs a distribution, got {}",
                artefact.kind_name()
            )));
        };
        let p_lm = self.lm.next_distribution(&query.text);
        Ok(Output::Distribution(fusion::convex(
            p_xi,
            &p_lm,
            self.lambda,
        )?))
    }
}

/// No model at all: the artefact itself is the output.
pub struct NoModel;

impl Model for NoModel {
    fn infer(&self, _query: &Query, artefact: &Artefact) -> Result<Output> {
        Ok(match artefact {
            Artefact::Distribution(d) => Output::Distribution(d.clone()),
            Artefact::TextBlock(block) => {
                if block.is_empty() {
                    Output::Answer(None)
                } else {
                    Output::Answer(Some(block.join(" ")))
                }
            }
            Artefact::WeightedVector(v) => Output::Vector(v.clone()),
            Artefact::TripleSet(ts) => Output::Triples(ts.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Metric;

    #[test]
    fn dense_retriever_rejects_foreign_keys() {
        let index = DenseIndex::build(vec![(vec![1.0f32], "x".to_string())], Metric::L2).unwrap();
        let retriever = DenseKnnRetriever::new(Arc::new(index), 1, PayloadKind::Token);
        let key = Key::Terms(TermVector::from_counts(&["a".to_string()]));
        assert!(matches!(
            retriever.retrieve(&key),
            Err(Error::KeyKindMismatch { .. })
        ));
    }

    #[test]
    fn sparse_retriever_carries_doc_term_vectors_as_keys() {
        let docs = vec![
            ("d0".to_string(), crate::data::tokenize("apple pie recipe")),
            ("d1".to_string(), crate::data::tokenize("car engine manual")),
        ];
        let index = Arc::new(InvertedIndex::build(&docs).unwrap());
        let retriever = SparseLookupRetriever::new(index, 5);
        let key = Key::Terms(TermVector::from_counts(&crate::data::tokenize("apple recipe")));
        let candidates = retriever.retrieve(&key).unwrap();
        assert_eq!(candidates.len(), 1);
        assert_eq!(candidates[0].value, Payload::Doc("d0".to_string()));
        match &candidates[0].key {
            Key::Terms(tv) => assert_eq!(tv.weight("pie"), 1.0),
            other => panic!("wrong key kind {:?}", other.kind()),
        }
    }

    #[test]
    fn triple_retriever_returns_bound_patterns() {
        let store = Arc::new(TripleStore::from_triples([
            crate::kb::Triple::new("a", "r", "b"),
            crate::kb::Triple::new("a", "r", "c"),
            crate::kb::Triple::new("a", "other", "d"),
        ]));
        let retriever = TripleMatchRetriever::new(store);
        let key = Key::Pattern(crate::kb::TriplePattern::outgoing("a", "r"));
        let candidates = retriever.retrieve(&key).unwrap();
        assert_eq!(candidates.len(), 2);
        assert!(candidates.iter().all(|c| c.score == 1.0));
    }

    #[test]
    fn no_model_passes_every_artefact_kind_through() {
        let q = Query::qa(vec!["q".into()]);
        let answer = NoModel
            .infer(&q, &Artefact::TextBlock(vec!["new".into(), "york".into()]))
            .unwrap();
        assert!(matches!(answer, Output::Answer(Some(ref a)) if a == "new york"));
        let none = NoModel.infer(&q, &Artefact::TextBlock(vec![])).unwrap();
        assert!(matches!(none, Output::Answer(None)));
        let vector = NoModel
            .infer(&q, &Artefact::WeightedVector(vec![1.0, 2.0]))
            .unwrap();
        assert!(matches!(vector, Output::Vector(_)));
    }

    #[test]
    fn priming_model_prepends_the_block() {
        let q = Query::qa(vec!["question".into()]);
        let out = PrimingModel
            .infer(&q, &Artefact::TextBlock(vec!["fact".into()]))
            .unwrap();
        match out {
            Output::Tokens(tokens) => {
                assert_eq!(tokens, ["fact", fusion::DOC_SEP, "question"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(PrimingModel
            .infer(&q, &Artefact::WeightedVector(vec![]))
            .is_err());
    }
}
