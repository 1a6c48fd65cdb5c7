//! Question answering: dense passage retrieval with extractive reading,
//! pure nearest-neighbour answer recall, and an iterative retrieve-and-join
//! loop over a graph and a document collection.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backbone::PrefixEmbedder;
use crate::data::{tokenize, DocRecord, QaRecord};
use crate::dense::{DenseIndex, Metric};
use crate::error::{Error, Result};
use crate::fusion::Distribution;
use crate::kb::{Triple, TripleStore};
use crate::pipeline::{Artefact, Candidate, Key, Payload, Trace};
use crate::sparse::{InvertedIndex, TermVector, DEFAULT_B, DEFAULT_K1};

pub const DEFAULT_PASSAGES: usize = 5;
pub const DEFAULT_MAX_SPAN: usize = 8;

/// A candidate answer span in a passage: token positions `start..end`
/// (end exclusive) and the extractor's confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanScore {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Extracts the best answer span from one passage, or nothing when the
/// passage offers no evidence at all.
pub trait SpanScorer: Send + Sync {
    fn best_span(
        &self,
        question: &[String],
        passage: &[String],
        max_len: usize,
    ) -> Option<SpanScore>;
}

/// Untrained stand-in for a reader head: each passage token scores 1 when
/// it appears in the question, 0 otherwise. The best span maximizes the
/// window sum; ties prefer the shorter window (no zero-overlap padding),
/// then the earlier one. Its confidence is the product of softmaxed start
/// and end pointers, which keeps the scores comparable across passages.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapSpanScorer;

impl SpanScorer for OverlapSpanScorer {
    fn best_span(
        &self,
        question: &[String],
        passage: &[String],
        max_len: usize,
    ) -> Option<SpanScore> {
        if passage.is_empty() || max_len == 0 {
            return None;
        }
        let overlap: Vec<f64> = passage
            .iter()
            .map(|t| if question.contains(t) { 1.0 } else { 0.0 })
            .collect();
        if overlap.iter().sum::<f64>() == 0.0 {
            return None;
        }
        let mut best: Option<(f64, usize, usize)> = None; // (sum, start, end)
        for start in 0..passage.len() {
            let mut sum = 0.0;
            for end in start + 1..=passage.len().min(start + max_len) {
                sum += overlap[end - 1];
                let better = match best {
                    None => true,
                    Some((s, bs, be)) => {
                        let (len, blen) = (end - start, be - bs);
                        sum > s || (sum == s && (len < blen || (len == blen && start < bs)))
                    }
                };
                if better {
                    best = Some((sum, start, end));
                }
            }
        }
        let (_, start, end) = best.expect("passage is non-empty");
        let max = overlap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = overlap.iter().map(|o| (o - max).exp()).sum();
        let p_start = (overlap[start] - max).exp() / z;
        let p_end = (overlap[end - 1] - max).exp() / z;
        Some(SpanScore {
            start,
            end,
            score: p_start * p_end,
        })
    }
}

/// Per-stage scores for one answered question. Systems without a rerank or
/// selection stage leave those out.
#[derive(Debug, Clone)]
pub struct QaScores {
    /// `(id, score)` in retrieval order.
    pub retrieval: Vec<(String, f64)>,
    /// `(id, score)` after reranking, best first.
    pub rerank: Option<Vec<(String, f64)>>,
    /// Softmax over the reranked candidates.
    pub selection: Option<Distribution>,
}

#[derive(Debug, Clone)]
pub struct QaResult {
    pub answer: Option<String>,
    /// What supplied the answer: the selected passage id, or the memorized
    /// question it was recalled from.
    pub support: String,
    /// Candidate ids, best first (after reranking where there is one).
    pub ranking: Vec<String>,
    pub scores: QaScores,
    pub trace: Trace,
}

struct Passage {
    tokens: Vec<String>,
    text: String,
}

/// Dense passage retrieval with extractive reading: passages are
/// bag-embedded (title and body), retrieved by inner product, reranked by
/// `bm25 + lambda * dense`, and the top passage is read for a span.
pub struct DprQa {
    index: DenseIndex<String>,
    inverted: InvertedIndex,
    passages_by_id: BTreeMap<String, Passage>,
    embedder: Arc<PrefixEmbedder>,
    passages: usize,
    lambda_rerank: f64,
    max_span: usize,
    scorer: Box<dyn SpanScorer>,
}

impl DprQa {
    pub fn build(docs: &[DocRecord], embedder: PrefixEmbedder) -> Result<DprQa> {
        let embedder = Arc::new(embedder);
        let mut entries = Vec::with_capacity(docs.len());
        let mut sparse_docs = Vec::with_capacity(docs.len());
        let mut passages_by_id = BTreeMap::new();
        for doc in docs {
            let mut tokens = tokenize(&doc.title);
            tokens.extend(tokenize(&doc.text));
            entries.push((embedder.embed_bag(&tokens)?, doc.id.clone()));
            sparse_docs.push((doc.id.clone(), tokens));
            if passages_by_id
                .insert(
                    doc.id.clone(),
                    Passage {
                        tokens: tokenize(&doc.text),
                        text: doc.text.clone(),
                    },
                )
                .is_some()
            {
                return Err(Error::DuplicateDoc(doc.id.clone()));
            }
        }
        Ok(DprQa {
            index: DenseIndex::build(entries, Metric::InnerProduct)?,
            inverted: InvertedIndex::build(&sparse_docs)?,
            passages_by_id,
            embedder,
            passages: DEFAULT_PASSAGES,
            lambda_rerank: 1.0,
            max_span: DEFAULT_MAX_SPAN,
            scorer: Box::new(OverlapSpanScorer),
        })
    }

    pub fn with_passages(mut self, passages: usize) -> Result<DprQa> {
        if passages == 0 {
            return Err(Error::OutOfRange {
                what: "passage count",
                value: 0.0,
            });
        }
        self.passages = passages;
        Ok(self)
    }

    /// Weight of the dense score in the rerank mix; zero means pure BM25.
    pub fn with_rerank_weight(mut self, lambda: f64) -> Result<DprQa> {
        if !lambda.is_finite() {
            return Err(Error::OutOfRange {
                what: "rerank weight",
                value: lambda,
            });
        }
        self.lambda_rerank = lambda;
        Ok(self)
    }

    pub fn with_max_span(mut self, max_span: usize) -> Result<DprQa> {
        if max_span == 0 {
            return Err(Error::OutOfRange {
                what: "max span length",
                value: 0.0,
            });
        }
        self.max_span = max_span;
        Ok(self)
    }

    pub fn with_scorer(mut self, scorer: Box<dyn SpanScorer>) -> DprQa {
        self.scorer = scorer;
        self
    }

    pub fn answer(&self, question: &str) -> Result<QaResult> {
        let q_tokens = tokenize(question);
        if q_tokens.is_empty() {
            return Err(Error::Empty("question"));
        }
        let key = self.embedder.embed_bag(&q_tokens)?;
        let result = self.index.knn(&key, self.passages)?;
        let retrieval: Vec<(String, f64)> = result
            .hits
            .iter()
            .map(|h| (h.payload.clone(), h.score))
            .collect();

        let mut rows: Vec<(usize, f64)> = Vec::with_capacity(result.hits.len());
        for (i, hit) in result.hits.iter().enumerate() {
            let doc = self
                .inverted
                .doc_index(&hit.payload)
                .expect("both indexes were built from the same docs");
            let bm25 = self.inverted.bm25(&q_tokens, doc, DEFAULT_K1, DEFAULT_B)?;
            rows.push((i, bm25 + self.lambda_rerank * hit.score));
        }
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let rerank: Vec<(String, f64)> = rows
            .iter()
            .map(|(i, s)| (result.hits[*i].payload.clone(), *s))
            .collect();
        let ranking: Vec<String> = rerank.iter().map(|(id, _)| id.clone()).collect();

        let top = rows[0].1;
        let selection =
            Distribution::from_weights(rows.iter().map(|(_, s)| (s - top).exp()).collect())?;
        let pick = selection.argmax();
        let support = ranking[pick].clone();
        let passage = &self.passages_by_id[&support];

        let span = self
            .scorer
            .best_span(&q_tokens, &passage.tokens, self.max_span);
        let answer = span
            .as_ref()
            .map(|s| passage.tokens[s.start..s.end].join(" "));

        let mut events = vec![
            format!("retrieved {} passages", result.hits.len()),
            format!("selected {support} (p = {:.4})", selection.prob(pick)),
        ];
        match &span {
            Some(s) => events.push(format!(
                "span {}..{} (score {:.4})",
                s.start, s.end, s.score
            )),
            None => events.push("no answer span in the selected passage".to_string()),
        }
        let candidates = result
            .hits
            .iter()
            .map(|h| Candidate {
                key: Key::Dense(self.index.vector(h.index).to_vec()),
                value: Payload::Doc(h.payload.clone()),
                score: h.score,
            })
            .collect();

        Ok(QaResult {
            answer,
            support: support.clone(),
            ranking,
            scores: QaScores {
                retrieval,
                rerank: Some(rerank),
                selection: Some(selection),
            },
            trace: Trace {
                key: Key::Dense(key),
                candidates,
                artefact: Artefact::TextBlock(vec![passage.text.clone()]),
                events,
            },
        })
    }
}

/// One memorized training pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

/// Pure memorization: training questions are bag-embedded, and a test
/// question answers with the memorized answer of its nearest neighbour. No
/// reading, no model, nothing to fuse.
pub struct NnQa {
    index: DenseIndex<QaPair>,
    embedder: Arc<PrefixEmbedder>,
}

impl NnQa {
    pub fn build(pairs: &[QaRecord], embedder: PrefixEmbedder) -> Result<NnQa> {
        let embedder = Arc::new(embedder);
        let mut entries = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let tokens = tokenize(&pair.question);
            entries.push((
                embedder.embed_bag(&tokens)?,
                QaPair {
                    question: pair.question.clone(),
                    answer: pair.answer.clone(),
                },
            ));
        }
        Ok(NnQa {
            index: DenseIndex::build(entries, Metric::InnerProduct)?,
            embedder,
        })
    }

    pub fn answer(&self, question: &str) -> Result<QaResult> {
        let q_tokens = tokenize(question);
        if q_tokens.is_empty() {
            return Err(Error::Empty("question"));
        }
        let key = self.embedder.embed_bag(&q_tokens)?;
        let result = self.index.knn(&key, 1)?;
        let hit = &result.hits[0];
        Ok(QaResult {
            answer: Some(hit.payload.answer.clone()),
            support: hit.payload.question.clone(),
            ranking: vec![hit.payload.question.clone()],
            scores: QaScores {
                retrieval: vec![(hit.payload.question.clone(), hit.score)],
                rerank: None,
                selection: None,
            },
            trace: Trace {
                key: Key::Dense(key),
                candidates: vec![Candidate {
                    key: Key::Dense(self.index.vector(hit.index).to_vec()),
                    value: Payload::Answer(hit.payload.answer.clone()),
                    score: hit.score,
                }],
                artefact: Artefact::TextBlock(vec![hit.payload.answer.clone()]),
                events: vec![format!(
                    "recalled nearest memorized question (score {:.4})",
                    hit.score
                )],
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct PullnetConfig {
    /// Hop budget: how many retrieve-and-join rounds to run.
    pub rounds: usize,
    /// How many new facts and how many new documents each round may pull.
    pub fanout: usize,
}

impl Default for PullnetConfig {
    fn default() -> PullnetConfig {
        PullnetConfig {
            rounds: 2,
            fanout: 3,
        }
    }
}

#[derive(Debug)]
pub struct PullnetOutcome {
    pub answer: Option<String>,
    pub score: f64,
    /// Cumulative entity sets, one per round: `reached[0]` is the question
    /// entities, `reached[t]` everything known after round `t`.
    pub reached: Vec<BTreeSet<String>>,
    pub pulled_facts: BTreeSet<Triple>,
    pub trace: Trace,
}

fn relation_tokens(relation: &str) -> Vec<String> {
    relation
        .split(|c: char| c == '_' || c == '-' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn relation_overlap(relation: &str, question_terms: &[String]) -> usize {
    let mut seen: Vec<String> = Vec::new();
    for tok in relation_tokens(relation) {
        if seen.contains(&tok) {
            continue;
        }
        if question_terms
            .iter()
            .any(|q| q.eq_ignore_ascii_case(&tok))
        {
            seen.push(tok);
        }
    }
    seen.len()
}

fn entity_in_doc(index: &InvertedIndex, entity: &str, doc: u32) -> bool {
    let tokens = tokenize(entity);
    !tokens.is_empty() && tokens.iter().all(|t| index.tf(t, doc) > 0)
}

/// Iterative retrieve-and-join over a triple store and a document
/// collection.
///
/// Starting from the question's linked entities, each round pulls the
/// `fanout` most relevant unpulled facts incident to the frontier (ranked
/// by how many relation tokens the question mentions) and the `fanout`
/// most relevant unpulled documents mentioning a frontier entity (ranked
/// by the summed idf of the question terms they contain). Entities on
/// either side of a pulled fact, and entities named in a pulled document,
/// join the frontier. After `rounds` rounds the best-supported entity
/// outside the question itself is the answer: highest incident-fact
/// relevance, ties broken toward entities reached later (they sit at the
/// end of the chain), then alphabetically.
pub fn pullnet_lite(
    question_terms: &[String],
    question_entities: &[String],
    store: &TripleStore,
    docs: &InvertedIndex,
    config: &PullnetConfig,
) -> Result<PullnetOutcome> {
    if question_entities.is_empty() {
        return Err(Error::NoLinkedEntities);
    }
    if config.rounds == 0 || config.fanout == 0 {
        return Err(Error::OutOfRange {
            what: "rounds and fanout",
            value: 0.0,
        });
    }

    let c0: BTreeSet<String> = question_entities.iter().cloned().collect();
    let mut reached = vec![c0.clone()];
    let mut pulled_facts: BTreeSet<Triple> = BTreeSet::new();
    let mut pulled_docs: BTreeSet<u32> = BTreeSet::new();
    let mut first_round: BTreeMap<String, usize> = BTreeMap::new();
    let mut events = Vec::new();

    let n = docs.n_docs() as f64;
    let doc_relevance = |doc: u32| -> f64 {
        let mut seen: Vec<&str> = Vec::new();
        let mut score = 0.0;
        for term in question_terms {
            if seen.contains(&term.as_str()) {
                continue;
            }
            seen.push(term);
            if docs.tf(term, doc) > 0 {
                let df = docs.df(term) as f64;
                score += (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            }
        }
        score
    };

    for round in 1..=config.rounds {
        let frontier = reached[round - 1].clone();
        let mut current = frontier.clone();

        // Fact pull: unpulled facts incident to the frontier, most
        // question-relevant relations first.
        let mut fact_candidates: Vec<(usize, Triple)> = store
            .iter()
            .filter(|t| {
                !pulled_facts.contains(t)
                    && (frontier.contains(&t.parent) || frontier.contains(&t.entity))
            })
            .map(|t| (relation_overlap(&t.relation, question_terms), t.clone()))
            .collect();
        fact_candidates.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        fact_candidates.truncate(config.fanout);
        let new_facts = fact_candidates.len();
        for (_, fact) in fact_candidates {
            current.insert(fact.parent.clone());
            current.insert(fact.entity.clone());
            pulled_facts.insert(fact);
        }

        // Document pull: unpulled documents naming a frontier entity,
        // most question-relevant first.
        let mut doc_candidates: Vec<(u32, f64)> = Vec::new();
        for entity in &frontier {
            for doc in docs.docs_containing_all(&tokenize(entity)) {
                if !pulled_docs.contains(&doc) && !doc_candidates.iter().any(|(d, _)| *d == doc) {
                    doc_candidates.push((doc, doc_relevance(doc)));
                }
            }
        }
        doc_candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        doc_candidates.truncate(config.fanout);
        let new_docs = doc_candidates.len();
        for (doc, _) in doc_candidates {
            pulled_docs.insert(doc);
            for entity in store.entities() {
                if entity_in_doc(docs, entity, doc) {
                    current.insert(entity.to_owned());
                }
            }
        }

        for entity in &current {
            if !reached[round - 1].contains(entity) {
                first_round.entry(entity.clone()).or_insert(round);
            }
        }
        events.push(format!(
            "round {round}: +{new_facts} facts, +{new_docs} docs, {} entities total",
            current.len()
        ));
        reached.push(current);
    }

    let last = &reached[config.rounds];
    let mut best: Option<(String, usize, usize)> = None; // (entity, overlap, round)
    for entity in last.difference(&c0) {
        let overlap = pulled_facts
            .iter()
            .filter(|t| t.parent == *entity || t.entity == *entity)
            .map(|t| relation_overlap(&t.relation, question_terms))
            .max()
            .unwrap_or(0);
        let round = first_round[entity];
        let better = match &best {
            None => true,
            Some((be, bo, br)) => {
                overlap > *bo
                    || (overlap == *bo && (round > *br || (round == *br && entity < be)))
            }
        };
        if better {
            best = Some((entity.clone(), overlap, round));
        }
    }

    let candidates: Vec<Candidate> = last
        .difference(&c0)
        .map(|entity| {
            let overlap = pulled_facts
                .iter()
                .filter(|t| t.parent == *entity || t.entity == *entity)
                .map(|t| relation_overlap(&t.relation, question_terms))
                .max()
                .unwrap_or(0);
            Candidate {
                key: Key::Terms(TermVector::from_counts(&tokenize(entity))),
                value: Payload::Answer(entity.clone()),
                score: overlap as f64,
            }
        })
        .collect();

    let (answer, score) = match best {
        Some((entity, overlap, _)) => (Some(entity), overlap as f64),
        None => (None, 0.0),
    };
    if let Some(a) = &answer {
        events.push(format!("answer {a} (relevance {score})"));
    } else {
        events.push("no entity reached beyond the question".to_string());
    }

    Ok(PullnetOutcome {
        answer,
        score,
        reached,
        pulled_facts: pulled_facts.clone(),
        trace: Trace {
            key: Key::Terms(TermVector::from_counts(question_terms)),
            candidates,
            artefact: Artefact::TripleSet(pulled_facts.into_iter().collect()),
            events,
        },
    })
}
