//! Fact checking against a document collection: condense the claim into a
//! content-word query, retrieve with relaxation, rerank toward documents
//! whose titles name the claim's subjects, filter for relevance, and
//! aggregate per-document stances into a verdict.
//!
//! Relevance and stance are pluggable hooks: the reference implementations
//! here are deliberately simple stand-ins, and real classifiers slot in
//! without touching the retrieval scaffolding.

use crate::data::{tokenize, DocRecord};
use crate::error::{Error, Result};
use crate::fusion::DOC_SEP;
use crate::pipeline::{Artefact, Candidate, Key, Payload, Trace};
use crate::sparse::{fakta_query, InvertedIndex, TermVector, DEFAULT_B, DEFAULT_K1};

/// One document's position toward a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stance {
    Agree,
    Disagree,
    Discuss,
}

impl Stance {
    pub fn score(self) -> f64 {
        match self {
            Stance::Agree => 1.0,
            Stance::Disagree => -1.0,
            Stance::Discuss => 0.0,
        }
    }
}

/// Verdict over the whole evidence pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactLabel {
    Agree,
    Disagree,
    Discuss,
    /// No relevant evidence was found at all.
    NotVerifiable,
}

/// Decides whether a retrieved document is usable evidence for the claim.
pub trait RelevanceHook: Send + Sync {
    fn relevant(&self, claim: &str, index: &InvertedIndex, doc: u32) -> bool;
}

/// Classifies one document's stance toward the claim.
pub trait StanceHook: Send + Sync {
    fn stance(&self, claim: &str, document: &str) -> Stance;
}

/// Evidence passes when its BM25 score against the claim's own tokens
/// exceeds the threshold. Zero keeps everything with any lexical overlap.
#[derive(Debug, Clone, Copy)]
pub struct Bm25Relevance {
    pub threshold: f64,
}

impl Default for Bm25Relevance {
    fn default() -> Bm25Relevance {
        Bm25Relevance { threshold: 0.0 }
    }
}

impl RelevanceHook for Bm25Relevance {
    fn relevant(&self, claim: &str, index: &InvertedIndex, doc: u32) -> bool {
        index
            .bm25(&tokenize(claim), doc, DEFAULT_K1, DEFAULT_B)
            .map(|score| score > self.threshold)
            .unwrap_or(false)
    }
}

/// Takes no position: every document discusses. Useful as a baseline and
/// for exercising the pipeline without a trained classifier.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeutralStance;

impl StanceHook for NeutralStance {
    fn stance(&self, _claim: &str, _document: &str) -> Stance {
        Stance::Discuss
    }
}

#[derive(Debug)]
pub struct FaktaOutcome {
    pub label: FactLabel,
    /// Relevant documents and their stances, evidence order.
    pub stances: Vec<(String, Stance)>,
    /// Mean stance score over the relevant documents; absent when nothing
    /// was relevant.
    pub mean_stance: Option<f64>,
    /// How many condensed query terms survived relaxation.
    pub used_terms: usize,
    pub trace: Trace,
}

/// The retrieval-and-verdict scaffold. Documents are indexed over title
/// and body; claims arrive with part-of-speech tags and linked entities.
pub struct Fakta {
    index: InvertedIndex,
    titles: Vec<Vec<String>>,
    texts: Vec<String>,
    pool: usize,
}

const DEFAULT_POOL: usize = 10;

impl Fakta {
    pub fn build(docs: &[DocRecord]) -> Result<Fakta> {
        let mut sparse_docs = Vec::with_capacity(docs.len());
        let mut titles = Vec::with_capacity(docs.len());
        let mut texts = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut tokens = tokenize(&doc.title);
            tokens.extend(tokenize(&doc.text));
            sparse_docs.push((doc.id.clone(), tokens));
            titles.push(tokenize(&doc.title));
            texts.push(doc.text.clone());
        }
        Ok(Fakta {
            index: InvertedIndex::build(&sparse_docs)?,
            titles,
            texts,
            pool: DEFAULT_POOL,
        })
    }

    pub fn with_pool(mut self, pool: usize) -> Result<Fakta> {
        if pool == 0 {
            return Err(Error::OutOfRange {
                what: "evidence pool",
                value: 0.0,
            });
        }
        self.pool = pool;
        Ok(self)
    }

    fn title_overlap(&self, doc: u32, query: &[String]) -> usize {
        let title = &self.titles[doc as usize];
        let mut seen: Vec<&str> = Vec::new();
        for term in query {
            if seen.contains(&term.as_str()) {
                continue;
            }
            if title.iter().any(|t| t.eq_ignore_ascii_case(term)) {
                seen.push(term);
            }
        }
        seen.len()
    }

    /// Checks one claim. `tags` must align one-to-one with the claim's
    /// whitespace tokens; `entities` are the claim's linked subjects.
    pub fn check(
        &self,
        claim: &str,
        tags: &[String],
        entities: &[String],
        relevance: &dyn RelevanceHook,
        stance: &dyn StanceHook,
    ) -> Result<FaktaOutcome> {
        let claim_tokens = tokenize(claim);
        if claim_tokens.is_empty() {
            return Err(Error::Empty("claim"));
        }
        let query = fakta_query(&claim_tokens, tags, entities)?;
        let (ranking, used_terms) = self.index.relaxed_lookup(&query, self.pool);

        // Documents whose title names a query subject outrank the rest;
        // the sort is stable, so BM25 order survives within each tier.
        let mut reranked = ranking;
        reranked.sort_by_key(|(doc, _)| std::cmp::Reverse(self.title_overlap(*doc, &query)));

        let mut events = vec![format!(
            "kept {used_terms}/{} query terms, pooled {} documents",
            query.len(),
            reranked.len()
        )];

        let mut stances = Vec::new();
        let mut evidence = Vec::new();
        for (doc, _) in &reranked {
            if relevance.relevant(claim, &self.index, *doc) {
                let text = &self.texts[*doc as usize];
                stances.push((
                    self.index.doc_id(*doc).to_owned(),
                    stance.stance(claim, text),
                ));
                evidence.push(text.clone());
            }
        }

        let mean_stance = if stances.is_empty() {
            None
        } else {
            Some(stances.iter().map(|(_, s)| s.score()).sum::<f64>() / stances.len() as f64)
        };
        let label = match mean_stance {
            None => FactLabel::NotVerifiable,
            Some(m) if m > 1.0 / 3.0 => FactLabel::Agree,
            Some(m) if m < -1.0 / 3.0 => FactLabel::Disagree,
            Some(_) => FactLabel::Discuss,
        };
        events.push(format!("{} relevant, verdict {label:?}", stances.len()));

        let candidates = reranked
            .iter()
            .map(|(doc, score)| {
                Ok(Candidate {
                    key: Key::Terms(self.index.doc_term_vector(*doc)?),
                    value: Payload::Doc(self.index.doc_id(*doc).to_owned()),
                    score: *score,
                })
            })
            .collect::<Result<_>>()?;

        Ok(FaktaOutcome {
            label,
            stances,
            mean_stance,
            used_terms,
            trace: Trace {
                key: Key::Terms(TermVector::from_counts(&query)),
                candidates,
                artefact: Artefact::TextBlock(vec![evidence.join(&format!(" {DOC_SEP} "))]),
                events,
            },
        })
    }
}
