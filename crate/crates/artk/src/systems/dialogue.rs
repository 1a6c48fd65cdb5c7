//! Knowledge selection for open-domain dialogue: given the conversation so
//! far and its topic, pull a pool of candidate passages by sparse lookup
//! and compress them into a single topic-attended vector for the response
//! model to condition on.

use std::sync::Arc;

use crate::backbone::PrefixEmbedder;
use crate::data::{tokenize, DocRecord};
use crate::error::{Error, Result};
use crate::fusion;
use crate::pipeline::{Artefact, Candidate, Key, Payload, Trace};
use crate::sparse::{InvertedIndex, TermVector};

/// How many passages the sparse lookup feeds into attention.
pub const WIZARDS_POOL: usize = 7;

#[derive(Debug)]
pub struct WizardsSelection {
    /// Topic-attended sum over the pooled passage vectors; all zeros when
    /// nothing was retrieved.
    pub artefact: Vec<f32>,
    /// Pooled passage ids, best first.
    pub passages: Vec<String>,
    /// The sparse query that did the pooling.
    pub key: TermVector,
    /// True when the lookup found nothing and the artefact carries no mass.
    pub empty: bool,
    pub trace: Trace,
}

/// Passage selection over an encyclopedia slice: each article contributes
/// its title and first paragraph. The query is the TF-IDF of the last two
/// utterances merged (by max) with the TF-IDF of the topic, and the pooled
/// passages are combined by attention against the topic embedding.
pub struct Wizards {
    index: InvertedIndex,
    doc_vectors: Vec<Vec<f32>>,
    embedder: Arc<PrefixEmbedder>,
    pool: usize,
}

fn first_paragraph(text: &str) -> &str {
    text.split("\n\n").next().unwrap_or("")
}

impl Wizards {
    pub fn build(docs: &[DocRecord], embedder: PrefixEmbedder) -> Result<Wizards> {
        let embedder = Arc::new(embedder);
        let mut sparse_docs = Vec::with_capacity(docs.len());
        let mut doc_vectors = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut tokens = tokenize(&doc.title);
            tokens.extend(tokenize(first_paragraph(&doc.text)));
            if tokens.is_empty() {
                return Err(Error::Empty("passage tokens"));
            }
            doc_vectors.push(embedder.embed_bag(&tokens)?);
            sparse_docs.push((doc.id.clone(), tokens));
        }
        Ok(Wizards {
            index: InvertedIndex::build(&sparse_docs)?,
            doc_vectors,
            embedder,
            pool: WIZARDS_POOL,
        })
    }

    pub fn with_pool(mut self, pool: usize) -> Result<Wizards> {
        if pool == 0 {
            return Err(Error::OutOfRange {
                what: "passage pool",
                value: 0.0,
            });
        }
        self.pool = pool;
        Ok(self)
    }

    /// Builds the knowledge artefact for the next response. `history` is
    /// the dialogue so far, most recent utterance last; only the last two
    /// utterances enter the query.
    pub fn select(&self, history: &[String], topic: &str) -> Result<WizardsSelection> {
        let topic_tokens = tokenize(topic);
        if topic_tokens.is_empty() {
            return Err(Error::Empty("topic"));
        }
        let mut context_tokens = Vec::new();
        for utterance in history.iter().rev().take(2) {
            context_tokens.extend(tokenize(utterance));
        }
        let key = self
            .index
            .tfidf(&context_tokens)
            .union_max(&self.index.tfidf(&topic_tokens));

        let query: Vec<String> = key.terms().map(|(t, _)| t.to_owned()).collect();
        let ranking = self.index.lookup(&query, self.pool);

        let mut events = vec![format!("pooled {} passages", ranking.len())];
        let candidates: Vec<Candidate> = ranking
            .iter()
            .map(|(doc, score)| {
                Ok(Candidate {
                    key: Key::Terms(self.index.doc_term_vector(*doc)?),
                    value: Payload::Doc(self.index.doc_id(*doc).to_owned()),
                    score: *score,
                })
            })
            .collect::<Result<_>>()?;
        let passages: Vec<String> = ranking
            .iter()
            .map(|(doc, _)| self.index.doc_id(*doc).to_owned())
            .collect();

        let (artefact, empty) = if ranking.is_empty() {
            events.push("no passage shares a term with the query".to_string());
            (vec![0.0; self.embedder.dim()], true)
        } else {
            let topic_vec = self.embedder.embed_bag(&topic_tokens)?;
            let vectors: Vec<Vec<f32>> = ranking
                .iter()
                .map(|(doc, _)| self.doc_vectors[*doc as usize].clone())
                .collect();
            (fusion::attention_sum(&vectors, &topic_vec)?, false)
        };

        Ok(WizardsSelection {
            artefact: artefact.clone(),
            passages,
            key: key.clone(),
            empty,
            trace: Trace {
                key: Key::Terms(key),
                candidates,
                artefact: Artefact::WeightedVector(artefact),
                events,
            },
        })
    }
}
