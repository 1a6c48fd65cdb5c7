//! The four-stage contract every system here satisfies: encode the query
//! into a key, retrieve candidates for the key, aggregate candidates into
//! one artefact, infer an output from query plus artefact.
//!
//! The stages are trait objects, so a pipeline can swap any one stage
//! without the others noticing; the key kinds keep encoder and retriever
//! honest at assembly time. Every run yields a [`Trace`] alongside its
//! output, because retrieval decisions are only debuggable when the key,
//! the candidate set and the artefact survive the run.

pub mod stages;

use serde::Serialize;

use crate::fusion::Distribution;
use crate::error::{Error, Result};
use crate::kb::{Triple, TriplePattern};
use crate::sparse::TermVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TaskKind {
    #[serde(rename = "lm")]
    LanguageModel,
    #[serde(rename = "qa")]
    Qa,
    #[serde(rename = "slot-fill")]
    SlotFill,
    #[serde(rename = "fact-check")]
    FactCheck,
    #[serde(rename = "dialogue")]
    Dialogue,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::LanguageModel => "lm",
            TaskKind::Qa => "qa",
            TaskKind::SlotFill => "slot-fill",
            TaskKind::FactCheck => "fact-check",
            TaskKind::Dialogue => "dialogue",
        }
    }
}

/// A subject–relation query with the object left open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotQuery {
    pub subject: String,
    pub relation: String,
}

/// What a pipeline is asked. `text` is the primary payload for every task
/// except slot filling, which carries its payload in `structured`.
#[derive(Debug, Clone, Serialize)]
pub struct Query {
    pub task: TaskKind,
    pub text: Vec<String>,
    pub structured: Option<SlotQuery>,
    pub topic: Option<Vec<String>>,
}

impl Query {
    pub fn lm(text: Vec<String>) -> Query {
        Query {
            task: TaskKind::LanguageModel,
            text,
            structured: None,
            topic: None,
        }
    }

    pub fn qa(text: Vec<String>) -> Query {
        Query {
            task: TaskKind::Qa,
            text,
            structured: None,
            topic: None,
        }
    }

    pub fn slot_fill(subject: impl Into<String>, relation: impl Into<String>) -> Query {
        Query {
            task: TaskKind::SlotFill,
            text: Vec::new(),
            structured: Some(SlotQuery {
                subject: subject.into(),
                relation: relation.into(),
            }),
            topic: None,
        }
    }

    pub fn fact_check(text: Vec<String>) -> Query {
        Query {
            task: TaskKind::FactCheck,
            text,
            structured: None,
            topic: None,
        }
    }

    pub fn dialogue(text: Vec<String>, topic: Vec<String>) -> Query {
        Query {
            task: TaskKind::Dialogue,
            text,
            structured: None,
            topic: Some(topic),
        }
    }

    /// The task's primary payload must be present: non-empty text for
    /// text-driven tasks, a structured slot query for slot filling.
    pub fn validate(&self) -> Result<()> {
        match self.task {
            TaskKind::SlotFill => {
                if self.structured.is_none() {
                    return Err(Error::Empty("structured query"));
                }
            }
            _ => {
                if self.text.is_empty() {
                    return Err(Error::Empty("query text"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KeyKind {
    Dense,
    Terms,
    Pattern,
}

impl KeyKind {
    pub fn name(self) -> &'static str {
        match self {
            KeyKind::Dense => "dense",
            KeyKind::Terms => "terms",
            KeyKind::Pattern => "pattern",
        }
    }
}

/// What an encoder hands to a retriever: a dense vector, a sparse term
/// vector, or a triple pattern.
#[derive(Debug, Clone, Serialize)]
pub enum Key {
    Dense(Vec<f32>),
    Terms(TermVector),
    Pattern(TriplePattern),
}

impl Key {
    pub fn kind(&self) -> KeyKind {
        match self {
            Key::Dense(_) => KeyKind::Dense,
            Key::Terms(_) => KeyKind::Terms,
            Key::Pattern(_) => KeyKind::Pattern,
        }
    }
}

/// The stored value half of a retrieved candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Payload {
    Token(String),
    Doc(String),
    Answer(String),
    Triple(Triple),
}

/// One retrieval result: the stored item's own key, its value, and the
/// retriever's score (higher is better).
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub key: Key,
    pub value: Payload,
    pub score: f64,
}

/// What aggregation condenses the candidates into; the model sees exactly
/// one of these per run.
#[derive(Debug, Clone, Serialize)]
pub enum Artefact {
    Distribution(Distribution),
    TextBlock(Vec<String>),
    WeightedVector(Vec<f32>),
    TripleSet(Vec<Triple>),
}

impl Artefact {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Artefact::Distribution(_) => "distribution",
            Artefact::TextBlock(_) => "text block",
            Artefact::WeightedVector(_) => "weighted vector",
            Artefact::TripleSet(_) => "triple set",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Output {
    Distribution(Distribution),
    Tokens(Vec<String>),
    Answer(Option<String>),
    Vector(Vec<f32>),
    Triples(Vec<Triple>),
    Label(String),
}

/// The paper trail of one run: the key that was searched, every candidate
/// that came back, the artefact they became, and anything noteworthy that
/// happened along the way.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub key: Key,
    pub candidates: Vec<Candidate>,
    pub artefact: Artefact,
    pub events: Vec<String>,
}

pub trait Encoder: Send + Sync {
    fn key_kind(&self) -> KeyKind;
    fn encode(&self, query: &Query) -> Result<Key>;
}

pub trait Retriever: Send + Sync {
    fn key_kind(&self) -> KeyKind;
    fn retrieve(&self, key: &Key) -> Result<Vec<Candidate>>;
}

pub trait Aggregator: Send + Sync {
    fn aggregate(&self, candidates: &[Candidate], key: &Key, query: &Query) -> Result<Artefact>;
}

pub trait Model: Send + Sync {
    fn infer(&self, query: &Query, artefact: &Artefact) -> Result<Output>;
}

/// A fully assembled four-stage system plus the descriptor that classifies
/// it.
pub struct Pipeline {
    encoder: Box<dyn Encoder>,
    retriever: Box<dyn Retriever>,
    aggregator: Box<dyn Aggregator>,
    model: Box<dyn Model>,
    descriptor: PipelineDescriptor,
}

impl Pipeline {
    /// Assembles the stages, rejecting encoder/retriever pairs that speak
    /// different key kinds.
    pub fn new(
        encoder: Box<dyn Encoder>,
        retriever: Box<dyn Retriever>,
        aggregator: Box<dyn Aggregator>,
        model: Box<dyn Model>,
        descriptor: PipelineDescriptor,
    ) -> Result<Pipeline> {
        if encoder.key_kind() != retriever.key_kind() {
            return Err(Error::KeyKindMismatch {
                encoder: encoder.key_kind().name(),
                retriever: retriever.key_kind().name(),
            });
        }
        Ok(Pipeline {
            encoder,
            retriever,
            aggregator,
            model,
            descriptor,
        })
    }

    pub fn descriptor(&self) -> &PipelineDescriptor {
        &self.descriptor
    }

    /// Runs all four stages. Errors carry the stage they happened in; the
    /// trace records key, candidates, artefact and events.
    pub fn run(&self, query: &Query) -> Result<(Output, Trace)> {
        query.validate()?;
        let mut events = Vec::new();
        let key = self
            .encoder
            .encode(query)
            .map_err(|e| e.in_stage("encoder"))?;
        if key.kind() != self.retriever.key_kind() {
            return Err(Error::KeyKindMismatch {
                encoder: key.kind().name(),
                retriever: self.retriever.key_kind().name(),
            });
        }
        let candidates = self
            .retriever
            .retrieve(&key)
            .map_err(|e| e.in_stage("retriever"))?;
        events.push(format!("retrieved {} candidates", candidates.len()));
        let artefact = self
            .aggregator
            .aggregate(&candidates, &key, query)
            .map_err(|e| e.in_stage("aggregator"))?;
        let output = self
            .model
            .infer(query, &artefact)
            .map_err(|e| e.in_stage("model"))?;
        Ok((
            output,
            Trace {
                key,
                candidates,
                artefact,
                events,
            },
        ))
    }
}

/// How specific the key should be to this particular query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecificityMode {
    /// Key from the full query payload: maximally specific.
    Sample,
    /// Key from the task alone: every query of a task shares one key.
    Task,
    /// Key from one query facet selected by a [`ClassSelector`].
    Class,
}

/// Which facet of the query the class mode keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSelector {
    Subject,
    Relation,
    Topic,
}

/// Encodes at a chosen specificity by projecting the query before handing
/// it to the encoder. Sample mode passes the query through untouched.
pub fn encode_with_specificity(
    encoder: &dyn Encoder,
    query: &Query,
    mode: SpecificityMode,
    class: Option<ClassSelector>,
) -> Result<Key> {
    match mode {
        SpecificityMode::Sample => encoder.encode(query),
        SpecificityMode::Task => {
            let mut projected = query.clone();
            projected.text = vec![query.task.as_str().to_string()];
            projected.structured = None;
            projected.topic = None;
            encoder.encode(&projected)
        }
        SpecificityMode::Class => {
            let selector = class.ok_or(Error::MissingClassSelector)?;
            let mut projected = query.clone();
            projected.text = match selector {
                ClassSelector::Subject => {
                    let slot = query.structured.as_ref().ok_or(Error::Empty("structured query"))?;
                    crate::data::tokenize(&slot.subject)
                }
                ClassSelector::Relation => {
                    let slot = query.structured.as_ref().ok_or(Error::Empty("structured query"))?;
                    crate::data::tokenize(&slot.relation)
                }
                ClassSelector::Topic => query
                    .topic
                    .clone()
                    .ok_or(Error::Empty("topic"))?,
            };
            projected.structured = None;
            projected.topic = None;
            encoder.encode(&projected)
        }
    }
}

/// Where in the model's computation the artefact enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FusionPoint {
    #[serde(rename = "Early")]
    Early,
    #[serde(rename = "Intermediate")]
    Intermediate,
    #[serde(rename = "Late")]
    Late,
    #[serde(rename = "Very late")]
    VeryLate,
    /// The artefact is the output; there is nothing to fuse into.
    #[serde(rename = "No model")]
    NoModel,
}

impl std::fmt::Display for FusionPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionPoint::Early => "Early",
            FusionPoint::Intermediate => "Intermediate",
            FusionPoint::Late => "Late",
            FusionPoint::VeryLate => "Very late",
            FusionPoint::NoModel => "No model",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FusionMechanism {
    #[serde(rename = "Priming")]
    Priming,
    #[serde(rename = "Key-aware priming")]
    KeyAwarePriming,
    #[serde(rename = "Static convex combination")]
    ConvexCombination,
    #[serde(rename = "Dynamic gating")]
    DynamicGate,
    #[serde(rename = "Masking")]
    Masking,
    #[serde(rename = "Attention sum")]
    AttentionSum,
    #[serde(rename = "None")]
    NoFusion,
}

impl std::fmt::Display for FusionMechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMechanism::Priming => "Priming",
            FusionMechanism::KeyAwarePriming => "Key-aware priming",
            FusionMechanism::ConvexCombination => "Static convex combination",
            FusionMechanism::DynamicGate => "Dynamic gating",
            FusionMechanism::Masking => "Masking",
            FusionMechanism::AttentionSum => "Attention sum",
            FusionMechanism::NoFusion => "None",
        })
    }
}

/// Where the knowledge base's contents come from, relative to the model's
/// own training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KbSource {
    #[serde(rename = "External")]
    External,
    #[serde(rename = "Train-time")]
    TrainTime,
    #[serde(rename = "Dynamic")]
    Dynamic,
    #[serde(rename = "Multiple")]
    Multiple,
}

impl std::fmt::Display for KbSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KbSource::External => "External",
            KbSource::TrainTime => "Train-time",
            KbSource::Dynamic => "Dynamic",
            KbSource::Multiple => "Multiple",
        })
    }
}

/// How a pipeline classifies along the axes that distinguish these systems
/// from each other. The free-text fields describe the key, the stored
/// values, and the aggregation in a phrase each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineDescriptor {
    pub name: String,
    pub fusion_point: FusionPoint,
    pub fusion_mechanism: FusionMechanism,
    pub kb_source: KbSource,
    pub key_type: String,
    pub value_type: String,
    pub aggregation: String,
}

impl std::fmt::Display for PipelineDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "name: {}", self.name)?;
        writeln!(f, "fusion_point: {}", self.fusion_point)?;
        writeln!(f, "fusion_mechanism: {}", self.fusion_mechanism)?;
        writeln!(f, "kb_source: {}", self.kb_source)?;
        writeln!(f, "key_type: {}", self.key_type)?;
        writeln!(f, "value_type: {}", self.value_type)?;
        write!(f, "aggregation: {}", self.aggregation)
    }
}

#[cfg(test)]
mod tests {
    use super::stages::*;
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    #[test]
    fn query_validation_tracks_the_primary_payload() {
        assert!(Query::lm(vec!["a".into()]).validate().is_ok());
        assert!(Query::lm(vec![]).validate().is_err());
        assert!(Query::qa(vec![]).validate().is_err());
        assert!(Query::slot_fill("paris", "capital-of").validate().is_ok());
        let mut broken = Query::slot_fill("paris", "capital-of");
        broken.structured = None;
        assert!(broken.validate().is_err());
    }

    #[test]
    fn mismatched_key_kinds_fail_at_assembly() {
        let result = Pipeline::new(
            Box::new(TermCountEncoder),
            Box::new(EmptyRetriever::new(KeyKind::Dense)),
            Box::new(NullAggregator),
            Box::new(EchoModel),
            test_descriptor(),
        );
        assert!(matches!(
            result,
            Err(Error::KeyKindMismatch {
                encoder: "terms",
                retriever: "dense"
            })
        ));
    }

    fn test_descriptor() -> PipelineDescriptor {
        PipelineDescriptor {
            name: "test".into(),
            fusion_point: FusionPoint::Early,
            fusion_mechanism: FusionMechanism::Priming,
            kb_source: KbSource::External,
            key_type: "terms".into(),
            value_type: "docs".into(),
            aggregation: "concat".into(),
        }
    }

    #[test]
    fn empty_kb_pipeline_returns_the_query_unchanged() {
        let pipeline = Pipeline::new(
            Box::new(TermCountEncoder),
            Box::new(EmptyRetriever::new(KeyKind::Terms)),
            Box::new(ConcatTextAggregator::new(Arc::new(BTreeMap::new()))),
            Box::new(PrimingModel),
            test_descriptor(),
        )
        .unwrap();
        let query = Query::qa(vec!["hello".into(), "there".into()]);
        let (output, trace) = pipeline.run(&query).unwrap();
        match output {
            Output::Tokens(tokens) => assert_eq!(tokens, query.text),
            other => panic!("unexpected output {other:?}"),
        }
        assert!(trace.candidates.is_empty());
        assert_eq!(trace.key.kind(), KeyKind::Terms);
        assert_eq!(trace.events, ["retrieved 0 candidates"]);
        assert!(pipeline.run(&Query::qa(vec![])).is_err());
    }

    #[test]
    fn stage_errors_name_their_stage() {
        // An aggregator that needs candidates, given an empty KB.
        let vocab = crate::backbone::Vocabulary::from_corpus(&[vec!["a".to_string()]]);
        let pipeline = Pipeline::new(
            Box::new(TermCountEncoder),
            Box::new(EmptyRetriever::new(KeyKind::Terms)),
            Box::new(NeighborSoftmaxAggregator::new(Arc::new(vocab))),
            Box::new(EchoModel),
            test_descriptor(),
        )
        .unwrap();
        let err = pipeline.run(&Query::lm(vec!["a".into()])).unwrap_err();
        assert!(matches!(
            err,
            Error::Stage {
                stage: "aggregator",
                ..
            }
        ));
    }

    #[test]
    fn specificity_modes_collapse_keys_as_promised() {
        let encoder = TermCountEncoder;
        let q1 = Query::qa(vec!["first".into(), "question".into()]);
        let q2 = Query::qa(vec!["another".into(), "one".into()]);

        let sample1 = encode_with_specificity(&encoder, &q1, SpecificityMode::Sample, None).unwrap();
        let sample2 = encode_with_specificity(&encoder, &q2, SpecificityMode::Sample, None).unwrap();
        assert_ne!(as_terms(&sample1), as_terms(&sample2));

        let task1 = encode_with_specificity(&encoder, &q1, SpecificityMode::Task, None).unwrap();
        let task2 = encode_with_specificity(&encoder, &q2, SpecificityMode::Task, None).unwrap();
        assert_eq!(as_terms(&task1), as_terms(&task2));

        let s1 = Query::slot_fill("paris", "capital-of");
        let mut s1_text = s1.clone();
        s1_text.text = vec!["ignored".into()];
        let s2 = Query::slot_fill("berlin", "capital-of");
        let c1 = encode_with_specificity(
            &encoder,
            &s1_text,
            SpecificityMode::Class,
            Some(ClassSelector::Relation),
        )
        .unwrap();
        let c2 = encode_with_specificity(
            &encoder,
            &s2,
            SpecificityMode::Class,
            Some(ClassSelector::Relation),
        )
        .unwrap();
        assert_eq!(as_terms(&c1), as_terms(&c2));

        assert!(matches!(
            encode_with_specificity(&encoder, &q1, SpecificityMode::Class, None),
            Err(Error::MissingClassSelector)
        ));
        assert!(encode_with_specificity(
            &encoder,
            &q1,
            SpecificityMode::Class,
            Some(ClassSelector::Topic)
        )
        .is_err());
    }

    fn as_terms(key: &Key) -> &TermVector {
        match key {
            Key::Terms(tv) => tv,
            other => panic!("expected terms key, got {:?}", other.kind()),
        }
    }

    #[test]
    fn descriptor_display_is_a_stable_text_record() {
        let d = PipelineDescriptor {
            name: "knn-lm".into(),
            fusion_point: FusionPoint::VeryLate,
            fusion_mechanism: FusionMechanism::ConvexCombination,
            kb_source: KbSource::TrainTime,
            key_type: "Prefix embd., L2".into(),
            value_type: "Target word".into(),
            aggregation: "Softmax".into(),
        };
        let text = d.to_string();
        assert_eq!(
            text,
            "name: knn-lm\n\
             fusion_point: Very late\n\
             fusion_mechanism: Static convex combination\n\
             kb_source: Train-time\n\
             key_type: Prefix embd., L2\n\
             value_type: Target word\n\
             aggregation: Softmax"
        );
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["fusion_point"], "Very late");
        assert_eq!(json["kb_source"], "Train-time");
    }
}
