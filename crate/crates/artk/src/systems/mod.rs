//! Reference systems assembled from the crate's stages: language models
//! augmented from memorized, cached and symbolic knowledge bases, two QA
//! retrievers, iterative multi-hop retrieval, dialogue passage selection,
//! and claim checking.
//!
//! Each system registers a [`PipelineDescriptor`] here, which pins how it
//! classifies along the axes that actually distinguish these architectures:
//! where fusion happens, by what mechanism, and where the knowledge base's
//! contents come from.

pub mod dialogue;
pub mod factcheck;
pub mod lm;
pub mod qa;

pub use dialogue::{Wizards, WizardsSelection, WIZARDS_POOL};
pub use factcheck::{
    Bm25Relevance, FactLabel, Fakta, FaktaOutcome, NeutralStance, RelevanceHook, Stance,
    StanceHook,
};
pub use lm::{
    fit_scalar_gate, knn_lm_step, BaseLm, CacheLm, GatedLm, Kglm, KglmDecision, KglmStepResult,
    KnnLm, LmStepResult, LmStepper, TokenSource, DEFAULT_CACHE_CAPACITY, DEFAULT_GATE_GRID,
    DEFAULT_LAMBDA, DEFAULT_THETA, GATED_LM_KEY_DIM, GATED_LM_NEIGHBORS, KNN_LM_KEY_DIM,
    KNN_LM_NEIGHBORS,
};
pub use qa::{
    pullnet_lite, DprQa, NnQa, OverlapSpanScorer, PullnetConfig, PullnetOutcome, QaResult,
    QaScores, SpanScore, SpanScorer, DEFAULT_MAX_SPAN, DEFAULT_PASSAGES,
};

use crate::error::{Error, Result};
use crate::pipeline::{FusionMechanism, FusionPoint, KbSource, PipelineDescriptor};

/// Every named system this crate ships.
pub const PIPELINE_NAMES: [&str; 9] = [
    "knn-lm",
    "cache-lm",
    "gated-lm",
    "kg-lm",
    "dpr-qa",
    "nn-qa",
    "pullnet-lite",
    "wizards",
    "fakta",
];

/// The registry of system classifications. Unknown names are an error, not
/// a panic, since they usually arrive from the command line.
pub fn descriptor(name: &str) -> Result<PipelineDescriptor> {
    let (point, mechanism, source, key, value, aggregation) = match name {
        "knn-lm" => (
            FusionPoint::VeryLate,
            FusionMechanism::ConvexCombination,
            KbSource::TrainTime,
            "Prefix embd., L2",
            "Target word",
            "Softmax",
        ),
        "cache-lm" => (
            FusionPoint::VeryLate,
            FusionMechanism::ConvexCombination,
            KbSource::Dynamic,
            "Prefix embd., inner product",
            "Target word",
            "Softmax",
        ),
        "gated-lm" => (
            FusionPoint::Late,
            FusionMechanism::DynamicGate,
            KbSource::TrainTime,
            "Prefix encoding, inner product",
            "Target word",
            "Softmax sum",
        ),
        "kg-lm" => (
            FusionPoint::Intermediate,
            FusionMechanism::Masking,
            KbSource::External,
            "Entity+relation, discrete struct.",
            "Matching entity",
            "None",
        ),
        "dpr-qa" => (
            FusionPoint::Early,
            FusionMechanism::Priming,
            KbSource::External,
            "Passage embd., inner product",
            "Passages",
            "None",
        ),
        "nn-qa" => (
            FusionPoint::NoModel,
            FusionMechanism::NoFusion,
            KbSource::TrainTime,
            "Passage embd., inner product",
            "Answers",
            "None",
        ),
        "pullnet-lite" => (
            FusionPoint::Early,
            FusionMechanism::NoFusion,
            KbSource::Multiple,
            "Entities",
            "Docs and Facts",
            "Iterative join",
        ),
        "wizards" => (
            FusionPoint::Intermediate,
            FusionMechanism::AttentionSum,
            KbSource::External,
            "Context+topic, inverted index",
            "Passages",
            "Attention (topic)",
        ),
        "fakta" => (
            FusionPoint::Early,
            FusionMechanism::Priming,
            KbSource::External,
            "Condensed query",
            "Docs",
            "Re-ranking, Filtering",
        ),
        other => return Err(Error::UnknownPipeline(other.to_owned())),
    };
    Ok(PipelineDescriptor {
        name: name.to_owned(),
        fusion_point: point,
        fusion_mechanism: mechanism,
        kb_source: source,
        key_type: key.to_owned(),
        value_type: value.to_owned(),
        aggregation: aggregation.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_pipeline_has_a_descriptor() {
        for name in PIPELINE_NAMES {
            let d = descriptor(name).unwrap();
            assert_eq!(d.name, name);
        }
        assert!(matches!(
            descriptor("bert"),
            Err(Error::UnknownPipeline(_))
        ));
    }
}
