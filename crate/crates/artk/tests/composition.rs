//! Cross-module tests: systems assembled from generic pipeline stages must
//! behave exactly like their hand-wired counterparts, and the pipeline
//! contract (key-kind checks, stage isolation, stage-tagged errors,
//! specificity projection) must hold for real stage implementations, not
//! just the toy ones in the unit tests.

use std::sync::Arc;

use artk::backbone::{NGramLm, PrefixEmbedder};
use artk::error::Error;
use artk::kb::MemorizedKb;
use artk::pipeline::stages::{
    ConvexLmModel, DenseKnnRetriever, NoModel, NullAggregator, NeighborSoftmaxAggregator,
    PayloadKind, PrefixKeyEncoder, TermCountEncoder,
};
use artk::pipeline::{
    encode_with_specificity, ClassSelector, Encoder, FusionMechanism, FusionPoint, KbSource, Key,
    Output, Pipeline, PipelineDescriptor, Query, SpecificityMode,
};
use artk::systems::lm::knn_lm_step;

const DIM: usize = 16;
const SEED: u64 = 11;
const NEIGHBORS: usize = 8;
const LAMBDA: f64 = 0.35;

fn corpus() -> Vec<Vec<String>> {
    [
        "the cat sat on the mat",
        "the dog sat on the rug",
        "the cat chased the dog",
        "a bird flew over the mat",
        "the dog chased a bird",
        "a cat slept near the rug",
    ]
    .iter()
    .map(|s| s.split_whitespace().map(str::to_owned).collect())
    .collect()
}

fn backbone(corpus: &[Vec<String>]) -> Arc<NGramLm> {
    Arc::new(NGramLm::train(corpus, 2, 0.1).unwrap())
}

fn memorized(corpus: &[Vec<String>]) -> MemorizedKb {
    let embedder = PrefixEmbedder::new(DIM, 0.7, SEED).unwrap();
    MemorizedKb::build(corpus, embedder).unwrap()
}

fn knn_lm_descriptor() -> PipelineDescriptor {
    PipelineDescriptor {
        name: "knn-lm".into(),
        fusion_point: FusionPoint::VeryLate,
        fusion_mechanism: FusionMechanism::ConvexCombination,
        kb_source: KbSource::TrainTime,
        key_type: "Prefix embd., L2".into(),
        value_type: "Target word".into(),
        aggregation: "Softmax".into(),
    }
}

/// The kNN-LM assembled out of generic stages, sharing the index and
/// backbone with the direct implementation.
fn assemble_knn_lm(lm: &Arc<NGramLm>, kb: &MemorizedKb, lambda: f64) -> Pipeline {
    let embedder = Arc::new(kb.embedder().clone());
    let index = Arc::new(kb.index().clone());
    let vocab = Arc::new(lm.vocab().clone());
    Pipeline::new(
        Box::new(PrefixKeyEncoder::new(embedder)),
        Box::new(DenseKnnRetriever::new(index, NEIGHBORS, PayloadKind::Token)),
        Box::new(NeighborSoftmaxAggregator::new(vocab)),
        Box::new(ConvexLmModel::new(Arc::clone(lm), lambda)),
        knn_lm_descriptor(),
    )
    .unwrap()
}

fn prefix() -> Vec<String> {
    vec!["the".to_string(), "cat".to_string()]
}

#[test]
fn assembled_knn_lm_matches_the_direct_step() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    let pipeline = assemble_knn_lm(&lm, &kb, LAMBDA);
    let (output, trace) = pipeline.run(&Query::lm(prefix())).unwrap();
    let direct = knn_lm_step(&lm, &kb, &prefix(), LAMBDA, NEIGHBORS).unwrap();

    // Same index contents, same softmax, same interpolation, in the same
    // order: the two paths must agree bitwise, not just approximately.
    let Output::Distribution(assembled) = output else {
        panic!("knn-lm assembly should output a distribution");
    };
    assert_eq!(assembled.probs(), direct.p_m.probs());

    // The trace layers must line up too: same key, same candidates in the
    // same order, same pooled artefact.
    let direct_trace = direct.trace.unwrap();
    assert_eq!(
        serde_json::to_string(&trace.key).unwrap(),
        serde_json::to_string(&direct_trace.key).unwrap()
    );
    assert_eq!(
        serde_json::to_string(&trace.candidates).unwrap(),
        serde_json::to_string(&direct_trace.candidates).unwrap()
    );
    assert_eq!(trace.candidates.len(), NEIGHBORS);
    assert_eq!(
        serde_json::to_string(&trace.artefact).unwrap(),
        serde_json::to_string(&direct_trace.artefact).unwrap()
    );
}

#[test]
fn lambda_zero_assembly_is_the_backbone_bitwise() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    let pipeline = assemble_knn_lm(&lm, &kb, 0.0);
    let (output, _) = pipeline.run(&Query::lm(prefix())).unwrap();
    let Output::Distribution(got) = output else {
        panic!("expected a distribution");
    };
    assert_eq!(got.probs(), lm.next_distribution(&prefix()).probs());
}

#[test]
fn identical_assemblies_run_identically() {
    let run = || {
        let corpus = corpus();
        let lm = backbone(&corpus);
        let kb = memorized(&corpus);
        let pipeline = assemble_knn_lm(&lm, &kb, LAMBDA);
        let (output, trace) = pipeline.run(&Query::lm(prefix())).unwrap();
        (
            serde_json::to_string(&output).unwrap(),
            serde_json::to_string(&trace).unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn assembly_rejects_mismatched_key_kinds() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    let Err(err) = Pipeline::new(
        Box::new(TermCountEncoder),
        Box::new(DenseKnnRetriever::new(
            Arc::new(kb.index().clone()),
            NEIGHBORS,
            PayloadKind::Token,
        )),
        Box::new(NeighborSoftmaxAggregator::new(Arc::new(lm.vocab().clone()))),
        Box::new(ConvexLmModel::new(Arc::clone(&lm), LAMBDA)),
        knn_lm_descriptor(),
    ) else {
        panic!("mismatched key kinds must not assemble");
    };

    match err {
        Error::KeyKindMismatch { encoder, retriever } => {
            assert_eq!(encoder, "terms");
            assert_eq!(retriever, "dense");
        }
        other => panic!("expected a key kind mismatch, got {other}"),
    }
}

#[test]
fn aggregator_swap_leaves_upstream_stages_untouched() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    let (_, full_trace) = assemble_knn_lm(&lm, &kb, LAMBDA)
        .run(&Query::lm(prefix()))
        .unwrap();

    let nulled = Pipeline::new(
        Box::new(PrefixKeyEncoder::new(Arc::new(kb.embedder().clone()))),
        Box::new(DenseKnnRetriever::new(
            Arc::new(kb.index().clone()),
            NEIGHBORS,
            PayloadKind::Token,
        )),
        Box::new(NullAggregator),
        Box::new(NoModel),
        knn_lm_descriptor(),
    )
    .unwrap();
    let (output, null_trace) = nulled.run(&Query::lm(prefix())).unwrap();

    // Swapping the aggregator must not disturb encoding or retrieval.
    assert_eq!(
        serde_json::to_string(&full_trace.key).unwrap(),
        serde_json::to_string(&null_trace.key).unwrap()
    );
    assert_eq!(
        serde_json::to_string(&full_trace.candidates).unwrap(),
        serde_json::to_string(&null_trace.candidates).unwrap()
    );
    // An empty text block through NoModel is an absent answer.
    assert!(matches!(output, Output::Answer(None)));
}

#[test]
fn model_errors_carry_their_stage() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    // NullAggregator emits a text block, which convex fusion cannot use.
    let broken = Pipeline::new(
        Box::new(PrefixKeyEncoder::new(Arc::new(kb.embedder().clone()))),
        Box::new(DenseKnnRetriever::new(
            Arc::new(kb.index().clone()),
            NEIGHBORS,
            PayloadKind::Token,
        )),
        Box::new(NullAggregator),
        Box::new(ConvexLmModel::new(Arc::clone(&lm), LAMBDA)),
        knn_lm_descriptor(),
    )
    .unwrap();

    let err = broken.run(&Query::lm(prefix())).unwrap_err();
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "model");
            assert!(matches!(*source, Error::BadInput(_)));
        }
        other => panic!("expected a stage-tagged error, got {other}"),
    }
}

#[test]
fn empty_queries_are_rejected_before_any_stage_runs() {
    let corpus = corpus();
    let lm = backbone(&corpus);
    let kb = memorized(&corpus);

    let err = assemble_knn_lm(&lm, &kb, LAMBDA)
        .run(&Query::lm(Vec::new()))
        .unwrap_err();
    // Validation failures are not stage failures: no stage ever saw the
    // query.
    assert!(matches!(err, Error::Empty("query text")));
}

fn key_json(key: &Key) -> String {
    serde_json::to_string(key).unwrap()
}

#[test]
fn task_specificity_collapses_all_queries_of_a_task_to_one_key() {
    let encoder = TermCountEncoder;
    let a = Query::lm(vec!["the".into(), "cat".into()]);
    let b = Query::lm(vec!["a".into(), "completely".into(), "different".into(), "prefix".into()]);

    let key_a = encode_with_specificity(&encoder, &a, SpecificityMode::Task, None).unwrap();
    let key_b = encode_with_specificity(&encoder, &b, SpecificityMode::Task, None).unwrap();
    assert_eq!(key_json(&key_a), key_json(&key_b));

    // Sample mode keeps the payload, so the same two queries separate.
    let sample_a = encode_with_specificity(&encoder, &a, SpecificityMode::Sample, None).unwrap();
    let sample_b = encode_with_specificity(&encoder, &b, SpecificityMode::Sample, None).unwrap();
    assert_ne!(key_json(&sample_a), key_json(&sample_b));
    assert_eq!(key_json(&sample_a), key_json(&encoder.encode(&a).unwrap()));
}

#[test]
fn class_specificity_keys_on_the_selected_facet() {
    let encoder = TermCountEncoder;

    let slot = Query::slot_fill("marie curie", "born-in");
    let by_subject = encode_with_specificity(
        &encoder,
        &slot,
        SpecificityMode::Class,
        Some(ClassSelector::Subject),
    )
    .unwrap();
    assert_eq!(
        key_json(&by_subject),
        key_json(
            &encoder
                .encode(&Query::lm(vec!["marie".into(), "curie".into()]))
                .unwrap()
        )
    );

    let dialogue = Query::dialogue(
        vec!["tell".into(), "me".into(), "more".into()],
        vec!["solar".into(), "power".into()],
    );
    let by_topic = encode_with_specificity(
        &encoder,
        &dialogue,
        SpecificityMode::Class,
        Some(ClassSelector::Topic),
    )
    .unwrap();
    assert_eq!(
        key_json(&by_topic),
        key_json(
            &encoder
                .encode(&Query::lm(vec!["solar".into(), "power".into()]))
                .unwrap()
        )
    );

    // Class mode without a selector is a caller bug, reported as such.
    let err =
        encode_with_specificity(&encoder, &dialogue, SpecificityMode::Class, None).unwrap_err();
    assert!(matches!(err, Error::MissingClassSelector));
}
