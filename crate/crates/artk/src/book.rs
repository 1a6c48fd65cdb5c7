//! Binds the guide's chapters in as doc-tests: every fenced code block in
//! `book/src` is compiled (and run, unless marked `no_run`) by
//! `cargo test --doc`, so the book cannot drift from the library.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(pipeline, "../../../book/src/pipeline.md");
chapter!(backbones, "../../../book/src/backbones.md");
chapter!(dense_retrieval, "../../../book/src/dense-retrieval.md");
chapter!(sparse_retrieval, "../../../book/src/sparse-retrieval.md");
chapter!(knowledge_sources, "../../../book/src/knowledge-sources.md");
chapter!(fusion, "../../../book/src/fusion.md");
chapter!(language_models, "../../../book/src/language-models.md");
chapter!(question_answering, "../../../book/src/question-answering.md");
chapter!(dialogue_and_facts, "../../../book/src/dialogue-and-facts.md");
chapter!(evaluation, "../../../book/src/evaluation.md");
