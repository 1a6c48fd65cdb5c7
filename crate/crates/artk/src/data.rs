//! Input records and file readers.
//!
//! Two on-disk conventions cover everything: JSON Lines for structured
//! records, and plain UTF-8 text with one document per line for corpora.
//! Knowledge graphs come as tab-separated `parent<TAB>relation<TAB>entity`
//! triples with `#` comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whitespace tokenization. The only tokenizer in the crate.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// A document: retrieval passages, wiki pages, evidence pool entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

/// A question paired with its reference answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaRecord {
    pub question: String,
    pub answer: String,
    /// Document known to contain the answer, when the dataset has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_doc: Option<String>,
}

/// A claim to verify, with per-token part-of-speech tags and linked entities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim: String,
    pub tags: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
}

/// A dialogue context: utterances so far plus the conversation topic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub history: Vec<String>,
    pub topic: String,
}

/// Reads a JSON Lines file, one record per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::BadInput(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSON Lines.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a plain-text corpus: one document per line, blank lines skipped.
pub fn read_text_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = File::open(path)?;
    let mut corpus = Vec::new();
    for line in BufReader::new(file).lines() {
        let tokens = tokenize(&line?);
        if !tokens.is_empty() {
            corpus.push(tokens);
        }
    }
    Ok(corpus)
}

/// Reads a corpus from either plain text or JSON Lines document records,
/// dispatching on the `.jsonl` extension.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let docs: Vec<DocRecord> = read_jsonl(path)?;
        Ok(docs.iter().map(|d| tokenize(&d.text)).collect())
    } else {
        read_text_corpus(path)
    }
}
