//! Zero-shot entity recognition, one sentence per provider call.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceUnit;
use crate::error::{Error, Result};
use crate::llm::{Gateway, PromptContext, StructuredReply};
use crate::taxonomy::CategoryType;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityMention {
    pub surface: String,
    pub category: CategoryType,
    pub abstract_id: String,
    pub sentence_index: usize,
}

/// Mentions for one sentence. Parse failures skip the sentence; provider
/// failures propagate.
pub fn extract_entities(sentence: &SentenceUnit, gateway: &Gateway) -> Result<Vec<EntityMention>> {
    if sentence.text.trim().is_empty() {
        return Err(Error::Precondition(format!(
            "sentence {}#{} is empty",
            sentence.abstract_id, sentence.index
        )));
    }
    let reply = match gateway.ask(&PromptContext::Ner {
        sentence: sentence.text.clone(),
    }) {
        Ok(r) => r,
        Err(e @ Error::Reply { .. }) => {
            log::warn!(
                "skipping sentence {}#{}: {e}",
                sentence.abstract_id,
                sentence.index
            );
            return Ok(Vec::new());
        }
        Err(e) => return Err(e.for_record(&sentence.abstract_id)),
    };
    let StructuredReply::Entities(pairs) = reply else {
        return Ok(Vec::new());
    };
    let mut out: Vec<EntityMention> = Vec::with_capacity(pairs.len());
    for (surface, category) in pairs {
        if out
            .iter()
            .any(|m| m.surface == surface && m.category == category)
        {
            continue;
        }
        out.push(EntityMention {
            surface,
            category,
            abstract_id: sentence.abstract_id.clone(),
            sentence_index: sentence.index,
        });
    }
    Ok(out)
}

/// NER over many sentences, in input order.
pub fn extract_all(sentences: &[SentenceUnit], gateway: &Gateway) -> Result<Vec<EntityMention>> {
    let per_sentence = gateway.map_ordered(sentences, |s| extract_entities(s, gateway));
    let mut out = Vec::new();
    for r in per_sentence {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_mentions(path: &Path, mentions: &[EntityMention]) -> Result<()> {
    write_jsonl(path, mentions)
}

pub fn read_mentions(path: &Path) -> Result<Vec<EntityMention>> {
    read_jsonl(path)
}

pub fn write_sentences(path: &Path, sentences: &[crate::corpus::SentenceUnit]) -> Result<()> {
    write_jsonl(path, sentences)
}

pub fn read_sentences(path: &Path) -> Result<Vec<crate::corpus::SentenceUnit>> {
    read_jsonl(path)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// (predicted, gold) -> count
    pub confusion: BTreeMap<(CategoryType, CategoryType), usize>,
}

pub fn classification_report(sample: &[(EntityMention, CategoryType)]) -> Result<ClassificationReport> {
    if sample.is_empty() {
        return Err(Error::Precondition("classification sample is empty".into()));
    }
    let mut confusion = BTreeMap::new();
    let mut correct = 0;
    for (m, gold) in sample {
        if m.category == *gold {
            correct += 1;
        }
        *confusion.entry((m.category, *gold)).or_insert(0) += 1;
    }
    Ok(ClassificationReport {
        total: sample.len(),
        correct,
        accuracy: correct as f64 / sample.len() as f64,
        confusion,
    })
}
