//! Abstract corpus ingestion: loading, title scoping, relevance validation
//! and rule-based sentence splitting.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{Gateway, PromptContext, StructuredReply};

/// One publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractRecord {
    pub id: String,
    pub title: String,
    pub text: String,
    pub first_author: String,
    pub year: i32,
    pub keywords: Vec<String>,
    pub url: String,
    pub citation_count: u64,
}

const REQUIRED_FIELDS: [&str; 8] = [
    "id",
    "title",
    "text",
    "first_author",
    "year",
    "keywords",
    "url",
    "citation_count",
];

impl AbstractRecord {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, message: &str| Error::InvalidField {
            id: self.id.clone(),
            field: field.to_string(),
            message: message.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if self.title.trim().is_empty() {
            return Err(invalid("title", "must not be empty"));
        }
        if self.text.trim().is_empty() {
            return Err(invalid("text", "must not be empty"));
        }
        if !(1000..=3000).contains(&self.year) {
            return Err(invalid("year", "must lie within [1000, 3000]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_abstracts: usize,
    pub total_words: usize,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub per_pattern_counts: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn compute(records: &[AbstractRecord]) -> Self {
        CorpusStats {
            n_abstracts: records.len(),
            total_words: records.iter().map(|r| word_count(&r.text)).sum(),
            year_min: records.iter().map(|r| r.year).min(),
            year_max: records.iter().map(|r| r.year).max(),
            per_pattern_counts: BTreeMap::new(),
        }
    }
}

/// Whitespace-token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub records: Vec<AbstractRecord>,
    pub stats: CorpusStats,
}

/// Loads a JSON Lines corpus. Any malformed line or invalid record aborts the
/// load with an error naming the line or record.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_corpus(&content, path)?;
    let stats = CorpusStats::compute(&records);
    Ok(Corpus { records, stats })
}

fn parse_corpus(content: &str, path: &Path) -> Result<Vec<AbstractRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;
        let id = obj
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("<line {}>", lineno + 1));
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field) {
                return Err(Error::MissingField {
                    id,
                    field: field.to_string(),
                });
            }
        }
        let record: AbstractRecord = serde_json::from_value(value).map_err(|e| {
            Error::InvalidField {
                id: id.clone(),
                field: "<record>".into(),
                message: e.to_string(),
            }
        })?;
        record.validate()?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records back out in the corpus file format.
pub fn write_corpus(records: &[AbstractRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatternMode {
    /// Case-insensitive substring.
    #[default]
    Substring,
    /// Case-insensitive regular expression.
    Regex,
}

#[derive(Debug, Clone)]
pub struct Scoped {
    pub records: Vec<AbstractRecord>,
    pub per_pattern_counts: BTreeMap<String, usize>,
}

/// Keeps records whose title matches any pattern. A record matching several
/// patterns is kept once but counted under each pattern.
pub fn scope_by_title(
    records: &[AbstractRecord],
    patterns: &[String],
    mode: PatternMode,
) -> Result<Scoped> {
    let matchers: Vec<Box<dyn Fn(&str) -> bool>> = patterns
        .iter()
        .map(|p| -> Result<Box<dyn Fn(&str) -> bool>> {
            match mode {
                PatternMode::Substring => {
                    let needle = p.to_lowercase();
                    Ok(Box::new(move |title: &str| {
                        title.to_lowercase().contains(&needle)
                    }))
                }
                PatternMode::Regex => {
                    let re = RegexBuilder::new(p)
                        .case_insensitive(true)
                        .build()
                        .map_err(|e| Error::Config(format!("bad title pattern `{p}`: {e}")))?;
                    Ok(Box::new(move |title: &str| re.is_match(title)))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut per_pattern_counts: BTreeMap<String, usize> =
        patterns.iter().map(|p| (p.clone(), 0)).collect();
    let mut kept = Vec::new();
    for record in records {
        let mut any = false;
        for (pattern, matches) in patterns.iter().zip(&matchers) {
            if matches(&record.title) {
                *per_pattern_counts.get_mut(pattern).unwrap() += 1;
                any = true;
            }
        }
        if any {
            kept.push(record.clone());
        }
    }
    Ok(Scoped {
        records: kept,
        per_pattern_counts,
    })
}

/// True iff title or text contains a domain keyword and the provider agrees
/// the record is relevant. The provider is not consulted when no keyword is
/// present.
pub fn validate_relevance(
    record: &AbstractRecord,
    domain_keywords: &[String],
    gateway: &Gateway,
) -> Result<bool> {
    if !contains_keyword(record, domain_keywords) {
        return Ok(false);
    }
    let ctx = PromptContext::RelevanceCheck {
        title: record.title.clone(),
        text: record.text.clone(),
    };
    match gateway.ask(&ctx).map_err(|e| e.for_record(&record.id))? {
        StructuredReply::Relevance(yes) => Ok(yes),
        other => Err(Error::Provider(format!(
            "unexpected reply kind {:?}",
            other.kind()
        ))
        .for_record(&record.id)),
    }
}

pub fn contains_keyword(record: &AbstractRecord, domain_keywords: &[String]) -> bool {
    let haystack = format!("{}\n{}", record.title, record.text).to_lowercase();
    domain_keywords
        .iter()
        .filter(|k| !k.trim().is_empty())
        .any(|k| haystack.contains(&k.trim().to_lowercase()))
}

/// Filters records by relevance, consulting the provider with bounded
/// concurrency. Output preserves input order.
pub fn filter_relevant(
    records: &[AbstractRecord],
    domain_keywords: &[String],
    gateway: &Gateway,
) -> Result<Vec<AbstractRecord>> {
    let verdicts = gateway.map_ordered(records, |r| {
        validate_relevance(r, domain_keywords, gateway)
    });
    let mut kept = Vec::new();
    for (record, verdict) in records.iter().zip(verdicts) {
        if verdict? {
            kept.push(record.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub abstract_id: String,
    pub index: usize,
    pub text: String,
}

/// Abbreviations that end in a period without ending a sentence. Matching is
/// case-insensitive against the whitespace-delimited word carrying the period.
#[derive(Debug, Clone)]
pub struct AbbreviationGuard {
    words: HashSet<String>,
}

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "fig.", "figs.", "al.", "eq.", "eqs.", "ref.", "refs.", "vs.", "cf.",
    "approx.", "ca.", "no.", "vol.", "sec.", "ch.", "dr.", "prof.", "mr.", "ms.", "st.",
    "resp.", "max.", "min.", "etc.",
];

impl Default for AbbreviationGuard {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl AbbreviationGuard {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        AbbreviationGuard {
            words: words.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    fn guards(&self, word: &str) -> bool {
        let w = word
            .trim_start_matches(|c: char| matches!(c, '(' | '[' | '"' | '\''))
            .to_lowercase();
        if self.words.contains(&w) {
            return true;
        }
        // Single-letter initials such as "J." in author lists.
        let mut chars = w.chars();
        matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
    }
}

/// Splits an abstract into sentences on `.`, `!` and `?` followed by
/// whitespace or end of text, unless the word ending in `.` is a guarded
/// abbreviation. Terminators stay attached to their sentence.
pub fn split_sentences(abstract_id: &str, text: &str, guard: &AbbreviationGuard) -> Vec<SentenceUnit> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            // Absorb runs like "?!" or "...".
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '!' | '?') {
                j += 1;
            }
            // Closing quotes and brackets belong to the sentence.
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '"' | '\'' | ')' | ']') {
                j += 1;
            }
            let end = chars.get(j + 1).map_or(text.len(), |&(p, _)| p);
            let at_boundary = chars.get(j + 1).is_none_or(|&(_, n)| n.is_whitespace());
            let guarded = c == '.' && j == i && {
                let word_start = text[..pos]
                    .rfind(char::is_whitespace)
                    .map_or(0, |p| p + 1);
                guard.guards(&text[word_start..=pos])
            };
            if at_boundary && !guarded {
                push_sentence(&mut sentences, abstract_id, &text[start..end]);
                start = end;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    push_sentence(&mut sentences, abstract_id, &text[start..]);
    sentences
}

fn push_sentence(out: &mut Vec<SentenceUnit>, abstract_id: &str, raw: &str) {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return;
    }
    out.push(SentenceUnit {
        abstract_id: abstract_id.to_string(),
        index: out.len(),
        text: trimmed.to_string(),
    });
}
