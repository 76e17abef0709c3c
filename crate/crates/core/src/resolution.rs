//! Canonicalization of raw mentions: surface normalization, provider-derived
//! substitution rules and grouping into resolved entities.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{Gateway, PromptContext, StructuredReply};
use crate::ner::{read_jsonl, write_jsonl, EntityMention};
use crate::taxonomy::CategoryType;
use crate::text::tokenize;

pub const DEFAULT_DICTIONARY_CUTOFF: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    NotInText,
    NoLetters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Canonical(String),
    Reject(Rejection),
}

impl Normalized {
    pub fn canonical(self) -> Option<String> {
        match self {
            Normalized::Canonical(s) => Some(s),
            Normalized::Reject(_) => None,
        }
    }
}

/// Words left untouched by singularization.
const UNCOUNTABLE: &[&str] = &[
    "physics", "dynamics", "magnetohydrodynamics", "hydrodynamics", "electrodynamics",
    "thermodynamics", "kinetics", "mechanics", "optics", "electronics", "diagnostics",
    "energetics", "neutronics", "mathematics", "statistics", "economics", "species", "series",
    "apparatus", "news", "gauss", "siemens", "lens", "bias", "gas", "status", "plasma physics",
];

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("gases", "gas"),
    ("biases", "bias"),
    ("buses", "bus"),
    ("statuses", "status"),
    ("analyses", "analysis"),
    ("hypotheses", "hypothesis"),
    ("theses", "thesis"),
    ("crises", "crisis"),
    ("axes", "axis"),
    ("radii", "radius"),
    ("nuclei", "nucleus"),
    ("foci", "focus"),
    ("spectra", "spectrum"),
    ("vertices", "vertex"),
    ("indices", "index"),
    ("matrices", "matrix"),
    ("criteria", "criterion"),
    ("phenomena", "phenomenon"),
];

fn is_acronym(word: &str) -> bool {
    let n = word.chars().count();
    (2..=6).contains(&n)
        && word.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        && word.chars().any(|c| c.is_ascii_uppercase())
}

/// `ELMs` style plurals of acronyms.
fn acronym_plural(word: &str) -> Option<&str> {
    let stem = word.strip_suffix('s')?;
    is_acronym(stem).then_some(stem)
}

pub fn singularize(word: &str) -> String {
    if UNCOUNTABLE.contains(&word) || word.len() <= 3 || !word.is_ascii() {
        return word.to_string();
    }
    if let Some(&(_, s)) = IRREGULAR_PLURALS.iter().find(|(p, _)| *p == word) {
        return s.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "xes", "zzes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// Canonical form of a raw surface. With `sentence`, surfaces that do not
/// occur in it (case-insensitively) are rejected.
pub fn normalize_surface(surface: &str, sentence: Option<&str>) -> Normalized {
    if let Some(sentence) = sentence {
        let raw = surface.trim().to_lowercase();
        if raw.is_empty() || !sentence.to_lowercase().contains(&raw) {
            return Normalized::Reject(Rejection::NotInText);
        }
    }
    let trimmed = surface.trim_matches(|c: char| !c.is_alphanumeric());
    if !trimmed.chars().any(char::is_alphabetic) {
        return Normalized::Reject(Rejection::NoLetters);
    }
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    let last = words.len() - 1;
    let out: Vec<String> = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if is_acronym(w) {
                w.to_string()
            } else if let Some(stem) = acronym_plural(w).filter(|_| i == last) {
                stem.to_string()
            } else if i == last {
                singularize(&w.to_lowercase())
            } else {
                w.to_lowercase()
            }
        })
        .collect();
    let joined = out.join(" ");
    if words.len() > 1 && UNCOUNTABLE.contains(&joined.as_str()) {
        return Normalized::Canonical(trimmed.to_lowercase());
    }
    Normalized::Canonical(joined)
}

/// A mention after normalization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalMention {
    pub canonical: String,
    pub category: CategoryType,
    pub abstract_id: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NormalizationStats {
    pub kept: usize,
    pub rejected_not_in_text: usize,
    pub rejected_no_letters: usize,
}

/// Normalizes every mention against the text of its sentence, looked up by
/// `(abstract_id, sentence_index)`.
pub fn normalize_mentions(
    mentions: &[EntityMention],
    sentence_text: &HashMap<(String, usize), String>,
) -> Result<(Vec<CanonicalMention>, NormalizationStats)> {
    let mut stats = NormalizationStats::default();
    let mut out = Vec::with_capacity(mentions.len());
    for m in mentions {
        let key = (m.abstract_id.clone(), m.sentence_index);
        let text = sentence_text.get(&key).ok_or_else(|| {
            Error::Precondition(format!(
                "mention `{}` points to missing sentence {}#{}",
                m.surface, m.abstract_id, m.sentence_index
            ))
        })?;
        match normalize_surface(&m.surface, Some(text)) {
            Normalized::Canonical(canonical) => {
                stats.kept += 1;
                out.push(CanonicalMention {
                    canonical,
                    category: m.category,
                    abstract_id: m.abstract_id.clone(),
                    sentence_index: m.sentence_index,
                });
            }
            Normalized::Reject(Rejection::NotInText) => stats.rejected_not_in_text += 1,
            Normalized::Reject(Rejection::NoLetters) => stats.rejected_no_letters += 1,
        }
    }
    Ok((out, stats))
}

/// Canonical forms ranked by mention count (descending, then name), cut at `cutoff`.
pub fn entity_dictionary(mentions: &[CanonicalMention], cutoff: usize) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for m in mentions {
        *counts.entry(&m.canonical).or_insert(0) += 1;
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cutoff);
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleOrigin {
    Acronym,
    Chemical,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstitutionRule {
    pub from: String,
    pub to: String,
    pub origin: RuleOrigin,
}

pub fn write_rules(path: &Path, rules: &[SubstitutionRule]) -> Result<()> {
    write_jsonl(path, rules)
}

pub fn read_rules(path: &Path) -> Result<Vec<SubstitutionRule>> {
    read_jsonl(path)
}

/// Asks the provider for acronym expansions and chemical standardizations of
/// the dictionary entries. A proposal survives only if its source is in the
/// dictionary and its target is in the dictionary or made of corpus words.
pub fn build_substitutions(
    dictionary: &[(String, u64)],
    vocabulary: &BTreeSet<String>,
    gateway: &Gateway,
) -> Vec<SubstitutionRule> {
    if dictionary.is_empty() {
        return Vec::new();
    }
    let known: HashMap<&str, u64> = dictionary.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mut proposals = Vec::new();
    for (origin, ctx) in [
        (
            RuleOrigin::Acronym,
            PromptContext::AcronymResolution {
                dictionary: dictionary.to_vec(),
            },
        ),
        (
            RuleOrigin::Chemical,
            PromptContext::ChemicalStandardization {
                dictionary: dictionary.to_vec(),
            },
        ),
    ] {
        match gateway.ask(&ctx) {
            Ok(StructuredReply::Substitutions(pairs)) => {
                proposals.extend(pairs.into_iter().map(|p| (p, origin)))
            }
            Ok(other) => log::warn!("unexpected {} reply to a substitution prompt", other.kind()),
            Err(e) => log::warn!("{origin:?} substitution request failed, continuing without it: {e}"),
        }
    }
    let mut rules = Vec::new();
    for ((from, to), origin) in proposals {
        let from = from.trim().to_string();
        let Some(to) = normalize_surface(&to, None).canonical() else {
            continue;
        };
        if from == to || !known.contains_key(from.as_str()) {
            continue;
        }
        let in_corpus = known.contains_key(to.as_str())
            || tokenize(&to).iter().all(|t| vocabulary.contains(t));
        if !in_corpus {
            log::info!("dropping substitution {from} -> {to}: target unseen in corpus");
            continue;
        }
        rules.push(SubstitutionRule { from, to, origin });
    }
    finalize_rules(rules, &known)
}

/// Resolves conflicting rules for one source (manual first, then the target
/// with the higher count, then the smaller target) and breaks cycles by
/// dropping the lowest-count non-manual rule of each cycle.
pub fn finalize_rules(rules: Vec<SubstitutionRule>, counts: &HashMap<&str, u64>) -> Vec<SubstitutionRule> {
    let count = |s: &str| counts.get(s).copied().unwrap_or(0);
    let mut by_from: BTreeMap<String, SubstitutionRule> = BTreeMap::new();
    for rule in rules {
        if rule.from == rule.to {
            continue;
        }
        let better = |new: &SubstitutionRule, old: &SubstitutionRule| {
            let key = |r: &SubstitutionRule| (r.origin == RuleOrigin::Manual, count(&r.to));
            key(new) > key(old) || (key(new) == key(old) && new.to < old.to)
        };
        match by_from.get(&rule.from) {
            Some(old) if !better(&rule, old) => {}
            _ => {
                by_from.insert(rule.from.clone(), rule);
            }
        }
    }
    loop {
        let map: HashMap<&str, &str> = by_from.values().map(|r| (r.from.as_str(), r.to.as_str())).collect();
        let Some(cycle) = find_cycle(&map) else { break };
        let victim = cycle
            .windows(2)
            .map(|w| &by_from[w[0].as_str()])
            .filter(|r| r.origin != RuleOrigin::Manual)
            .min_by(|a, b| count(&a.from).cmp(&count(&b.from)).then_with(|| b.from.cmp(&a.from)))
            .map(|r| r.from.clone());
        match victim {
            Some(from) => {
                log::warn!("dropping substitution from `{from}` to break a cycle");
                by_from.remove(&from);
            }
            None => break,
        }
    }
    by_from.into_values().collect()
}

/// First cycle found walking from sources in sorted order, as a closed path.
fn find_cycle(map: &HashMap<&str, &str>) -> Option<Vec<String>> {
    let mut starts: Vec<&str> = map.keys().copied().collect();
    starts.sort_unstable();
    let mut done: BTreeSet<&str> = BTreeSet::new();
    for start in starts {
        let mut path: Vec<&str> = Vec::new();
        let mut cur = start;
        loop {
            if done.contains(cur) {
                break;
            }
            if let Some(pos) = path.iter().position(|p| *p == cur) {
                let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
                cycle.push(cur.to_string());
                return Some(cycle);
            }
            path.push(cur);
            match map.get(cur) {
                Some(next) => cur = next,
                None => break,
            }
        }
        done.extend(path);
    }
    None
}

/// Validated rule set: one target per source, no cycles.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    map: HashMap<String, String>,
}

impl RuleSet {
    pub fn new(rules: &[SubstitutionRule]) -> Result<Self> {
        let mut map = HashMap::new();
        for r in rules {
            if let Some(prev) = map.insert(r.from.clone(), r.to.clone()) {
                if prev != r.to {
                    return Err(Error::Precondition(format!(
                        "conflicting substitutions for `{}`: `{prev}` and `{}`",
                        r.from, r.to
                    )));
                }
            }
        }
        let view: HashMap<&str, &str> = map.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        if let Some(cycle) = find_cycle(&view) {
            return Err(Error::Cycle(cycle));
        }
        Ok(RuleSet { map })
    }

    /// Follows rules to a fixpoint.
    pub fn rewrite(&self, form: &str) -> String {
        let mut cur = form;
        for _ in 0..=self.map.len() {
            match self.map.get(cur) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedEntity {
    pub canonical: String,
    pub category: CategoryType,
    pub mention_count: usize,
    /// Distinct `(abstract_id, sentence_index)` pairs, sorted.
    pub sources: Vec<(String, usize)>,
}

/// Rewrites each mention to its fixpoint and groups by final form. The
/// category is a majority vote with taxonomy order breaking ties.
pub fn apply_substitutions(
    mentions: &[CanonicalMention],
    rules: &[SubstitutionRule],
) -> Result<Vec<ResolvedEntity>> {
    let rules = RuleSet::new(rules)?;
    let mut groups: BTreeMap<String, (BTreeMap<CategoryType, usize>, usize, BTreeSet<(String, usize)>)> =
        BTreeMap::new();
    for m in mentions {
        let canonical = rules.rewrite(&m.canonical);
        let g = groups.entry(canonical).or_default();
        *g.0.entry(m.category).or_insert(0) += 1;
        g.1 += 1;
        g.2.insert((m.abstract_id.clone(), m.sentence_index));
    }
    Ok(groups
        .into_iter()
        .map(|(canonical, (votes, mention_count, sources))| {
            let category = votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.rank().cmp(&a.0.rank())))
                .map(|(c, _)| *c)
                .expect("group has a mention");
            ResolvedEntity {
                canonical,
                category,
                mention_count,
                sources: sources.into_iter().collect(),
            }
        })
        .collect())
}

pub fn write_resolved(path: &Path, entities: &[ResolvedEntity]) -> Result<()> {
    write_jsonl(path, entities)
}

pub fn read_resolved(path: &Path) -> Result<Vec<ResolvedEntity>> {
    read_jsonl(path)
}
