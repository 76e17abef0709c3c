use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};
use crate::taxonomy::CategoryType;
use crate::text::content_tokens;

use super::prompt::{section, Prompt};
use super::{LlmProvider, PromptKind};

const BUNDLED_GAZETTEER: &str = include_str!("../../data/stub/gazetteer.tsv");
const BUNDLED_RELATIONS: &str = include_str!("../../data/stub/relation_patterns.tsv");
const BUNDLED_CHEMICALS: &str = include_str!("../../data/stub/chemicals.tsv");
const BUNDLED_KEYWORDS: &str = include_str!("../../data/stub/keywords.txt");

/// Lookup tables that drive the deterministic offline provider.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StubTables {
    pub gazetteer: Vec<(String, CategoryType)>,
    /// Unordered entity pairs with the predicate that links them.
    pub relation_patterns: Vec<(String, String, String)>,
    pub chemicals: Vec<(String, String)>,
    pub keywords: Vec<String>,
}

fn rows<'a>(
    text: &'a str,
    path: &'a str,
    columns: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.lines().enumerate().filter_map(move |(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != columns || fields.iter().any(|f| f.is_empty()) {
            return Some(Err(Error::Malformed {
                path: path.into(),
                line: i + 1,
                message: format!("expected {columns} tab-separated fields"),
            }));
        }
        Some(Ok((i + 1, fields)))
    })
}

impl StubTables {
    /// Tables for the bundled fusion mini-corpus.
    pub fn bundled() -> Self {
        Self::parse(
            BUNDLED_GAZETTEER,
            BUNDLED_RELATIONS,
            BUNDLED_CHEMICALS,
            BUNDLED_KEYWORDS,
            "<bundled>",
        )
        .expect("bundled stub tables are well-formed")
    }

    /// Reads `gazetteer.tsv`, `relation_patterns.tsv`, `chemicals.tsv` and
    /// `keywords.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        Self::parse(
            &read("gazetteer.tsv")?,
            &read("relation_patterns.tsv")?,
            &read("chemicals.tsv")?,
            &read("keywords.txt")?,
            &dir.display().to_string(),
        )
    }

    fn parse(
        gazetteer: &str,
        relations: &str,
        chemicals: &str,
        keywords: &str,
        origin: &str,
    ) -> Result<Self> {
        let gpath = format!("{origin}/gazetteer.tsv");
        let mut tables = StubTables::default();
        for row in rows(gazetteer, &gpath, 2) {
            let (line, f) = row?;
            let category = CategoryType::from_name(f[1]).ok_or_else(|| Error::Malformed {
                path: gpath.clone().into(),
                line,
                message: format!("unknown category `{}`", f[1]),
            })?;
            tables.gazetteer.push((f[0].to_string(), category));
        }
        let rpath = format!("{origin}/relation_patterns.tsv");
        for row in rows(relations, &rpath, 3) {
            let (_, f) = row?;
            tables
                .relation_patterns
                .push((f[0].to_string(), f[1].to_string(), f[2].to_string()));
        }
        let cpath = format!("{origin}/chemicals.tsv");
        for row in rows(chemicals, &cpath, 2) {
            let (_, f) = row?;
            tables.chemicals.push((f[0].to_string(), f[1].to_string()));
        }
        tables.keywords = keywords
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Ok(tables)
    }
}

fn case_sensitive(term: &str) -> bool {
    term.chars().count() <= 2 || !term.chars().any(|c| c.is_lowercase())
}

fn is_boundary(text: &[u8], at: usize) -> bool {
    at >= text.len() || !text[at].is_ascii_alphanumeric() && text[at] < 0x80
}

/// Longest-first, non-overlapping, word-bounded gazetteer matches in text
/// order, as `(start, end, index)`. Plural `s`/`es` endings are absorbed.
pub(crate) fn gazetteer_matches(
    text: &str,
    gazetteer: &[(String, CategoryType)],
) -> Vec<(usize, usize, usize)> {
    let bytes = text.as_bytes();
    let lower = text.to_ascii_lowercase();
    let mut candidates = Vec::new();
    for (idx, (term, _)) in gazetteer.iter().enumerate() {
        if term.is_empty() {
            continue;
        }
        let (hay, needle) = if case_sensitive(term) {
            (text, term.clone())
        } else {
            (lower.as_str(), term.to_ascii_lowercase())
        };
        let mut from = 0;
        while let Some(pos) = hay[from..].find(&needle) {
            let start = from + pos;
            let mut end = start + needle.len();
            from = start + 1;
            while from < hay.len() && !hay.is_char_boundary(from) {
                from += 1;
            }
            if start > 0 && !is_boundary(bytes, start - 1) {
                continue;
            }
            if !is_boundary(bytes, end) {
                let rest = &lower[end..];
                let plural = if rest.starts_with("es") && is_boundary(bytes, end + 2) {
                    2
                } else if rest.starts_with('s') && is_boundary(bytes, end + 1) {
                    1
                } else {
                    continue;
                };
                end += plural;
            }
            candidates.push((start, end, idx));
        }
    }
    candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
    let mut taken: Vec<(usize, usize, usize)> = Vec::new();
    for c in candidates {
        if taken.iter().all(|t| c.1 <= t.0 || c.0 >= t.1) {
            taken.push(c);
        }
    }
    taken.sort();
    taken
}

fn dictionary_entries(prompt: &str) -> Vec<String> {
    section(prompt, "DICTIONARY")
        .unwrap_or("")
        .lines()
        .filter_map(|l| {
            let l = l.strip_prefix("- ")?;
            let open = l.rfind(" (")?;
            Some(l[..open].to_string())
        })
        .collect()
}

fn initials(phrase: &str) -> String {
    phrase
        .split([' ', '-'])
        .filter(|w| !w.is_empty())
        .filter_map(|w| w.chars().next())
        .flat_map(char::to_uppercase)
        .collect()
}

fn looks_like_acronym(term: &str) -> bool {
    let n = term.chars().count();
    (2..=6).contains(&n)
        && term.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        && term.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

/// Deterministic provider that answers every prompt kind from lookup tables.
#[derive(Debug, Clone)]
pub struct StubProvider {
    tables: StubTables,
}

impl StubProvider {
    pub fn new(tables: StubTables) -> Self {
        StubProvider { tables }
    }

    pub fn tables(&self) -> &StubTables {
        &self.tables
    }

    fn relevance(&self, prompt: &str) -> serde_json::Value {
        let text = format!(
            "{} {}",
            section(prompt, "TITLE").unwrap_or(""),
            section(prompt, "TEXT").unwrap_or("")
        )
        .to_lowercase();
        let hit = self
            .tables
            .keywords
            .iter()
            .any(|k| text.contains(&k.to_lowercase()));
        json!({ "relevant": if hit { "yes" } else { "no" } })
    }

    fn ner(&self, prompt: &str) -> serde_json::Value {
        let sentence = section(prompt, "SENTENCE").unwrap_or("");
        let entities: Vec<_> = gazetteer_matches(sentence, &self.tables.gazetteer)
            .into_iter()
            .map(|(s, e, idx)| {
                json!({ "entity": &sentence[s..e], "category": self.tables.gazetteer[idx].1.name() })
            })
            .collect();
        json!({ "entities": entities })
    }

    fn acronyms(&self, prompt: &str) -> serde_json::Value {
        let entries = dictionary_entries(prompt);
        let mut subs = Vec::new();
        for acronym in entries.iter().filter(|e| looks_like_acronym(e)) {
            let letters: String = acronym.chars().filter(|c| c.is_ascii_alphabetic()).collect();
            if let Some(expanded) = entries
                .iter()
                .find(|e| e.contains([' ', '-']) && initials(e) == letters)
            {
                subs.push(json!({ "from": acronym, "to": expanded }));
            }
        }
        json!({ "substitutions": subs })
    }

    fn chemicals(&self, prompt: &str) -> serde_json::Value {
        let subs: Vec<_> = dictionary_entries(prompt)
            .into_iter()
            .filter_map(|entry| {
                self.tables
                    .chemicals
                    .iter()
                    .find(|(from, _)| from.eq_ignore_ascii_case(&entry))
                    .map(|(_, to)| json!({ "from": entry, "to": to }))
            })
            .collect();
        json!({ "substitutions": subs })
    }

    fn relation(&self, prompt: &str) -> serde_json::Value {
        let subject = section(prompt, "SUBJECT").unwrap_or("").trim();
        let object = section(prompt, "OBJECT").unwrap_or("").trim();
        let predicate = self
            .tables
            .relation_patterns
            .iter()
            .find(|(a, b, _)| {
                (a.eq_ignore_ascii_case(subject) && b.eq_ignore_ascii_case(object))
                    || (a.eq_ignore_ascii_case(object) && b.eq_ignore_ascii_case(subject))
            })
            .map(|(_, _, p)| p.as_str())
            .unwrap_or("co-occurs with");
        json!({ "subject": subject, "predicate": predicate, "object": object })
    }

    fn cypher(&self, prompt: &str) -> serde_json::Value {
        let question = section(prompt, "QUESTION").unwrap_or("");
        let mut terms: Vec<String> = Vec::new();
        for (s, e, _) in gazetteer_matches(question, &self.tables.gazetteer) {
            let t = question[s..e].replace(['"', '\\'], "");
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        let multi_hop = terms.len() >= 2;
        if terms.is_empty() {
            terms = content_tokens(question).into_iter().take(6).collect();
        }
        let search = terms.join(" ");
        let query = if multi_hop {
            format!(
                "CALL fulltext('sentences', \"{search}\") YIELD node, score \
                 MATCH (a:Abstract)-[:HAS_SENTENCE]->(node) RETURN node, a.name"
            )
        } else {
            format!("CALL fulltext('sentences', \"{search}\") YIELD node, score RETURN node, score")
        };
        json!({ "query": query })
    }

    fn answer(&self, prompt: &str) -> serde_json::Value {
        let lines: Vec<&str> = section(prompt, "SENTENCES")
            .unwrap_or("")
            .lines()
            .filter_map(|l| l.strip_prefix("- "))
            .take(3)
            .collect();
        let answer = if lines.is_empty() {
            "The provided documents contain no sentence that addresses the question.".to_string()
        } else {
            lines.join(" ")
        };
        json!({ "answer": answer })
    }
}

impl LlmProvider for StubProvider {
    fn id(&self) -> &str {
        "stub"
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let text = prompt.text.as_str();
        let reply = match prompt.kind {
            PromptKind::RelevanceCheck => self.relevance(text),
            PromptKind::Ner => self.ner(text),
            PromptKind::AcronymResolution => self.acronyms(text),
            PromptKind::ChemicalStandardization => self.chemicals(text),
            PromptKind::RelationExtraction => self.relation(text),
            PromptKind::CypherGeneration => self.cypher(text),
            PromptKind::AnswerGeneration => self.answer(text),
        };
        Ok(reply.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{render_prompt, PromptContext};

    fn gaz(terms: &[(&str, CategoryType)]) -> Vec<(String, CategoryType)> {
        terms.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    fn ask(stub: &StubProvider, ctx: PromptContext) -> serde_json::Value {
        let p = render_prompt(&ctx, None).unwrap();
        serde_json::from_str(&stub.complete(&p).unwrap()).unwrap()
    }

    #[test]
    fn matcher_prefers_longest_and_respects_boundaries() {
        let g = gaz(&[
            ("plasma", CategoryType::Concept),
            ("plasma confinement", CategoryType::PhysicalProcess),
            ("DT", CategoryType::ChemicalElementOrCompound),
            ("tokamak", CategoryType::NuclearFusionDeviceType),
        ]);
        let text = "Plasma confinement in tokamaks uses DT, not dt or DTX plasmas.";
        let found: Vec<_> = gazetteer_matches(text, &g)
            .into_iter()
            .map(|(s, e, _)| &text[s..e])
            .collect();
        assert_eq!(found, vec!["Plasma confinement", "tokamaks", "DT", "plasmas"]);
    }

    #[test]
    fn stub_answers_each_kind() {
        let stub = StubProvider::new(StubTables::bundled());
        let v = ask(
            &stub,
            PromptContext::AcronymResolution {
                dictionary: vec![
                    ("ICF".into(), 9),
                    ("inertial confinement fusion".into(), 4),
                    ("DT".into(), 3),
                    ("deuterium-tritium".into(), 2),
                ],
            },
        );
        let subs = v["substitutions"].as_array().unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0]["to"], "inertial confinement fusion");
        assert_eq!(subs[1]["to"], "deuterium-tritium");

        let v = ask(
            &stub,
            PromptContext::ChemicalStandardization {
                dictionary: vec![("w".into(), 5), ("tungsten".into(), 3)],
            },
        );
        assert_eq!(v["substitutions"][0]["to"], "tungsten");

        let v = ask(
            &stub,
            PromptContext::RelevanceCheck {
                title: "Tokamak edge physics".into(),
                text: "We study the plasma edge.".into(),
            },
        );
        assert_eq!(v["relevant"], "yes");
        let v = ask(
            &stub,
            PromptContext::RelevanceCheck {
                title: "Bird migration".into(),
                text: "Geese fly south.".into(),
            },
        );
        assert_eq!(v["relevant"], "no");
    }

    #[test]
    fn cypher_stub_picks_single_or_multi_hop() {
        let stub = StubProvider::new(StubTables::bundled());
        let v = ask(
            &stub,
            PromptContext::CypherGeneration {
                question: "What limits tokamak confinement?".into(),
                schema: "s".into(),
            },
        );
        assert!(v["query"].as_str().unwrap().ends_with("RETURN node, score"));
        let v = ask(
            &stub,
            PromptContext::CypherGeneration {
                question: "How does tritium interact with tungsten?".into(),
                schema: "s".into(),
            },
        );
        assert!(v["query"].as_str().unwrap().contains("HAS_SENTENCE"));
    }

    #[test]
    fn malformed_tables_report_the_line() {
        let err = StubTables::parse("plasma\tConcept\nbad line\n", "", "", "", "x").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
        let err = StubTables::parse("plasma\tNot A Category\n", "", "", "", "x").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }
}
