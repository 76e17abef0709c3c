use crate::error::{Error, Result};
use crate::taxonomy::CategoryType;

use super::PromptKind;

pub const TEMPLATE_VERSION: &str = "v1";

const RELEVANCE: &str = include_str!("../../templates/v1/relevance_check.txt");
const NER: &str = include_str!("../../templates/v1/ner.txt");
const ACRONYM: &str = include_str!("../../templates/v1/acronym_resolution.txt");
const CHEMICAL: &str = include_str!("../../templates/v1/chemical_standardization.txt");
const RELATION: &str = include_str!("../../templates/v1/relation_extraction.txt");
const CYPHER: &str = include_str!("../../templates/v1/cypher_generation.txt");
const ANSWER: &str = include_str!("../../templates/v1/answer_generation.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub title: String,
    pub url: String,
    pub text: String,
}

/// Inputs for one prompt, by kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptContext {
    RelevanceCheck {
        title: String,
        text: String,
    },
    Ner {
        sentence: String,
    },
    AcronymResolution {
        dictionary: Vec<(String, u64)>,
    },
    ChemicalStandardization {
        dictionary: Vec<(String, u64)>,
    },
    RelationExtraction {
        subject: String,
        object: String,
        sentences: Vec<String>,
    },
    CypherGeneration {
        question: String,
        schema: String,
    },
    AnswerGeneration {
        question: String,
        documents: Vec<Document>,
        sentences: Vec<String>,
        triplets: Vec<(String, String, String)>,
    },
}

impl PromptContext {
    pub fn kind(&self) -> PromptKind {
        match self {
            PromptContext::RelevanceCheck { .. } => PromptKind::RelevanceCheck,
            PromptContext::Ner { .. } => PromptKind::Ner,
            PromptContext::AcronymResolution { .. } => PromptKind::AcronymResolution,
            PromptContext::ChemicalStandardization { .. } => PromptKind::ChemicalStandardization,
            PromptContext::RelationExtraction { .. } => PromptKind::RelationExtraction,
            PromptContext::CypherGeneration { .. } => PromptKind::CypherGeneration,
            PromptContext::AnswerGeneration { .. } => PromptKind::AnswerGeneration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub kind: PromptKind,
    pub text: String,
    /// Set when context was dropped to respect the token budget.
    pub truncated: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DropFrom {
    Front,
    Back,
}

/// The one piece of context that may shrink under the token budget.
struct Elastic {
    placeholder: &'static str,
    items: Vec<String>,
    joiner: &'static str,
    drop_from: DropFrom,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn require(value: &str, field: &'static str) -> Result<()> {
    if value.trim().is_empty() {
        Err(Error::MissingContext(field))
    } else {
        Ok(())
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn dictionary_lines(dictionary: &[(String, u64)]) -> Vec<String> {
    dictionary
        .iter()
        .map(|(term, count)| format!("- {} ({count})", one_line(term)))
        .collect()
}

fn bullet_lines(items: &[String]) -> Vec<String> {
    items.iter().map(|s| format!("- {}", one_line(s))).collect()
}

/// Substitutes `{{name}}` placeholders in a single left-to-right pass.
fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = &after[..close];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 4 + close]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn token_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Renders a prompt. Every kind but answer generation is held to `budget`
/// whitespace tokens by dropping elastic context: leading words of free text,
/// or the lowest-ranked entries of ranked lists.
pub fn render_prompt(ctx: &PromptContext, budget: Option<usize>) -> Result<Prompt> {
    let kind = ctx.kind();
    let (template, mut fixed, elastic): (&str, Vec<(&str, String)>, Option<Elastic>) = match ctx {
        PromptContext::RelevanceCheck { title, text } => {
            require(title, "title")?;
            require(text, "text")?;
            (
                RELEVANCE,
                vec![("title", one_line(title))],
                Some(Elastic {
                    placeholder: "text",
                    items: words(text),
                    joiner: " ",
                    drop_from: DropFrom::Front,
                }),
            )
        }
        PromptContext::Ner { sentence } => {
            require(sentence, "sentence")?;
            let categories = CategoryType::ALL
                .iter()
                .map(|c| format!("- {}", c.name()))
                .collect::<Vec<_>>()
                .join("\n");
            (
                NER,
                vec![("categories", categories)],
                Some(Elastic {
                    placeholder: "sentence",
                    items: words(sentence),
                    joiner: " ",
                    drop_from: DropFrom::Front,
                }),
            )
        }
        PromptContext::AcronymResolution { dictionary }
        | PromptContext::ChemicalStandardization { dictionary } => {
            if dictionary.is_empty() {
                return Err(Error::MissingContext("dictionary"));
            }
            let template = if kind == PromptKind::AcronymResolution {
                ACRONYM
            } else {
                CHEMICAL
            };
            (
                template,
                vec![],
                Some(Elastic {
                    placeholder: "dictionary",
                    items: dictionary_lines(dictionary),
                    joiner: "\n",
                    drop_from: DropFrom::Back,
                }),
            )
        }
        PromptContext::RelationExtraction {
            subject,
            object,
            sentences,
        } => {
            require(subject, "subject")?;
            require(object, "object")?;
            if sentences.is_empty() {
                return Err(Error::MissingContext("sentences"));
            }
            (
                RELATION,
                vec![("subject", one_line(subject)), ("object", one_line(object))],
                Some(Elastic {
                    placeholder: "sentences",
                    items: bullet_lines(sentences),
                    joiner: "\n",
                    drop_from: DropFrom::Back,
                }),
            )
        }
        PromptContext::CypherGeneration { question, schema } => {
            require(question, "question")?;
            require(schema, "schema")?;
            (
                CYPHER,
                vec![("schema", schema.trim_end().to_string())],
                Some(Elastic {
                    placeholder: "question",
                    items: words(question),
                    joiner: " ",
                    drop_from: DropFrom::Front,
                }),
            )
        }
        PromptContext::AnswerGeneration {
            question,
            documents,
            sentences,
            triplets,
        } => {
            require(question, "question")?;
            if documents.is_empty() {
                return Err(Error::MissingContext("documents"));
            }
            let docs = documents
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    format!(
                        "Document {}: {}\n{}",
                        i + 1,
                        one_line(&d.title),
                        one_line(&d.text)
                    )
                })
                .collect::<Vec<_>>()
                .join("\n\n");
            let triplet_lines = triplets
                .iter()
                .map(|(s, p, o)| format!("- ({}; {}; {})", one_line(s), one_line(p), one_line(o)))
                .collect::<Vec<_>>()
                .join("\n");
            (
                ANSWER,
                vec![
                    ("question", one_line(question)),
                    ("documents", docs),
                    ("sentences", bullet_lines(sentences).join("\n")),
                    ("triplets", triplet_lines),
                ],
                None,
            )
        }
    };

    let render = |fixed: &mut Vec<(&str, String)>, elastic: &Option<Elastic>| -> String {
        if let Some(e) = elastic {
            fixed.retain(|(k, _)| *k != e.placeholder);
            fixed.push((e.placeholder, e.items.join(e.joiner)));
        }
        fill(template, fixed)
    };

    let mut elastic = elastic;
    let mut text = render(&mut fixed, &elastic);
    let mut truncated = false;
    if let (Some(budget), Some(e)) = (budget, elastic.as_mut()) {
        if kind != PromptKind::AnswerGeneration && token_count(&text) > budget {
            let overhead = token_count(&text) - e.items.iter().map(|i| token_count(i)).sum::<usize>();
            let mut remaining: usize = e.items.iter().map(|i| token_count(i)).sum();
            while overhead + remaining > budget && !e.items.is_empty() {
                let dropped = match e.drop_from {
                    DropFrom::Front => e.items.remove(0),
                    DropFrom::Back => e.items.pop().unwrap(),
                };
                remaining -= token_count(&dropped);
                truncated = true;
            }
            text = render(&mut fixed, &elastic);
        }
    }
    Ok(Prompt {
        kind,
        text,
        truncated,
    })
}

/// Text between `[NAME]` and `[/NAME]` marker lines of a rendered prompt.
pub fn section<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("[{name}]\n");
    let close = format!("\n[/{name}]");
    let start = prompt.find(&open)? + open.len();
    let end = start + prompt[start..].find(&close)?;
    Some(&prompt[start..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ner_prompt_lists_all_categories_and_sentence() {
        let p = render_prompt(
            &PromptContext::Ner {
                sentence: "The tokamak confines plasma.".into(),
            },
            None,
        )
        .unwrap();
        assert_eq!(p.kind, PromptKind::Ner);
        assert!(p.text.contains("The tokamak confines plasma."));
        for c in CategoryType::ALL {
            assert!(p.text.contains(c.name()), "missing {c}");
        }
        assert_eq!(section(&p.text, "SENTENCE"), Some("The tokamak confines plasma."));
        assert!(!p.truncated);
    }

    #[test]
    fn rendering_is_byte_identical() {
        let ctx = PromptContext::AcronymResolution {
            dictionary: vec![("ICF".into(), 3), ("inertial confinement fusion".into(), 2)],
        };
        let a = render_prompt(&ctx, None).unwrap();
        let b = render_prompt(&ctx, None).unwrap();
        assert_eq!(a, b);
        assert!(a.text.contains("- ICF (3)"));
        assert!(a.text.contains("- inertial confinement fusion (2)"));
        assert!(a.text.contains("Identify acronyms with their expanded forms"));
    }

    #[test]
    fn missing_context_names_the_field() {
        let err = render_prompt(&PromptContext::Ner { sentence: " ".into() }, None).unwrap_err();
        assert!(matches!(err, Error::MissingContext("sentence")));
        let err = render_prompt(
            &PromptContext::CypherGeneration {
                question: "q".into(),
                schema: String::new(),
            },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingContext("schema")));
        let err = render_prompt(&PromptContext::AcronymResolution { dictionary: vec![] }, None)
            .unwrap_err();
        assert!(matches!(err, Error::MissingContext("dictionary")));
    }

    #[test]
    fn budget_truncates_and_reports() {
        let dictionary: Vec<_> = (0..500).map(|i| (format!("term{i}"), 500 - i as u64)).collect();
        let ctx = PromptContext::AcronymResolution { dictionary };
        let full = render_prompt(&ctx, None).unwrap();
        let cut = render_prompt(&ctx, Some(300)).unwrap();
        assert!(cut.truncated);
        assert!(token_count(&cut.text) <= 300);
        assert!(token_count(&full.text) > 300);
        // lowest-ranked entries go first
        assert!(cut.text.contains("- term0 (500)"));
        assert!(!cut.text.contains("- term499 (1)"));

        let long = "word ".repeat(400);
        let ner = render_prompt(&PromptContext::Ner { sentence: format!("{long} tail") }, Some(300)).unwrap();
        assert!(ner.truncated);
        assert!(ner.text.contains("tail"));
    }

    #[test]
    fn answer_prompts_are_never_truncated() {
        let ctx = PromptContext::AnswerGeneration {
            question: "q?".into(),
            documents: vec![Document {
                title: "t".into(),
                url: "u".into(),
                text: "x ".repeat(1000),
            }],
            sentences: vec![],
            triplets: vec![],
        };
        let p = render_prompt(&ctx, Some(10)).unwrap();
        assert!(!p.truncated);
        assert!(token_count(&p.text) > 1000);
    }

    #[test]
    fn fill_is_single_pass() {
        let out = fill("a {{x}} b {{y}}", &[("x", "{{y}}".into()), ("y", "Y".into())]);
        assert_eq!(out, "a {{y}} b Y");
    }
}
