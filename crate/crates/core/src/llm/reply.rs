use serde_json::Value;

use crate::error::{Error, Result};
use crate::taxonomy::CategoryType;

use super::{PromptKind, StructuredReply};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReply {
    pub reply: StructuredReply,
    /// Entities whose category was outside the taxonomy and mapped to Concept.
    pub unknown_categories: usize,
}

fn fail(message: impl Into<String>, raw: &str) -> Error {
    Error::Reply {
        message: message.into(),
        raw: raw.to_string(),
    }
}

/// First balanced `{...}` in `s`, ignoring braces inside JSON strings.
fn first_object(s: &str) -> Option<&str> {
    let bytes = s.as_bytes();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if start.is_some() => in_string = true,
            b'{' => {
                if start.is_none() {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if start.is_some() => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[start.unwrap()..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses the whole reply as JSON, falling back to the first balanced object
/// embedded in surrounding prose or code fences.
fn extract_json(raw: &str) -> Result<Value> {
    let trimmed = raw.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let mut rest = trimmed;
    while let Some(candidate) = first_object(rest) {
        if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(candidate) {
            return Ok(v);
        }
        let offset = candidate.as_ptr() as usize - rest.as_ptr() as usize;
        rest = &rest[offset + 1..];
    }
    Err(fail("no JSON object found", raw))
}

fn string_field(v: &Value, key: &str, raw: &str) -> Result<String> {
    match v.get(key) {
        Some(Value::String(s)) => Ok(s.trim().to_string()),
        Some(other) => Err(fail(format!("`{key}` is not a string: {other}"), raw)),
        None => Err(fail(format!("missing `{key}`"), raw)),
    }
}

fn array_field<'a>(v: &'a Value, key: &str, raw: &str) -> Result<&'a Vec<Value>> {
    match v.get(key) {
        Some(Value::Array(items)) => Ok(items),
        Some(Value::Null) | None => Err(fail(format!("missing `{key}` array"), raw)),
        Some(other) => Err(fail(format!("`{key}` is not an array: {other}"), raw)),
    }
}

/// Reads a pair either as an object with the given keys or as a two-element array.
fn pair(item: &Value, keys: (&str, &str)) -> Option<(String, String)> {
    match item {
        Value::Object(_) => {
            let a = item.get(keys.0)?.as_str()?;
            let b = item.get(keys.1)?.as_str()?;
            Some((a.trim().to_string(), b.trim().to_string()))
        }
        Value::Array(xs) if xs.len() == 2 => Some((
            xs[0].as_str()?.trim().to_string(),
            xs[1].as_str()?.trim().to_string(),
        )),
        _ => None,
    }
}

pub fn parse_reply(kind: PromptKind, raw: &str) -> Result<ParsedReply> {
    let v = extract_json(raw)?;
    let mut unknown_categories = 0;
    let reply = match kind {
        PromptKind::RelevanceCheck => match v.get("relevant") {
            Some(Value::Bool(b)) => StructuredReply::Relevance(*b),
            Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
                "yes" | "true" => StructuredReply::Relevance(true),
                "no" | "false" => StructuredReply::Relevance(false),
                other => return Err(fail(format!("`relevant` must be yes or no, got {other}"), raw)),
            },
            _ => return Err(fail("missing `relevant`", raw)),
        },
        PromptKind::Ner => {
            let mut entities = Vec::new();
            for item in array_field(&v, "entities", raw)? {
                let Some((surface, category)) = pair(item, ("entity", "category")) else {
                    return Err(fail(format!("malformed entity {item}"), raw));
                };
                if surface.is_empty() {
                    continue;
                }
                let category = CategoryType::from_name(&category).unwrap_or_else(|| {
                    unknown_categories += 1;
                    CategoryType::Concept
                });
                entities.push((surface, category));
            }
            StructuredReply::Entities(entities)
        }
        PromptKind::AcronymResolution | PromptKind::ChemicalStandardization => {
            let mut subs = Vec::new();
            for item in array_field(&v, "substitutions", raw)? {
                let Some((from, to)) = pair(item, ("from", "to")) else {
                    return Err(fail(format!("malformed substitution {item}"), raw));
                };
                if !from.is_empty() && !to.is_empty() {
                    subs.push((from, to));
                }
            }
            StructuredReply::Substitutions(subs)
        }
        PromptKind::RelationExtraction => {
            let predicate = string_field(&v, "predicate", raw)?;
            if predicate.is_empty() {
                return Err(fail("empty predicate", raw));
            }
            StructuredReply::Relation {
                subject: string_field(&v, "subject", raw)?,
                predicate,
                object: string_field(&v, "object", raw)?,
            }
        }
        PromptKind::CypherGeneration => {
            let q = string_field(&v, "query", raw)?;
            if q.is_empty() {
                return Err(fail("empty query", raw));
            }
            StructuredReply::Query(q)
        }
        PromptKind::AnswerGeneration => StructuredReply::Answer(string_field(&v, "answer", raw)?),
    };
    Ok(ParsedReply {
        reply,
        unknown_categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_and_lenient_json() {
        let p = parse_reply(PromptKind::RelevanceCheck, r#"{"relevant": "yes"}"#).unwrap();
        assert_eq!(p.reply, StructuredReply::Relevance(true));
        let p = parse_reply(
            PromptKind::RelevanceCheck,
            "Sure! Here it is:\n```json\n{\"relevant\": \"no\"}\n```",
        )
        .unwrap();
        assert_eq!(p.reply, StructuredReply::Relevance(false));
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scanner() {
        let raw = r#"note {"answer": "a } b { c"} trailing"#;
        let p = parse_reply(PromptKind::AnswerGeneration, raw).unwrap();
        assert_eq!(p.reply, StructuredReply::Answer("a } b { c".into()));
    }

    #[test]
    fn skips_invalid_objects_before_a_valid_one() {
        let raw = r#"{not json} then {"query": "RETURN 1"}"#;
        let p = parse_reply(PromptKind::CypherGeneration, raw).unwrap();
        assert_eq!(p.reply, StructuredReply::Query("RETURN 1".into()));
    }

    #[test]
    fn ner_accepts_objects_and_pairs_and_counts_unknowns() {
        let raw = r#"{"entities": [
            {"entity": "tokamak", "category": "nuclear fusion device type"},
            ["ITER", "Nuclear Fusion Experimental Facility"],
            {"entity": "foo", "category": "Nonsense"}
        ]}"#;
        let p = parse_reply(PromptKind::Ner, raw).unwrap();
        assert_eq!(p.unknown_categories, 1);
        assert_eq!(
            p.reply,
            StructuredReply::Entities(vec![
                ("tokamak".into(), CategoryType::NuclearFusionDeviceType),
                ("ITER".into(), CategoryType::NuclearFusionExperimentalFacility),
                ("foo".into(), CategoryType::Concept),
            ])
        );
    }

    #[test]
    fn failures_keep_the_raw_text() {
        let err = parse_reply(PromptKind::Ner, "no json here").unwrap_err();
        match err {
            Error::Reply { raw, .. } => assert_eq!(raw, "no json here"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_reply(
            PromptKind::RelationExtraction,
            r#"{"subject":"a","predicate":" ","object":"b"}"#
        )
        .is_err());
        assert!(parse_reply(PromptKind::Ner, r#"{"entities": "x"}"#).is_err());
    }

    #[test]
    fn substitutions_parse() {
        let p = parse_reply(
            PromptKind::AcronymResolution,
            r#"{"substitutions":[{"from":"ICF","to":"inertial confinement fusion"}]}"#,
        )
        .unwrap();
        assert_eq!(
            p.reply,
            StructuredReply::Substitutions(vec![("ICF".into(), "inertial confinement fusion".into())])
        );
    }
}
