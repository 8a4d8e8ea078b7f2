//! Prompt templates and completion parsers.
//!
//! Templates are plain-text assets with a one-line header declaring an id and
//! its placeholder names; bodies use `{name}` substitution with `{{`/`}}`
//! escapes for literal braces. A template whose placeholder list contains
//! `examples` is paired with a few-shot asset of the same id, bound
//! automatically unless the caller overrides it.
//!
//! The parsers are deliberately forgiving about surrounding prose: models
//! often echo the prompt or add commentary, so list/map extraction keys on
//! the *last* well-formed occurrence (few-shot examples precede the answer),
//! while tag extraction keys on the *first* well-formed pair.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` placeholder `{name}` has no binding")]
    MissingPlaceholder { template: String, name: String },
    #[error("template `{template}` contains a stray unescaped brace")]
    StrayBrace { template: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no bracketed integer list found in response")]
    NoListFound,
    #[error("expected {expected} lists in response, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("no brace-delimited count map found in response")]
    NoMapFound,
    #[error("count map entry `{0}` has a non-integer frequency")]
    NonIntegerFrequency(String),
    #[error("response is missing a well-formed <{0}> tag")]
    MissingTag(String),
    #[error("tagged value `{0}` is not a number")]
    NonNumericScore(String),
}

/// One parsed template: body text plus declared placeholder names.
#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub placeholders: Vec<String>,
    pub body: String,
}

/// All built-in templates and few-shot blocks, loaded from embedded assets.
#[derive(Debug)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
    few_shots: BTreeMap<String, String>,
}

const TEMPLATE_SOURCES: &[&str] = &[
    include_str!("../assets/templates/sort_prompt.txt"),
    include_str!("../assets/templates/split_prompt_32.txt"),
    include_str!("../assets/templates/split_prompt_64.txt"),
    include_str!("../assets/templates/split_prompt_128.txt"),
    include_str!("../assets/templates/improve_prompt.txt"),
    include_str!("../assets/templates/merge_prompt.txt"),
    include_str!("../assets/templates/intersect_prompt.txt"),
    include_str!("../assets/templates/set_split_prompt_32.txt"),
    include_str!("../assets/templates/set_split_prompt_64.txt"),
    include_str!("../assets/templates/set_split_prompt_128.txt"),
    include_str!("../assets/templates/set_merge_prompt.txt"),
    include_str!("../assets/templates/count_prompt.txt"),
    include_str!("../assets/templates/keyword_split_prompt.txt"),
    include_str!("../assets/templates/merge_count_prompt.txt"),
    include_str!("../assets/templates/improve_merge_prompt.txt"),
    include_str!("../assets/templates/nda_merge_prompt.txt"),
    include_str!("../assets/templates/nda_score_prompt.txt"),
    include_str!("../assets/templates/nda_aggregate_prompt.txt"),
    include_str!("../assets/templates/nda_improve_prompt.txt"),
];

const FEW_SHOT_SOURCES: &[&str] = &[
    include_str!("../assets/few_shot/sort_prompt.txt"),
    include_str!("../assets/few_shot/split_prompt_32.txt"),
    include_str!("../assets/few_shot/split_prompt_64.txt"),
    include_str!("../assets/few_shot/split_prompt_128.txt"),
    include_str!("../assets/few_shot/improve_prompt.txt"),
    include_str!("../assets/few_shot/intersect_prompt.txt"),
    include_str!("../assets/few_shot/set_split_prompt_32.txt"),
    include_str!("../assets/few_shot/set_split_prompt_64.txt"),
    include_str!("../assets/few_shot/set_split_prompt_128.txt"),
    include_str!("../assets/few_shot/count_prompt.txt"),
    include_str!("../assets/few_shot/keyword_split_prompt.txt"),
    include_str!("../assets/few_shot/improve_merge_prompt.txt"),
];

impl TemplateRegistry {
    /// Registry over the embedded assets. Panics only on malformed assets,
    /// which is a build defect rather than a runtime condition.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for src in TEMPLATE_SOURCES {
            let (header, body) = src
                .split_once('\n')
                .expect("template asset has no body");
            let header = header
                .strip_prefix("#template ")
                .expect("template asset missing #template header");
            let (id, placeholders) = match header.split_once('|') {
                Some((id, rest)) => {
                    let names = rest
                        .trim()
                        .strip_prefix("placeholders:")
                        .expect("template header missing placeholder list")
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    (id.trim().to_string(), names)
                }
                None => (header.trim().to_string(), Vec::new()),
            };
            templates.insert(
                id.clone(),
                Template { id, placeholders, body: body.trim_end().to_string() },
            );
        }
        let mut few_shots = BTreeMap::new();
        for src in FEW_SHOT_SOURCES {
            let (header, body) = src
                .split_once('\n')
                .expect("few-shot asset has no body");
            let id = header
                .strip_prefix("#fewshot ")
                .expect("few-shot asset missing #fewshot header")
                .trim()
                .to_string();
            few_shots.insert(id, body.trim().to_string());
        }
        TemplateRegistry { templates, few_shots }
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.get(id)
    }

    pub fn few_shot(&self, id: &str) -> Option<&str> {
        self.few_shots.get(id).map(String::as_str)
    }

    pub fn template_ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Render a template with the given bindings. The few-shot block for the
    /// template id is bound to `examples` automatically when not supplied.
    pub fn render(
        &self,
        id: &str,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String, PromptError> {
        let template = self
            .templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))?;
        let lookup = |name: &str| -> Option<String> {
            if let Some(v) = bindings.get(name) {
                return Some(v.clone());
            }
            if name == "examples" {
                return self.few_shots.get(id).cloned();
            }
            None
        };
        let mut out = String::with_capacity(template.body.len());
        let mut chars = template.body.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    out.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    out.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(c) if c.is_ascii_alphanumeric() || c == '_' => name.push(c),
                            _ => {
                                return Err(PromptError::StrayBrace {
                                    template: id.to_string(),
                                })
                            }
                        }
                    }
                    let value = lookup(&name).ok_or_else(|| PromptError::MissingPlaceholder {
                        template: id.to_string(),
                        name: name.clone(),
                    })?;
                    out.push_str(&value);
                }
                '}' => {
                    return Err(PromptError::StrayBrace { template: id.to_string() })
                }
                c => out.push(c),
            }
        }
        Ok(out)
    }
}

/// Every well-formed `[n, n, ...]` integer list in `text`, in order.
fn all_integer_lists(text: &str) -> Vec<Vec<i64>> {
    let bytes = text.as_bytes();
    let mut lists = Vec::new();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => start = Some(i),
            b']' => {
                if let Some(s) = start.take() {
                    if let Some(list) = parse_list_body(&text[s + 1..i]) {
                        lists.push(list);
                    }
                }
            }
            _ => {}
        }
    }
    lists
}

fn parse_list_body(body: &str) -> Option<Vec<i64>> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Some(Vec::new());
    }
    trimmed
        .split(',')
        .map(|tok| tok.trim().parse::<i64>().ok())
        .collect()
}

/// The last well-formed bracketed integer list in a completion.
pub fn parse_digit_list(text: &str) -> Result<Vec<i64>, ParseError> {
    all_integer_lists(text)
        .pop()
        .ok_or(ParseError::NoListFound)
}

/// The first well-formed bracketed integer list, if any. Used when scanning
/// forward from a known marker rather than backwards through a completion.
pub fn parse_digit_list_first(text: &str) -> Option<Vec<i64>> {
    all_integer_lists(text).into_iter().next()
}

/// The last `expected` bracketed integer lists, in order of appearance.
///
/// A response echoing its own input produces extra leading lists, so
/// surplus lists are dropped from the front; a shortfall is an arity error.
pub fn parse_named_lists(text: &str, expected: usize) -> Result<Vec<Vec<i64>>, ParseError> {
    let lists = all_integer_lists(text);
    if lists.len() < expected {
        return Err(ParseError::WrongArity { expected, found: lists.len() });
    }
    Ok(lists[lists.len() - expected..].to_vec())
}

/// The last well-formed `{"key": n, ...}` map in a completion.
///
/// Duplicate keys are summed: a model that lists a country twice is counting
/// two separate groups of mentions, not restating one.
pub fn parse_count_map(text: &str) -> Result<BTreeMap<String, i64>, ParseError> {
    let bytes = text.as_bytes();
    let mut best: Option<BTreeMap<String, i64>> = None;
    let mut bad_entry: Option<String> = None;
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' => start = Some(i),
            b'}' => {
                if let Some(s) = start.take() {
                    match parse_map_body(&text[s + 1..i]) {
                        Ok(map) => best = Some(map),
                        Err(Some(entry)) => bad_entry = Some(entry),
                        Err(None) => {}
                    }
                }
            }
            _ => {}
        }
    }
    match (best, bad_entry) {
        (Some(map), _) => Ok(map),
        (None, Some(entry)) => Err(ParseError::NonIntegerFrequency(entry)),
        (None, None) => Err(ParseError::NoMapFound),
    }
}

/// `Err(Some(entry))` marks a map-shaped body with a non-integer value;
/// `Err(None)` a body that is not a count map at all.
fn parse_map_body(body: &str) -> Result<BTreeMap<String, i64>, Option<String>> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut map = BTreeMap::new();
    for entry in split_map_entries(trimmed) {
        let entry = entry.trim();
        let (key_part, value_part) = entry.rsplit_once(':').ok_or(None)?;
        let key = key_part.trim();
        let key = key
            .strip_prefix('"')
            .and_then(|k| k.strip_suffix('"'))
            .ok_or(None)?;
        let value: i64 = value_part
            .trim()
            .parse()
            .map_err(|_| Some(entry.to_string()))?;
        *map.entry(key.to_string()).or_insert(0) += value;
    }
    Ok(map)
}

/// Split on commas that sit outside double quotes, so keys like
/// `"Washington, D.C."` survive.
fn split_map_entries(body: &str) -> Vec<&str> {
    let mut entries = Vec::new();
    let mut depth_quote = false;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '"' => depth_quote = !depth_quote,
            ',' if !depth_quote => {
                entries.push(&body[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    entries.push(&body[start..]);
    entries
}

/// The quoted values of `"{label} 1"` … `"{label} k"` fields, in order.
///
/// Matches the `{"Paragraph 1": "...", ...}` answer shape. Values must not
/// themselves contain double quotes, which the splitter prompts rule out.
pub fn parse_quoted_fields(text: &str, label: &str, k: usize) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        let field = format!("\"{label} {i}\"");
        let value = text.find(&field).and_then(|at| {
            let rest = &text[at + field.len()..];
            let rest = rest.trim_start().strip_prefix(':')?.trim_start();
            let rest = rest.strip_prefix('"')?;
            let end = rest.find('"')?;
            Some(rest[..end].to_string())
        });
        match value {
            Some(v) => out.push(v),
            None => return Err(ParseError::WrongArity { expected: k, found: out.len() }),
        }
    }
    Ok(out)
}

/// The first well-formed `<tag>…</tag>` pair's inner text, trimmed.
pub fn parse_tagged(text: &str, tag: &str) -> Result<String, ParseError> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text
        .find(&open)
        .ok_or_else(|| ParseError::MissingTag(tag.to_string()))?;
    let rest = &text[start + open.len()..];
    let end = rest
        .find(&close)
        .ok_or_else(|| ParseError::MissingTag(tag.to_string()))?;
    Ok(rest[..end].trim().to_string())
}

/// A tagged numeric value, e.g. a 0–10 quality sample.
pub fn parse_tagged_number(text: &str, tag: &str) -> Result<f64, ParseError> {
    let raw = parse_tagged(text, tag)?;
    raw.parse::<f64>()
        .map_err(|_| ParseError::NonNumericScore(raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_all_templates_and_few_shots() {
        let reg = TemplateRegistry::builtin();
        assert_eq!(reg.template_ids().count(), 19);
        for id in [
            "sort_prompt",
            "split_prompt_32",
            "merge_prompt",
            "intersect_prompt",
            "set_merge_prompt",
            "count_prompt",
            "merge_count_prompt",
            "nda_merge_prompt",
            "nda_score_prompt",
            "nda_aggregate_prompt",
            "nda_improve_prompt",
        ] {
            assert!(reg.template(id).is_some(), "missing template {id}");
        }
        assert!(reg.few_shot("sort_prompt").is_some());
        assert!(reg.few_shot("merge_prompt").is_none());
    }

    #[test]
    fn render_substitutes_and_injects_examples() {
        let reg = TemplateRegistry::builtin();
        let mut bindings = BTreeMap::new();
        bindings.insert("input_list".to_string(), "[3, 1, 2]".to_string());
        let rendered = reg.render("sort_prompt", &bindings).unwrap();
        assert!(rendered.contains("Sort the following list"));
        assert!(rendered.contains("[3, 1, 2]"));
        // Few-shot block injected in place of {examples}.
        assert!(rendered.contains("Input: [5, 1, 0, 1, 2, 0, 4, 8, 1, 9, 5, 1, 3, 3, 9, 7]"));
        assert!(!rendered.contains("{examples}"));
    }

    #[test]
    fn render_reports_missing_bindings() {
        let reg = TemplateRegistry::builtin();
        let err = reg.render("sort_prompt", &BTreeMap::new()).unwrap_err();
        assert_eq!(
            err,
            PromptError::MissingPlaceholder {
                template: "sort_prompt".to_string(),
                name: "input_list".to_string(),
            }
        );
        assert_eq!(
            reg.render("nope", &BTreeMap::new()).unwrap_err(),
            PromptError::UnknownTemplate("nope".to_string())
        );
    }

    #[test]
    fn digit_list_takes_last_match() {
        let text = "Input: [3, 1, 2]\nOutput: [1, 2, 3]";
        assert_eq!(parse_digit_list(text).unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_digit_list("[]").unwrap(), Vec::<i64>::new());
        assert_eq!(parse_digit_list("no lists"), Err(ParseError::NoListFound));
        // Malformed bracket pairs are skipped, not fatal.
        assert_eq!(parse_digit_list("[a, b] then [4, 5]").unwrap(), vec![4, 5]);
    }

    #[test]
    fn named_lists_arity() {
        let text = "whole: [1, 2, 3, 4]\nList 1: [1, 2]\nList 2: [3, 4]";
        assert_eq!(
            parse_named_lists(text, 2).unwrap(),
            vec![vec![1, 2], vec![3, 4]]
        );
        assert_eq!(
            parse_named_lists("only [1]", 2),
            Err(ParseError::WrongArity { expected: 2, found: 1 })
        );
    }

    #[test]
    fn count_map_sums_duplicates_and_takes_last() {
        let text = r#"Example: {"Peru": 1}
Output: {"Peru": 3, "Chile": 2, "Chile": 3}"#;
        let map = parse_count_map(text).unwrap();
        assert_eq!(map.get("Peru"), Some(&3));
        assert_eq!(map.get("Chile"), Some(&5));
        assert_eq!(parse_count_map("plain text"), Err(ParseError::NoMapFound));
        assert!(matches!(
            parse_count_map(r#"{"Peru": one}"#),
            Err(ParseError::NonIntegerFrequency(_))
        ));
        // Comma inside a quoted key is not an entry separator.
        let map = parse_count_map(r#"{"Washington, D.C.": 2}"#).unwrap();
        assert_eq!(map.get("Washington, D.C."), Some(&2));
    }

    #[test]
    fn quoted_fields_in_order() {
        let text = "{\n    \"Paragraph 1\": \"First part.\",\n    \"Paragraph 2\": \"Second part.\"\n}";
        assert_eq!(
            parse_quoted_fields(text, "Paragraph", 2).unwrap(),
            vec!["First part.".to_string(), "Second part.".to_string()]
        );
        assert_eq!(
            parse_quoted_fields(text, "Paragraph", 3),
            Err(ParseError::WrongArity { expected: 3, found: 2 })
        );
    }

    #[test]
    fn tagged_extraction_takes_first_pair() {
        let text = "noise <Merged> body one </Merged> <Merged> two </Merged>";
        assert_eq!(parse_tagged(text, "Merged").unwrap(), "body one");
        assert_eq!(
            parse_tagged("<Merged> unclosed", "Merged"),
            Err(ParseError::MissingTag("Merged".to_string()))
        );
        assert_eq!(parse_tagged_number("<Score> 7.5 </Score>", "Score").unwrap(), 7.5);
        assert!(matches!(
            parse_tagged_number("<Score> high </Score>", "Score"),
            Err(ParseError::NonNumericScore(_))
        ));
    }
}
