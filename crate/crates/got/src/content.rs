//! Thought payloads shared between the graph, parsers, and scorers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Parsed payload carried by a thought.
///
/// The concrete shape depends on the use case: digit/integer lists for the
/// sorting and set tasks, count maps for keyword counting, free text for
/// document merging. `Lists` holds the product of a split response (several
/// lists from a single completion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Content {
    Numbers(Vec<i64>),
    Lists(Vec<Vec<i64>>),
    Counts(BTreeMap<String, i64>),
    Text(String),
}

impl Content {
    pub fn as_numbers(&self) -> Option<&[i64]> {
        match self {
            Content::Numbers(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_counts(&self) -> Option<&BTreeMap<String, i64>> {
        match self {
            Content::Counts(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Content::Text(t) => Some(t),
            _ => None,
        }
    }

    /// Canonical single-line rendering, used for content digests in trace
    /// output and for binding thought contents back into prompts.
    pub fn canonical(&self) -> String {
        match self {
            Content::Numbers(v) => format_list(v),
            Content::Lists(ls) => {
                let parts: Vec<String> = ls.iter().map(|l| format_list(l)).collect();
                parts.join(" ")
            }
            Content::Counts(m) => format_counts(m),
            Content::Text(t) => t.clone(),
        }
    }
}

impl fmt::Display for Content {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// `[3, 1, 2]` — the list style used throughout the prompt fixtures.
pub fn format_list(values: &[i64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

/// `{"Peru": 1, "Chile": 2}` — JSON-ish dictionary with stable key order.
pub fn format_counts(map: &BTreeMap<String, i64>) -> String {
    let inner: Vec<String> = map.iter().map(|(k, v)| format!("\"{k}\": {v}")).collect();
    format!("{{{}}}", inner.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_formatting_matches_fixture_style() {
        assert_eq!(format_list(&[3, 1, 2]), "[3, 1, 2]");
        assert_eq!(format_list(&[]), "[]");
    }

    #[test]
    fn count_formatting_is_sorted_and_quoted() {
        let mut m = BTreeMap::new();
        m.insert("Peru".to_string(), 1);
        m.insert("Chile".to_string(), 2);
        assert_eq!(format_counts(&m), "{\"Chile\": 2, \"Peru\": 1}");
    }
}
