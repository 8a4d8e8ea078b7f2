//! Task score functions and validators.
//!
//! All error scorers are lower-better counts; document-merge quality is the
//! one higher-better scorer. The formulas are deliberately literal: the digit
//! histogram term Y ranges over 0..=9 only, so out-of-range output values
//! affect the inversion term X but never Y.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    LowerBetter,
    HigherBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScorerKind {
    Local,
    LlmAssisted { samples: usize },
}

/// Registry entry describing one scorer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub id: String,
    pub polarity: Polarity,
    pub kind: ScorerKind,
}

/// A computed score plus whether clipping was applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreValue {
    pub value: f64,
    pub clipped: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("score component {0} outside [0, 10]")]
    OutOfRangeScore(f64),
    #[error("all scoring samples were unparseable")]
    AllSamplesUnparseable,
}

/// Sorting error scope: X (adjacent inversions) + Y (digit-frequency drift).
///
/// X = Σ sgn(max(b_i − b_{i+1}, 0)) over consecutive output pairs;
/// Y = Σ_{x=0..9} |count(output, x) − count(input, x)|.
pub fn sorting_error_scope(input: &[i64], output: &[i64]) -> u64 {
    let x: u64 = output
        .windows(2)
        .filter(|w| w[0] > w[1])
        .count() as u64;
    let y: u64 = (0..=9)
        .map(|d| {
            let got = output.iter().filter(|v| **v == d).count() as i64;
            let want = input.iter().filter(|v| **v == d).count() as i64;
            (got - want).unsigned_abs()
        })
        .sum();
    x + y
}

/// min(e, n), flagging when clipping actually bit.
pub fn clip_error(e: u64, n: u64) -> ScoreValue {
    ScoreValue {
        value: e.min(n) as f64,
        clipped: e > n,
    }
}

/// max(n − e, 0): the count of correctly handled elements.
pub fn positive_score(e: u64, n: u64) -> u64 {
    n.saturating_sub(e)
}

/// Set-intersection error scope X1 + X2 + Xd.
///
/// With C* the distinct elements of `c` and T = a ∩ b: X1 counts spurious
/// distinct elements, X2 missing ones, and Xd duplicates in the raw list
/// (the model expresses the set as a list, so multiplicity is tracked
/// separately from membership).
pub fn intersection_error_scope(a: &[i64], b: &[i64], c: &[i64]) -> u64 {
    let a_set: BTreeSet<i64> = a.iter().copied().collect();
    let t: BTreeSet<i64> = b.iter().copied().filter(|v| a_set.contains(v)).collect();
    let c_distinct: BTreeSet<i64> = c.iter().copied().collect();
    let x1 = c_distinct.difference(&t).count() as u64;
    let x2 = t.difference(&c_distinct).count() as u64;
    let xd = (c.len() - c_distinct.len()) as u64;
    x1 + x2 + xd
}

/// L1 distance between two count maps over the union of their keys.
pub fn keyword_error(computed: &BTreeMap<String, i64>, truth: &BTreeMap<String, i64>) -> u64 {
    let keys: BTreeSet<&String> = computed.keys().chain(truth.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let got = computed.get(k).copied().unwrap_or(0);
            let want = truth.get(k).copied().unwrap_or(0);
            (got - want).unsigned_abs()
        })
        .sum()
}

/// Harmonic mean of the averaged redundancy and retained-information scores.
///
/// Each sample must lie in [0, 10]; the result is 0 when both means are 0.
pub fn merge_quality(
    redundancy_samples: &[f64],
    retained_samples: &[f64],
) -> Result<f64, ScoringError> {
    for &v in redundancy_samples.iter().chain(retained_samples) {
        if !(0.0..=10.0).contains(&v) {
            return Err(ScoringError::OutOfRangeScore(v));
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    if redundancy_samples.is_empty() || retained_samples.is_empty() {
        return Err(ScoringError::AllSamplesUnparseable);
    }
    let r = mean(redundancy_samples);
    let t = mean(retained_samples);
    if r + t == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * r * t / (r + t))
}

/// True iff `merged` equals the key-wise sum of `parts`.
pub fn keyword_merge_validator(
    parts: &[BTreeMap<String, i64>],
    merged: &BTreeMap<String, i64>,
) -> bool {
    let mut expected: BTreeMap<String, i64> = BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            *expected.entry(k.clone()).or_insert(0) += v;
        }
    }
    expected.retain(|_, v| *v != 0);
    let mut merged_clean = merged.clone();
    merged_clean.retain(|_, v| *v != 0);
    expected == merged_clean
}

/// Country names recognised by the keyword-counting task, multi-word names
/// first so substring matches never shadow each other.
pub const COUNTRIES: &[&str] = &[
    "United States",
    "New Zealand",
    "North Korea",
    "South Korea",
    "Costa Rica",
    "Sri Lanka",
    "Peru",
    "Argentina",
    "Brazil",
    "Iran",
    "China",
    "Italy",
    "France",
    "Canada",
    "Australia",
    "Ukraine",
    "Poland",
    "Chile",
    "Uruguay",
    "Paraguay",
    "Germany",
    "Spain",
    "Portugal",
    "Japan",
    "India",
    "Egypt",
    "Kenya",
    "Mexico",
    "Norway",
    "Sweden",
    "Finland",
    "Denmark",
];

/// Exact frequency of each known country name in `text`.
///
/// This is the ground truth for the keyword-counting task; the same function
/// backs both reference targets and the perfect-answer oracle so the two can
/// never drift apart.
pub fn count_country_mentions(text: &str) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    for name in COUNTRIES {
        let n = text.matches(name).count() as i64;
        if n > 0 {
            out.insert((*name).to_string(), n);
        }
    }
    out
}

/// Key-wise sum of count maps, the reference result of a merge step.
pub fn sum_counts<'a, I>(parts: I) -> BTreeMap<String, i64>
where
    I: IntoIterator<Item = &'a BTreeMap<String, i64>>,
{
    let mut out = BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            *out.entry(k.clone()).or_insert(0) += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_few_shot_pair_scores_zero() {
        let input = [5, 1, 0, 1, 2, 0, 4, 8, 1, 9, 5, 1, 3, 3, 9, 7];
        let output = [0, 0, 1, 1, 1, 1, 2, 3, 3, 4, 5, 5, 7, 8, 9, 9];
        assert_eq!(sorting_error_scope(&input, &output), 0);
    }

    #[test]
    fn missing_element_counts_once() {
        let input = [8, 7, 1, 1, 1, 1, 3, 3, 0, 9, 4, 1, 0, 2, 5, 1];
        let output = [0, 0, 1, 1, 1, 1, 1, 2, 3, 3, 4, 5, 7, 8, 9];
        assert_eq!(sorting_error_scope(&input, &output), 1);
    }

    #[test]
    fn single_inversion() {
        assert_eq!(sorting_error_scope(&[1, 2], &[2, 1]), 1);
    }

    #[test]
    fn clipping_and_positive_score() {
        assert_eq!(clip_error(3, 32), ScoreValue { value: 3.0, clipped: false });
        assert_eq!(clip_error(40, 32), ScoreValue { value: 32.0, clipped: true });
        assert_eq!(clip_error(0, 32).value, 0.0);
        assert_eq!(positive_score(0, 32), 32);
        assert_eq!(positive_score(1, 32), 31);
        assert_eq!(positive_score(64, 32), 0);
    }

    #[test]
    fn intersection_duplicate_and_missing() {
        // a ∩ b = {11, 14, 46, 19}; one duplicated 14 → Xd = 1.
        let a = [11, 14, 46, 19, 99, 98];
        let b = [11, 14, 46, 19, 1, 2];
        assert_eq!(intersection_error_scope(&a, &b, &[11, 14, 46, 14, 19]), 1);
        // a ∩ b = {56, 49, 37, 3, 50}; two missing → X2 = 2.
        let a = [56, 49, 37, 3, 50, 7];
        let b = [56, 49, 37, 3, 50, 8];
        assert_eq!(intersection_error_scope(&a, &b, &[50, 56, 49]), 2);
        assert_eq!(intersection_error_scope(&[1], &[2], &[]), 0);
    }

    #[test]
    fn keyword_l1_distance() {
        let computed: BTreeMap<String, i64> =
            [("Peru", 1), ("Argentina", 1), ("Brazil", 1)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let truth: BTreeMap<String, i64> = [("Peru", 1), ("Argentina", 3), ("Brazil", 2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(keyword_error(&computed, &truth), 3);
        assert_eq!(keyword_error(&truth, &truth), 0);
        let spurious: BTreeMap<String, i64> =
            [("Chile".to_string(), 1)].into_iter().collect();
        assert_eq!(keyword_error(&spurious, &BTreeMap::new()), 1);
    }

    #[test]
    fn merge_quality_examples() {
        let q = merge_quality(&[5.0, 8.0, 3.0], &[10.0, 10.0, 9.0]).unwrap();
        assert!((q - 6.87).abs() <= 0.01, "got {q}");
        let q = merge_quality(&[5.0, 8.0, 7.0], &[8.0, 10.0, 10.0]).unwrap();
        assert!((q - 7.78).abs() <= 0.01, "got {q}");
        assert_eq!(merge_quality(&[10.0], &[10.0]).unwrap(), 10.0);
        assert_eq!(merge_quality(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(merge_quality(&[11.0], &[1.0]).is_err());
    }

    #[test]
    fn country_counting_matches_hand_tally() {
        let text = "Trade between the United States and Canada grew; \
                    Canada and New Zealand signed accords, and New Zealand \
                    welcomed Peru.";
        let counts = count_country_mentions(text);
        assert_eq!(counts.get("United States"), Some(&1));
        assert_eq!(counts.get("Canada"), Some(&2));
        assert_eq!(counts.get("New Zealand"), Some(&2));
        assert_eq!(counts.get("Peru"), Some(&1));
        assert_eq!(counts.get("Poland"), None);
    }

    #[test]
    fn merge_validator() {
        let p1: BTreeMap<String, i64> = [("Peru".to_string(), 1)].into_iter().collect();
        let p2 = p1.clone();
        let merged: BTreeMap<String, i64> = [("Peru".to_string(), 2)].into_iter().collect();
        assert!(keyword_merge_validator(&[p1.clone(), p2], &merged));
        assert!(!keyword_merge_validator(&[p1, BTreeMap::new()], &merged));
    }
}
