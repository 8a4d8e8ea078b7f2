//! Use cases, problem instances, adapters, and prompting-scheme builders.
//!
//! A *use case* is a task family (sorting, set intersection, keyword
//! counting, document merging); a *scheme* is a prompting topology (direct,
//! chain-of-thought, self-consistency, tree search, graph). [`build_scheme`]
//! translates a (scheme, use case, size) triple into a concrete operation
//! plan, and [`adapter_for`] wraps a generated instance in the matching
//! [`UseCaseAdapter`] implementation.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::IndexedRandom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::content::{format_list, Content};
use crate::engine::{EngineError, UseCaseAdapter};
use crate::goo::{GraphOfOperations, KeepScope, OpId, OpKind, OperationSpec, Select};
use crate::prompting::{
    parse_count_map, parse_digit_list, parse_named_lists, parse_quoted_fields, parse_tagged,
    parse_tagged_number, ParseError, TemplateRegistry,
};
use crate::scoring::{
    clip_error, count_country_mentions, intersection_error_scope, keyword_error,
    keyword_merge_validator, merge_quality, sorting_error_scope, sum_counts, Polarity,
};
use crate::thought_graph::Thought;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    Sorting,
    SetIntersection,
    KeywordCounting,
    DocumentMerge,
}

impl UseCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            UseCase::Sorting => "sorting",
            UseCase::SetIntersection => "set_intersection",
            UseCase::KeywordCounting => "keyword_counting",
            UseCase::DocumentMerge => "document_merge",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "sorting" => Some(UseCase::Sorting),
            "set_intersection" | "intersection" => Some(UseCase::SetIntersection),
            "keyword_counting" | "keyword" => Some(UseCase::KeywordCounting),
            "document_merge" | "doc_merge" => Some(UseCase::DocumentMerge),
            _ => None,
        }
    }
}

/// Prompting topology, with its tunable width/depth parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// One direct completion.
    Io,
    /// One few-shot chain-of-thought completion.
    Cot,
    /// `k` chain-of-thought completions, keep the best.
    CotSc { k: usize },
    /// Tree search: a level of `k` candidates, then `levels - 1` rounds of
    /// branching from the best candidate, keeping the best overall.
    Tot { k: usize, levels: usize },
    /// The full graph scheme for the use case.
    Got,
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Io => "io".to_string(),
            Scheme::Cot => "cot".to_string(),
            Scheme::CotSc { k } => format!("cot_sc_{k}"),
            Scheme::Tot { k, levels } => format!("tot_{k}x{levels}"),
            Scheme::Got => "got".to_string(),
        }
    }

    /// Parse a CLI name. `tot` and `tot2` carry their customary defaults.
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "io" => Some(Scheme::Io),
            "cot" => Some(Scheme::Cot),
            "cot-sc" | "cot_sc" => Some(Scheme::CotSc { k: 10 }),
            "tot" => Some(Scheme::Tot { k: 20, levels: 3 }),
            "tot2" => Some(Scheme::Tot { k: 10, levels: 6 }),
            "got" => Some(Scheme::Got),
            _ => None,
        }
    }
}

/// One concrete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub use_case: UseCase,
    pub size: usize,
    pub seed: u64,
    pub data: InstanceData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceData {
    Sorting { input: Vec<i64> },
    Intersection { set_a: Vec<i64>, set_b: Vec<i64> },
    Keyword { text: String },
    DocMerge { docs: Vec<String> },
}

const NDA_DOCS: [&str; 4] = [
    include_str!("../assets/fixtures/nda_doc1.txt"),
    include_str!("../assets/fixtures/nda_doc2.txt"),
    include_str!("../assets/fixtures/nda_doc3.txt"),
    include_str!("../assets/fixtures/nda_doc4.txt"),
];

/// The pinned keyword-counting passage used by regression fixtures.
pub const KEYWORD_PASSAGE: &str = include_str!("../assets/fixtures/keyword_passage.txt");

/// Deterministically generate an instance from `(use_case, size, seed)`.
pub fn generate_instance(use_case: UseCase, size: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x51_7c_c1_b7_27_22_0a_95));
    let data = match use_case {
        UseCase::Sorting => InstanceData::Sorting {
            input: (0..size).map(|_| rng.random_range(0..=9)).collect(),
        },
        UseCase::SetIntersection => {
            let universe = (2 * size) as i64;
            let draw_set = |rng: &mut ChaCha8Rng| {
                let mut pool: Vec<i64> = (0..universe).collect();
                pool.shuffle(rng);
                pool.truncate(size);
                pool
            };
            InstanceData::Intersection { set_a: draw_set(&mut rng), set_b: draw_set(&mut rng) }
        }
        UseCase::KeywordCounting => InstanceData::Keyword {
            text: synthesize_passage(size.max(16) / 2, &mut rng),
        },
        UseCase::DocumentMerge => InstanceData::DocMerge {
            docs: NDA_DOCS.iter().map(|d| d.trim().to_string()).collect(),
        },
    };
    Instance { use_case, size, seed, data }
}

/// The pinned passage as an instance, for fixture tests and demos.
pub fn keyword_pinned_instance() -> Instance {
    Instance {
        use_case: UseCase::KeywordCounting,
        size: KEYWORD_PASSAGE.split(". ").count(),
        seed: 0,
        data: InstanceData::Keyword { text: KEYWORD_PASSAGE.trim().to_string() },
    }
}

/// A synthetic country-mention passage of `sentences` sentences.
fn synthesize_passage(sentences: usize, rng: &mut ChaCha8Rng) -> String {
    const PATTERNS: &[&str] = &[
        "{a} and {b} deepened their trade relations this decade.",
        "Scholars from {a} often visit {b} to study shared history.",
        "The partnership between {a} and {b} shaped regional policy.",
        "Travellers compare the coastal towns of {a} with those of {b}.",
        "A joint venture linked firms in {a} to suppliers in {b}.",
        "Cultural festivals in {a} now feature artists from {b}.",
        "{a} exported grain to {b} throughout the last century.",
        "Diplomats from {a} met their counterparts from {b} twice.",
    ];
    let mut out = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        let pattern = PATTERNS.choose(rng).expect("patterns non-empty");
        let a = crate::scoring::COUNTRIES.choose(rng).expect("countries");
        let b = loop {
            let c = crate::scoring::COUNTRIES.choose(rng).expect("countries");
            if c != a {
                break c;
            }
        };
        out.push(pattern.replace("{a}", a).replace("{b}", b));
    }
    out.join(" ")
}

/// Construct the task adapter for an instance.
pub fn adapter_for(instance: &Instance) -> Box<dyn UseCaseAdapter> {
    match &instance.data {
        InstanceData::Sorting { input } => Box::new(SortingAdapter { input: input.clone() }),
        InstanceData::Intersection { set_a, set_b } => Box::new(IntersectionAdapter {
            set_a: set_a.clone(),
            set_b: set_b.clone(),
        }),
        InstanceData::Keyword { text } => Box::new(KeywordAdapter {
            truth: count_country_mentions(text),
            text: text.clone(),
        }),
        InstanceData::DocMerge { docs } => Box::new(DocMergeAdapter { docs: docs.clone() }),
    }
}

fn bindings(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn numbers_of(thought: &Thought) -> Vec<i64> {
    thought.content.as_numbers().map(<[i64]>::to_vec).unwrap_or_default()
}

fn target_numbers(thought: &Thought) -> Vec<i64> {
    thought
        .target
        .as_ref()
        .and_then(Content::as_numbers)
        .map(<[i64]>::to_vec)
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Sorting
// ---------------------------------------------------------------------------

pub struct SortingAdapter {
    pub input: Vec<i64>,
}

impl SortingAdapter {
    fn split_arity_of(prompt_id: &str) -> usize {
        match prompt_id {
            "split_prompt_32" => 2,
            "split_prompt_64" => 4,
            "split_prompt_128" => 8,
            _ => 1,
        }
    }
}

impl UseCaseAdapter for SortingAdapter {
    fn name(&self) -> &str {
        "sorting"
    }

    fn polarity(&self) -> Polarity {
        Polarity::LowerBetter
    }

    fn root_thought(&self) -> (Content, Option<Content>) {
        (
            Content::Numbers(self.input.clone()),
            Some(Content::Numbers(self.input.clone())),
        )
    }

    fn build_prompt(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        let text = match prompt_id {
            "sort_prompt" | "sort_prompt_plain" => {
                let mut b = bindings(&[("input_list", inputs[0].content.canonical())]);
                if prompt_id == "sort_prompt_plain" {
                    b.insert("examples".to_string(), String::new());
                }
                registry.render("sort_prompt", &b)?
            }
            "split_prompt_32" | "split_prompt_64" | "split_prompt_128" => registry.render(
                prompt_id,
                &bindings(&[("input_list", inputs[0].content.canonical())]),
            )?,
            "merge_prompt" => {
                let l1 = numbers_of(inputs[0]);
                let l2 = numbers_of(inputs[1]);
                registry.render(
                    "merge_prompt",
                    &bindings(&[
                        ("length", l1.len().max(l2.len()).to_string()),
                        ("length_combined", (l1.len() + l2.len()).to_string()),
                        ("input_list1", format_list(&l1)),
                        ("input_list2", format_list(&l2)),
                    ]),
                )?
            }
            "improve_prompt" => {
                let candidate = inputs[inputs.len() - 1];
                let reference = target_numbers(candidate);
                registry.render(
                    "improve_prompt",
                    &bindings(&[
                        ("length", reference.len().to_string()),
                        ("input_list", format_list(&reference)),
                        ("sorted_list", candidate.content.canonical()),
                    ]),
                )?
            }
            other => {
                return Err(EngineError::Adapter(format!(
                    "sorting adapter has no prompt `{other}`"
                )))
            }
        };
        Ok(text)
    }

    fn parse_response(&self, prompt_id: &str, text: &str) -> Result<Vec<Content>, ParseError> {
        let arity = Self::split_arity_of(prompt_id);
        if arity > 1 {
            Ok(parse_named_lists(text, arity)?
                .into_iter()
                .map(Content::Numbers)
                .collect())
        } else {
            Ok(vec![Content::Numbers(parse_digit_list(text)?)])
        }
    }

    fn target_for(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        _output_index: usize,
        output: &Content,
    ) -> Option<Content> {
        match prompt_id {
            // A part is its own reference multiset.
            "split_prompt_32" | "split_prompt_64" | "split_prompt_128" => Some(output.clone()),
            // A sorted candidate should contain exactly its source elements.
            "sort_prompt" | "sort_prompt_plain" => Some(
                inputs[0]
                    .target
                    .clone()
                    .unwrap_or_else(|| inputs[0].content.clone()),
            ),
            // A merge should contain the union of both sources' references.
            "merge_prompt" => {
                let mut combined = Vec::new();
                for t in inputs {
                    combined.extend(target_numbers(t));
                }
                Some(Content::Numbers(combined))
            }
            // Refinement preserves the reference.
            "improve_prompt" => inputs[inputs.len() - 1].target.clone(),
            _ => None,
        }
    }

    fn thought_class(&self, prompt_id: &str) -> String {
        match prompt_id {
            "split_prompt_32" | "split_prompt_64" | "split_prompt_128" => "part",
            "merge_prompt" => "merged",
            "improve_prompt" => "improved",
            _ => "candidate",
        }
        .to_string()
    }

    fn is_llm_scorer(&self, _scorer_id: &str) -> bool {
        false
    }

    fn local_score(&self, _scorer_id: &str, thought: &Thought) -> f64 {
        let reference = target_numbers(thought);
        match thought.content.as_numbers() {
            Some(out) => {
                clip_error(sorting_error_scope(&reference, out), reference.len() as u64).value
            }
            None => self.worst_score(),
        }
    }

    fn score_prompt(
        &self,
        scorer_id: &str,
        _thought: &Thought,
        _registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        Err(EngineError::Adapter(format!("`{scorer_id}` is not an LLM scorer")))
    }

    fn parse_score_sample(&self, _scorer_id: &str, _text: &str) -> Result<Vec<f64>, ParseError> {
        Err(ParseError::NoListFound)
    }

    fn combine_score_samples(&self, _scorer_id: &str, _samples: &[Vec<f64>]) -> Option<f64> {
        None
    }

    fn validate(&self, _validator_id: &str, _candidate: &Thought, _origin: &[&Thought]) -> bool {
        true
    }

    fn final_error(&self, _comparator_id: &str, thought: &Thought) -> f64 {
        match thought.content.as_numbers() {
            Some(out) => {
                clip_error(sorting_error_scope(&self.input, out), self.input.len() as u64).value
            }
            None => self.input.len() as f64,
        }
    }

    fn split_arity(&self, prompt_id: &str) -> usize {
        Self::split_arity_of(prompt_id)
    }
}

// ---------------------------------------------------------------------------
// Set intersection
// ---------------------------------------------------------------------------

pub struct IntersectionAdapter {
    pub set_a: Vec<i64>,
    pub set_b: Vec<i64>,
}

impl IntersectionAdapter {
    fn split_arity_of(prompt_id: &str) -> usize {
        match prompt_id {
            "set_split_prompt_32" => 2,
            "set_split_prompt_64" => 4,
            "set_split_prompt_128" => 8,
            _ => 1,
        }
    }

    fn true_intersection(&self, subset_of_b: &[i64]) -> Vec<i64> {
        let a: BTreeSet<i64> = self.set_a.iter().copied().collect();
        let mut t: Vec<i64> = subset_of_b.iter().copied().filter(|v| a.contains(v)).collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}

impl UseCaseAdapter for IntersectionAdapter {
    fn name(&self) -> &str {
        "set_intersection"
    }

    fn polarity(&self) -> Polarity {
        Polarity::LowerBetter
    }

    fn root_thought(&self) -> (Content, Option<Content>) {
        (
            Content::Numbers(self.set_b.clone()),
            Some(Content::Numbers(self.true_intersection(&self.set_b))),
        )
    }

    fn build_prompt(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        let text = match prompt_id {
            "intersect_prompt" | "intersect_prompt_plain" => {
                let mut b = bindings(&[
                    ("set1", format_list(&self.set_a)),
                    ("set2", inputs[0].content.canonical()),
                ]);
                if prompt_id == "intersect_prompt_plain" {
                    b.insert("examples".to_string(), String::new());
                }
                registry.render("intersect_prompt", &b)?
            }
            "set_split_prompt_32" | "set_split_prompt_64" | "set_split_prompt_128" => registry
                .render(prompt_id, &bindings(&[("input", inputs[0].content.canonical())]))?,
            "set_merge_prompt" => registry.render(
                "set_merge_prompt",
                &bindings(&[
                    ("input1", inputs[0].content.canonical()),
                    ("input2", inputs[1].content.canonical()),
                ]),
            )?,
            other => {
                return Err(EngineError::Adapter(format!(
                    "intersection adapter has no prompt `{other}`"
                )))
            }
        };
        Ok(text)
    }

    fn parse_response(&self, prompt_id: &str, text: &str) -> Result<Vec<Content>, ParseError> {
        let arity = Self::split_arity_of(prompt_id);
        if arity > 1 {
            Ok(parse_named_lists(text, arity)?
                .into_iter()
                .map(Content::Numbers)
                .collect())
        } else {
            Ok(vec![Content::Numbers(parse_digit_list(text)?)])
        }
    }

    fn target_for(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        _output_index: usize,
        output: &Content,
    ) -> Option<Content> {
        match prompt_id {
            // A part of set B should eventually contribute A ∩ part.
            "set_split_prompt_32" | "set_split_prompt_64" | "set_split_prompt_128" => {
                let part = output.as_numbers().unwrap_or_default();
                Some(Content::Numbers(self.true_intersection(part)))
            }
            "intersect_prompt" | "intersect_prompt_plain" => Some(
                inputs[0]
                    .target
                    .clone()
                    .unwrap_or_else(|| Content::Numbers(Vec::new())),
            ),
            // Merging unions the references (parts are disjoint).
            "set_merge_prompt" => {
                let mut union: Vec<i64> = inputs.iter().flat_map(|t| target_numbers(t)).collect();
                union.sort_unstable();
                union.dedup();
                Some(Content::Numbers(union))
            }
            _ => None,
        }
    }

    fn thought_class(&self, prompt_id: &str) -> String {
        match prompt_id {
            "set_split_prompt_32" | "set_split_prompt_64" | "set_split_prompt_128" => "part",
            "set_merge_prompt" => "merged",
            _ => "candidate",
        }
        .to_string()
    }

    fn is_llm_scorer(&self, _scorer_id: &str) -> bool {
        false
    }

    fn local_score(&self, _scorer_id: &str, thought: &Thought) -> f64 {
        let reference = target_numbers(thought);
        match thought.content.as_numbers() {
            // The reference plays both set roles: T = reference exactly.
            Some(out) => intersection_error_scope(&reference, &reference, out) as f64,
            None => self.worst_score(),
        }
    }

    fn score_prompt(
        &self,
        scorer_id: &str,
        _thought: &Thought,
        _registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        Err(EngineError::Adapter(format!("`{scorer_id}` is not an LLM scorer")))
    }

    fn parse_score_sample(&self, _scorer_id: &str, _text: &str) -> Result<Vec<f64>, ParseError> {
        Err(ParseError::NoListFound)
    }

    fn combine_score_samples(&self, _scorer_id: &str, _samples: &[Vec<f64>]) -> Option<f64> {
        None
    }

    fn validate(&self, _validator_id: &str, _candidate: &Thought, _origin: &[&Thought]) -> bool {
        true
    }

    fn final_error(&self, _comparator_id: &str, thought: &Thought) -> f64 {
        match thought.content.as_numbers() {
            Some(out) => intersection_error_scope(&self.set_a, &self.set_b, out) as f64,
            None => self.set_b.len() as f64,
        }
    }

    fn split_arity(&self, prompt_id: &str) -> usize {
        Self::split_arity_of(prompt_id)
    }
}

// ---------------------------------------------------------------------------
// Keyword counting
// ---------------------------------------------------------------------------

pub struct KeywordAdapter {
    pub text: String,
    pub truth: BTreeMap<String, i64>,
}

impl UseCaseAdapter for KeywordAdapter {
    fn name(&self) -> &str {
        "keyword_counting"
    }

    fn polarity(&self) -> Polarity {
        Polarity::LowerBetter
    }

    fn root_thought(&self) -> (Content, Option<Content>) {
        (
            Content::Text(self.text.clone()),
            Some(Content::Counts(self.truth.clone())),
        )
    }

    fn build_prompt(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        let text = match prompt_id {
            "count_prompt" | "count_prompt_plain" => {
                let mut b =
                    bindings(&[("input_text", inputs[0].content.canonical())]);
                if prompt_id == "count_prompt_plain" {
                    b.insert("examples".to_string(), String::new());
                }
                registry.render("count_prompt", &b)?
            }
            "keyword_split_prompt" => registry.render(
                "keyword_split_prompt",
                &bindings(&[("input_text", inputs[0].content.canonical())]),
            )?,
            "merge_count_prompt" => registry.render(
                "merge_count_prompt",
                &bindings(&[
                    ("dictionary_1", inputs[0].content.canonical()),
                    ("dictionary_2", inputs[1].content.canonical()),
                ]),
            )?,
            "improve_merge_prompt" => {
                // Inputs: the two original dictionaries, then the candidate.
                let candidate = inputs[inputs.len() - 1];
                registry.render(
                    "improve_merge_prompt",
                    &bindings(&[
                        ("dictionary_1", inputs[0].content.canonical()),
                        ("dictionary_2", inputs[1].content.canonical()),
                        ("dictionary_incorrect", candidate.content.canonical()),
                    ]),
                )?
            }
            other => {
                return Err(EngineError::Adapter(format!(
                    "keyword adapter has no prompt `{other}`"
                )))
            }
        };
        Ok(text)
    }

    fn parse_response(&self, prompt_id: &str, text: &str) -> Result<Vec<Content>, ParseError> {
        if prompt_id == "keyword_split_prompt" {
            Ok(parse_quoted_fields(text, "Paragraph", 4)?
                .into_iter()
                .map(Content::Text)
                .collect())
        } else {
            Ok(vec![Content::Counts(parse_count_map(text)?)])
        }
    }

    fn target_for(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        _output_index: usize,
        output: &Content,
    ) -> Option<Content> {
        match prompt_id {
            // The reference of a paragraph is its true count map.
            "keyword_split_prompt" => output
                .as_text()
                .map(|t| Content::Counts(count_country_mentions(t))),
            "count_prompt" | "count_prompt_plain" => Some(
                inputs[0]
                    .target
                    .clone()
                    .unwrap_or_else(|| Content::Counts(BTreeMap::new())),
            ),
            // Merging sums the references.
            "merge_count_prompt" => {
                let maps: Vec<BTreeMap<String, i64>> = inputs
                    .iter()
                    .filter_map(|t| t.target.as_ref().and_then(Content::as_counts).cloned())
                    .collect();
                Some(Content::Counts(sum_counts(maps.iter())))
            }
            "improve_merge_prompt" => inputs[inputs.len() - 1].target.clone(),
            _ => None,
        }
    }

    fn thought_class(&self, prompt_id: &str) -> String {
        match prompt_id {
            "keyword_split_prompt" => "part",
            "merge_count_prompt" => "merged",
            "improve_merge_prompt" => "improved",
            _ => "candidate",
        }
        .to_string()
    }

    fn is_llm_scorer(&self, _scorer_id: &str) -> bool {
        false
    }

    fn local_score(&self, _scorer_id: &str, thought: &Thought) -> f64 {
        let reference = thought
            .target
            .as_ref()
            .and_then(Content::as_counts)
            .cloned()
            .unwrap_or_default();
        match thought.content.as_counts() {
            Some(counts) => keyword_error(counts, &reference) as f64,
            None => self.worst_score(),
        }
    }

    fn score_prompt(
        &self,
        scorer_id: &str,
        _thought: &Thought,
        _registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        Err(EngineError::Adapter(format!("`{scorer_id}` is not an LLM scorer")))
    }

    fn parse_score_sample(&self, _scorer_id: &str, _text: &str) -> Result<Vec<f64>, ParseError> {
        Err(ParseError::NoMapFound)
    }

    fn combine_score_samples(&self, _scorer_id: &str, _samples: &[Vec<f64>]) -> Option<f64> {
        None
    }

    fn validate(&self, _validator_id: &str, candidate: &Thought, origin: &[&Thought]) -> bool {
        let parts: Vec<BTreeMap<String, i64>> = origin
            .iter()
            .filter_map(|t| t.content.as_counts().cloned())
            .collect();
        if parts.len() != origin.len() || origin.is_empty() {
            return false;
        }
        match candidate.content.as_counts() {
            Some(merged) => keyword_merge_validator(&parts, merged),
            None => false,
        }
    }

    fn final_error(&self, _comparator_id: &str, thought: &Thought) -> f64 {
        match thought.content.as_counts() {
            Some(counts) => keyword_error(counts, &self.truth) as f64,
            None => self.truth.values().sum::<i64>() as f64,
        }
    }

    fn split_arity(&self, prompt_id: &str) -> usize {
        if prompt_id == "keyword_split_prompt" {
            4
        } else {
            1
        }
    }
}

// ---------------------------------------------------------------------------
// Document merge
// ---------------------------------------------------------------------------

pub struct DocMergeAdapter {
    pub docs: Vec<String>,
}

impl DocMergeAdapter {
    fn doc_bindings(&self) -> Vec<(&'static str, String)> {
        vec![
            ("doc1", self.docs[0].clone()),
            ("doc2", self.docs[1].clone()),
            ("doc3", self.docs[2].clone()),
            ("doc4", self.docs[3].clone()),
        ]
    }
}

impl UseCaseAdapter for DocMergeAdapter {
    fn name(&self) -> &str {
        "document_merge"
    }

    fn polarity(&self) -> Polarity {
        Polarity::HigherBetter
    }

    fn root_thought(&self) -> (Content, Option<Content>) {
        (Content::Text(self.docs.join("\n\n")), None)
    }

    fn build_prompt(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        let mut pairs = self.doc_bindings();
        let text = match prompt_id {
            "nda_merge_prompt" => registry.render("nda_merge_prompt", &bindings(&pairs))?,
            "nda_aggregate_prompt" => {
                let blocks: Vec<String> = inputs
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        format!("<S{n}>\n{body}\n</S{n}>", n = i + 1, body = t.content.canonical())
                    })
                    .collect();
                pairs.push(("num_ndas_summaries", inputs.len().to_string()));
                pairs.push(("summaries", blocks.join("\n")));
                registry.render("nda_aggregate_prompt", &bindings(&pairs))?
            }
            "nda_improve_prompt" => {
                pairs.push(("s", inputs[inputs.len() - 1].content.canonical()));
                registry.render("nda_improve_prompt", &bindings(&pairs))?
            }
            other => {
                return Err(EngineError::Adapter(format!(
                    "document-merge adapter has no prompt `{other}`"
                )))
            }
        };
        Ok(text)
    }

    fn parse_response(&self, _prompt_id: &str, text: &str) -> Result<Vec<Content>, ParseError> {
        Ok(vec![Content::Text(parse_tagged(text, "Merged")?)])
    }

    fn target_for(
        &self,
        _prompt_id: &str,
        _inputs: &[&Thought],
        _output_index: usize,
        _output: &Content,
    ) -> Option<Content> {
        None
    }

    fn thought_class(&self, prompt_id: &str) -> String {
        match prompt_id {
            "nda_aggregate_prompt" => "aggregated",
            "nda_improve_prompt" => "improved",
            _ => "summary",
        }
        .to_string()
    }

    fn is_llm_scorer(&self, _scorer_id: &str) -> bool {
        true
    }

    fn local_score(&self, _scorer_id: &str, _thought: &Thought) -> f64 {
        self.worst_score()
    }

    fn score_prompt(
        &self,
        _scorer_id: &str,
        thought: &Thought,
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError> {
        let mut pairs = self.doc_bindings();
        pairs.push(("s", thought.content.canonical()));
        Ok(registry.render("nda_score_prompt", &bindings(&pairs))?)
    }

    fn parse_score_sample(&self, _scorer_id: &str, text: &str) -> Result<Vec<f64>, ParseError> {
        let redundancy = parse_tagged_number(text, "Redundancy")?;
        let retained = parse_tagged_number(text, "Retained")?;
        Ok(vec![redundancy, retained])
    }

    fn combine_score_samples(&self, _scorer_id: &str, samples: &[Vec<f64>]) -> Option<f64> {
        let redundancy: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let retained: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        merge_quality(&redundancy, &retained).ok()
    }

    fn validate(&self, _validator_id: &str, _candidate: &Thought, _origin: &[&Thought]) -> bool {
        true
    }

    /// Open-ended task: report distance from a perfect quality score.
    fn final_error(&self, _comparator_id: &str, thought: &Thought) -> f64 {
        match thought.score {
            Some(s) if s.is_finite() => (10.0 - s).max(0.0),
            _ => 10.0,
        }
    }

    fn split_arity(&self, _prompt_id: &str) -> usize {
        1
    }
}

// ---------------------------------------------------------------------------
// Plan builders
// ---------------------------------------------------------------------------

struct PlanBuilder {
    ops: Vec<OperationSpec>,
    next: OpId,
}

impl PlanBuilder {
    fn new() -> Self {
        PlanBuilder { ops: Vec::new(), next: 0 }
    }

    fn push(&mut self, kind: OpKind, predecessors: Vec<OpId>, select: Select) -> OpId {
        let id = self.next;
        self.next += 1;
        self.ops.push(OperationSpec { id, kind, predecessors, select });
        id
    }

    fn op(&mut self, kind: OpKind, predecessors: Vec<OpId>) -> OpId {
        self.push(kind, predecessors, Select::All)
    }

    /// Generate → score → keep-best-1, returning the keep op.
    fn scored_branch(
        &mut self,
        kind: OpKind,
        predecessors: Vec<OpId>,
        select: Select,
        scorer_id: &str,
    ) -> OpId {
        let gen = self.push(kind, predecessors, select);
        let score = self.op(
            OpKind::Score { samples: 0, scorer_id: scorer_id.to_string() },
            vec![gen],
        );
        self.op(
            OpKind::KeepBestN { n: 1, scope: KeepScope::Predecessors },
            vec![score],
        )
    }

    fn finish(self) -> GraphOfOperations {
        GraphOfOperations::new(self.ops)
    }
}

/// Build the operation plan for `(scheme, use_case, size)`.
///
/// `size` selects the splitter variant for the graph schemes (32/64/128 for
/// the list tasks); it is ignored by the baselines and the document task.
pub fn build_scheme(scheme: Scheme, use_case: UseCase, size: usize) -> GraphOfOperations {
    match use_case {
        UseCase::Sorting => build_sorting(scheme, size),
        UseCase::SetIntersection => build_intersection(scheme, size),
        UseCase::KeywordCounting => build_keyword(scheme),
        UseCase::DocumentMerge => build_doc_merge(scheme),
    }
}

fn direct_prompt(use_case: UseCase, few_shot: bool) -> &'static str {
    match (use_case, few_shot) {
        (UseCase::Sorting, true) => "sort_prompt",
        (UseCase::Sorting, false) => "sort_prompt_plain",
        (UseCase::SetIntersection, true) => "intersect_prompt",
        (UseCase::SetIntersection, false) => "intersect_prompt_plain",
        (UseCase::KeywordCounting, true) => "count_prompt",
        (UseCase::KeywordCounting, false) => "count_prompt_plain",
        (UseCase::DocumentMerge, _) => "nda_merge_prompt",
    }
}

fn scorer_id(use_case: UseCase) -> &'static str {
    match use_case {
        UseCase::Sorting => "sorting_error",
        UseCase::SetIntersection => "intersection_error",
        UseCase::KeywordCounting => "keyword_error",
        UseCase::DocumentMerge => "merge_quality",
    }
}

fn comparator_id(use_case: UseCase) -> &'static str {
    use_case.as_str()
}

/// Baseline shapes shared across the three ground-truth tasks.
fn build_baseline(scheme: Scheme, use_case: UseCase) -> GraphOfOperations {
    let mut b = PlanBuilder::new();
    let scorer = scorer_id(use_case);
    let last = match scheme {
        Scheme::Io => {
            let gen = b.op(
                OpKind::Generate {
                    k: 1,
                    prompt_id: direct_prompt(use_case, false).to_string(),
                },
                vec![],
            );
            b.op(
                OpKind::Score { samples: 0, scorer_id: scorer.to_string() },
                vec![gen],
            )
        }
        Scheme::Cot => {
            let gen = b.op(
                OpKind::Generate {
                    k: 1,
                    prompt_id: direct_prompt(use_case, true).to_string(),
                },
                vec![],
            );
            b.op(
                OpKind::Score { samples: 0, scorer_id: scorer.to_string() },
                vec![gen],
            )
        }
        Scheme::CotSc { k } => b.scored_branch(
            OpKind::Generate { k, prompt_id: direct_prompt(use_case, true).to_string() },
            vec![],
            Select::All,
            scorer,
        ),
        Scheme::Tot { k, levels } => build_tot_levels(&mut b, use_case, k, levels),
        Scheme::Got => unreachable!("graph schemes are task-specific"),
    };
    b.op(
        OpKind::GroundTruth { comparator_id: comparator_id(use_case).to_string() },
        vec![last],
    );
    b.finish()
}

/// Tree search: sorting refines the incumbent; the other tasks regenerate
/// from scratch each level, keeping the best seen so far.
fn build_tot_levels(b: &mut PlanBuilder, use_case: UseCase, k: usize, levels: usize) -> OpId {
    let scorer = scorer_id(use_case);
    let gen = b.op(
        OpKind::Generate { k, prompt_id: direct_prompt(use_case, true).to_string() },
        vec![],
    );
    let score = b.op(
        OpKind::Score { samples: 0, scorer_id: scorer.to_string() },
        vec![gen],
    );
    let mut keep = b.op(
        OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
        vec![score],
    );
    for _ in 1..levels {
        let next = match use_case {
            UseCase::Sorting => b.op(
                OpKind::Improve { k, prompt_id: "improve_prompt".to_string() },
                vec![keep],
            ),
            _ => b.op(
                OpKind::Generate { k, prompt_id: direct_prompt(use_case, true).to_string() },
                vec![],
            ),
        };
        let score = b.op(
            OpKind::Score { samples: 0, scorer_id: scorer.to_string() },
            vec![next],
        );
        // The previous incumbent joins the pool so the best seen so far
        // always survives (and the plan keeps a single sink).
        keep = b.op(
            OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
            vec![score, keep],
        );
    }
    keep
}

fn build_sorting(scheme: Scheme, size: usize) -> GraphOfOperations {
    if scheme != Scheme::Got {
        return build_baseline(scheme, UseCase::Sorting);
    }
    let parts = match size {
        64 => 4,
        128 => 8,
        _ => 2,
    };
    let split_prompt = match size {
        64 => "split_prompt_64",
        128 => "split_prompt_128",
        _ => "split_prompt_32",
    };
    let mut b = PlanBuilder::new();
    let split = b.op(
        OpKind::Generate { k: 1, prompt_id: split_prompt.to_string() },
        vec![],
    );
    // Sort each part independently, keeping the best of five attempts.
    let mut level: Vec<OpId> = (0..parts)
        .map(|i| {
            b.scored_branch(
                OpKind::Generate { k: 5, prompt_id: "sort_prompt".to_string() },
                vec![split],
                Select::Index(i),
                "sorting_error",
            )
        })
        .collect();
    // Pairwise merge tree; every merge is aggregate-then-refine except the
    // final one, which gets a wider refinement budget.
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks(2) {
            let is_final = level.len() == 2;
            let merged = b.scored_branch(
                OpKind::Aggregate { n: 10, prompt_id: "merge_prompt".to_string() },
                pair.to_vec(),
                Select::All,
                "sorting_error",
            );
            // Intermediate merges refine with a narrow budget; the final
            // merge (which also covers the smallest size, whose only merge
            // is final) gets the full budget.
            let improve_k = if is_final { 10 } else { 5 };
            let improved = b.scored_branch(
                OpKind::Improve { k: improve_k, prompt_id: "improve_prompt".to_string() },
                vec![merged],
                Select::All,
                "sorting_error",
            );
            next.push(improved);
        }
        level = next;
    }
    b.op(
        OpKind::GroundTruth { comparator_id: "sorting".to_string() },
        vec![level[0]],
    );
    b.finish()
}

fn build_intersection(scheme: Scheme, size: usize) -> GraphOfOperations {
    if scheme != Scheme::Got {
        return build_baseline(scheme, UseCase::SetIntersection);
    }
    let (parts, split_prompt, merge_n) = match size {
        64 => (4, "set_split_prompt_64", 10),
        128 => (8, "set_split_prompt_128", 5),
        _ => (2, "set_split_prompt_32", 10),
    };
    let mut b = PlanBuilder::new();
    let split = b.op(
        OpKind::Generate { k: 1, prompt_id: split_prompt.to_string() },
        vec![],
    );
    let mut level: Vec<OpId> = (0..parts)
        .map(|i| {
            b.scored_branch(
                OpKind::Generate { k: 5, prompt_id: "intersect_prompt".to_string() },
                vec![split],
                Select::Index(i),
                "intersection_error",
            )
        })
        .collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks(2) {
            next.push(b.scored_branch(
                OpKind::Aggregate { n: merge_n, prompt_id: "set_merge_prompt".to_string() },
                pair.to_vec(),
                Select::All,
                "intersection_error",
            ));
        }
        level = next;
    }
    b.op(
        OpKind::GroundTruth { comparator_id: "set_intersection".to_string() },
        vec![level[0]],
    );
    b.finish()
}

fn build_keyword(scheme: Scheme) -> GraphOfOperations {
    if scheme != Scheme::Got {
        return build_baseline(scheme, UseCase::KeywordCounting);
    }
    let mut b = PlanBuilder::new();
    let split = b.op(
        OpKind::Generate { k: 1, prompt_id: "keyword_split_prompt".to_string() },
        vec![],
    );
    let counted: Vec<OpId> = (0..4)
        .map(|i| {
            b.scored_branch(
                OpKind::Generate { k: 10, prompt_id: "count_prompt".to_string() },
                vec![split],
                Select::Index(i),
                "keyword_error",
            )
        })
        .collect();
    // Fold the four partial counts left to right; every merge candidate is
    // checked against the exact key-wise sum and regenerated when wrong.
    let mut acc = counted[0];
    for &next_part in &counted[1..] {
        let merged = b.op(
            OpKind::Aggregate { n: 1, prompt_id: "merge_count_prompt".to_string() },
            vec![acc, next_part],
        );
        acc = b.op(
            OpKind::ValidateAndImprove {
                max_attempts: 3,
                validator_id: "keyword_merge".to_string(),
                prompt_id: "improve_merge_prompt".to_string(),
            },
            vec![merged],
        );
    }
    let score = b.op(
        OpKind::Score { samples: 0, scorer_id: "keyword_error".to_string() },
        vec![acc],
    );
    let keep = b.op(
        OpKind::KeepBestN { n: 1, scope: KeepScope::Predecessors },
        vec![score],
    );
    b.op(
        OpKind::GroundTruth { comparator_id: "keyword_counting".to_string() },
        vec![keep],
    );
    b.finish()
}

fn build_doc_merge(scheme: Scheme) -> GraphOfOperations {
    let mut b = PlanBuilder::new();
    match scheme {
        Scheme::Io | Scheme::Cot => {
            let gen = b.op(
                OpKind::Generate { k: 1, prompt_id: "nda_merge_prompt".to_string() },
                vec![],
            );
            b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![gen],
            );
        }
        Scheme::CotSc { k } | Scheme::Tot { k, levels: 1 } => {
            let gen = b.op(
                OpKind::Generate { k, prompt_id: "nda_merge_prompt".to_string() },
                vec![],
            );
            let score = b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![gen],
            );
            b.op(OpKind::KeepBestN { n: 1, scope: KeepScope::Predecessors }, vec![score]);
        }
        Scheme::Tot { k, levels } => {
            let gen = b.op(
                OpKind::Generate { k, prompt_id: "nda_merge_prompt".to_string() },
                vec![],
            );
            let score = b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![gen],
            );
            let mut keep = b.op(
                OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
                vec![score],
            );
            for _ in 1..levels {
                let improve = b.op(
                    OpKind::Improve { k, prompt_id: "nda_improve_prompt".to_string() },
                    vec![keep],
                );
                let score = b.op(
                    OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                    vec![improve],
                );
                keep = b.op(
                    OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
                    vec![score],
                );
            }
        }
        Scheme::Got => {
            // Five drafts, keep three; five aggregation attempts over them,
            // keep the best seen so far; ten refinements, keep the best.
            let gen = b.op(
                OpKind::Generate { k: 5, prompt_id: "nda_merge_prompt".to_string() },
                vec![],
            );
            let score = b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![gen],
            );
            let keep3 = b.op(
                OpKind::KeepBestN { n: 3, scope: KeepScope::Predecessors },
                vec![score],
            );
            let agg = b.op(
                OpKind::Aggregate { n: 5, prompt_id: "nda_aggregate_prompt".to_string() },
                vec![keep3],
            );
            let score2 = b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![agg],
            );
            let keep1 = b.op(
                OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
                vec![score2],
            );
            let improve = b.op(
                OpKind::Improve { k: 10, prompt_id: "nda_improve_prompt".to_string() },
                vec![keep1],
            );
            let score3 = b.op(
                OpKind::Score { samples: 3, scorer_id: "merge_quality".to_string() },
                vec![improve],
            );
            b.op(
                OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
                vec![score3],
            );
        }
    }
    b.finish()
}

// ---------------------------------------------------------------------------
// Static call counting
// ---------------------------------------------------------------------------

/// Statically derived bounds on the number of backend completions a plan
/// will issue: (minimum, maximum). The two differ only through
/// validate-and-improve operations, whose attempts depend on runtime
/// validation outcomes.
pub fn expected_llm_calls(
    goo: &GraphOfOperations,
    adapter: &dyn UseCaseAdapter,
) -> Result<(u64, u64), crate::goo::GooError> {
    let order = goo.validate()?;
    let mut outputs: BTreeMap<OpId, u64> = BTreeMap::new();
    let mut retained: u64 = 0;
    let (mut min_calls, mut max_calls) = (0u64, 0u64);
    for op_id in order {
        let op = goo.op(op_id).expect("validated");
        let mut inputs: u64 = if op.predecessors.is_empty() {
            1
        } else {
            op.predecessors.iter().map(|p| outputs.get(p).copied().unwrap_or(0)).sum()
        };
        if let Select::Index(i) = op.select {
            inputs = u64::from((i as u64) < inputs);
        }
        let out = match &op.kind {
            OpKind::Generate { k, prompt_id } => {
                let calls = inputs * *k as u64;
                min_calls += calls;
                max_calls += calls;
                calls * adapter.split_arity(prompt_id) as u64
            }
            OpKind::Aggregate { n, .. } => {
                let calls = if inputs > 0 { *n as u64 } else { 0 };
                min_calls += calls;
                max_calls += calls;
                calls
            }
            OpKind::Improve { k, .. } => {
                let calls = inputs * *k as u64;
                min_calls += calls;
                max_calls += calls;
                calls
            }
            OpKind::Score { samples, scorer_id } => {
                if adapter.is_llm_scorer(scorer_id) {
                    let calls = inputs * *samples as u64;
                    min_calls += calls;
                    max_calls += calls;
                }
                inputs
            }
            OpKind::ValidateAndImprove { max_attempts, .. } => {
                max_calls += inputs * *max_attempts as u64;
                inputs
            }
            OpKind::KeepBestN { n, scope } => {
                let pool = match scope {
                    KeepScope::Predecessors => inputs,
                    KeepScope::CumulativeBest => inputs + retained,
                };
                let kept = pool.min(*n as u64);
                retained += kept;
                kept
            }
            OpKind::GroundTruth { .. } => inputs,
        };
        outputs.insert(op_id, out);
    }
    Ok((min_calls, max_calls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calls(scheme: Scheme, use_case: UseCase, size: usize) -> (u64, u64) {
        let goo = build_scheme(scheme, use_case, size);
        let instance = generate_instance(use_case, size, 1);
        let adapter = adapter_for(&instance);
        expected_llm_calls(&goo, adapter.as_ref()).unwrap()
    }

    #[test]
    fn instances_are_deterministic_per_seed() {
        let a = generate_instance(UseCase::Sorting, 32, 7);
        let b = generate_instance(UseCase::Sorting, 32, 7);
        let c = generate_instance(UseCase::Sorting, 32, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        if let InstanceData::Sorting { input } = &a.data {
            assert_eq!(input.len(), 32);
            assert!(input.iter().all(|v| (0..=9).contains(v)));
        } else {
            panic!("wrong instance kind");
        }
    }

    #[test]
    fn intersection_instances_have_distinct_elements() {
        let inst = generate_instance(UseCase::SetIntersection, 32, 3);
        if let InstanceData::Intersection { set_a, set_b } = &inst.data {
            let da: BTreeSet<_> = set_a.iter().collect();
            let db: BTreeSet<_> = set_b.iter().collect();
            assert_eq!(da.len(), 32);
            assert_eq!(db.len(), 32);
            assert!(set_a.iter().all(|v| (0..64).contains(v)));
        } else {
            panic!("wrong instance kind");
        }
    }

    #[test]
    fn keyword_instances_mention_known_countries() {
        let inst = generate_instance(UseCase::KeywordCounting, 32, 11);
        if let InstanceData::Keyword { text } = &inst.data {
            let counts = count_country_mentions(text);
            assert!(!counts.is_empty());
            assert!(text.split(". ").count() >= 8);
        } else {
            panic!("wrong instance kind");
        }
    }

    #[test]
    fn pinned_passage_truth_counts() {
        let inst = keyword_pinned_instance();
        let InstanceData::Keyword { text } = &inst.data else {
            panic!("wrong instance kind")
        };
        let truth = count_country_mentions(text);
        let expected: BTreeMap<String, i64> = [
            ("Peru", 1),
            ("Argentina", 4),
            ("Brazil", 2),
            ("Iran", 2),
            ("China", 2),
            ("Italy", 2),
            ("France", 2),
            ("United States", 2),
            ("Canada", 2),
            ("Australia", 2),
            ("New Zealand", 2),
            ("Ukraine", 2),
            ("Poland", 2),
            ("North Korea", 1),
            ("South Korea", 2),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(truth, expected);
    }

    #[test]
    fn graph_scheme_call_budgets_match_hand_counts() {
        assert_eq!(calls(Scheme::Got, UseCase::Sorting, 32), (31, 31));
        assert_eq!(calls(Scheme::Got, UseCase::Sorting, 64), (71, 71));
        assert_eq!(calls(Scheme::Got, UseCase::Sorting, 128), (151, 151));
        assert_eq!(calls(Scheme::Got, UseCase::SetIntersection, 32), (21, 21));
        assert_eq!(calls(Scheme::Got, UseCase::SetIntersection, 64), (51, 51));
        assert_eq!(calls(Scheme::Got, UseCase::SetIntersection, 128), (76, 76));
        assert_eq!(calls(Scheme::Got, UseCase::KeywordCounting, 32), (44, 53));
        assert_eq!(calls(Scheme::Got, UseCase::DocumentMerge, 0), (80, 80));
    }

    #[test]
    fn baseline_call_budgets() {
        assert_eq!(calls(Scheme::Io, UseCase::Sorting, 32), (1, 1));
        assert_eq!(calls(Scheme::Cot, UseCase::Sorting, 32), (1, 1));
        assert_eq!(calls(Scheme::CotSc { k: 10 }, UseCase::Sorting, 32), (10, 10));
        assert_eq!(calls(Scheme::Tot { k: 10, levels: 3 }, UseCase::Sorting, 32), (30, 30));
        assert_eq!(calls(Scheme::Tot { k: 20, levels: 3 }, UseCase::Sorting, 32), (60, 60));
    }

    #[test]
    fn all_plans_validate() {
        for &use_case in &[
            UseCase::Sorting,
            UseCase::SetIntersection,
            UseCase::KeywordCounting,
            UseCase::DocumentMerge,
        ] {
            for scheme in [
                Scheme::Io,
                Scheme::Cot,
                Scheme::CotSc { k: 10 },
                Scheme::Tot { k: 20, levels: 3 },
                Scheme::Tot { k: 10, levels: 6 },
                Scheme::Got,
            ] {
                for size in [32, 64, 128] {
                    let goo = build_scheme(scheme, use_case, size);
                    goo.validate().unwrap_or_else(|e| {
                        panic!("{scheme:?} {use_case:?} {size}: {e}");
                    });
                }
            }
        }
    }

    #[test]
    fn scheme_and_use_case_names_round_trip() {
        assert_eq!(Scheme::parse("tot2"), Some(Scheme::Tot { k: 10, levels: 6 }));
        assert_eq!(Scheme::parse("got"), Some(Scheme::Got));
        assert_eq!(Scheme::parse("nope"), None);
        assert_eq!(UseCase::parse("sorting"), Some(UseCase::Sorting));
        assert_eq!(UseCase::parse("doc_merge"), Some(UseCase::DocumentMerge));
    }
}
