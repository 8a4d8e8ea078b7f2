//! LLM backend contract, mock backends, HTTP client, and cost accounting.
//!
//! The engine assigns every dispatched prompt a monotonically increasing
//! `call_id`. Backends must be deterministic functions of the request text and
//! that id: the scripted backend replays recorded fixtures, and the task
//! oracle recomputes the exact answer (optionally corrupting it with a fault
//! drawn from an RNG seeded by `(seed, call_id)`), so identical runs produce
//! byte-identical transcripts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::content::{format_counts, format_list};
use crate::scoring::count_country_mentions;

/// A single prompt dispatched to a backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub prompt: String,
}

/// A completion plus its token accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("scripted backend has no response for call {call_id} (prompt digest {digest})")]
    ScriptMiss { call_id: u64, digest: String },
    #[error("oracle does not recognise the prompt for call {call_id}")]
    UnrecognisedPrompt { call_id: u64 },
    #[error("http request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
    #[error("api key environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("malformed completion payload: {0}")]
    BadPayload(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture error: {0}")]
    Fixture(#[from] serde_json::Error),
}

/// The backend contract. `call_id` is assigned by the engine and identifies
/// the call within one run; implementations must not keep hidden state that
/// makes responses depend on dispatch order beyond that id.
pub trait LlmBackend {
    fn query(&self, request: &CompletionRequest, call_id: u64)
        -> Result<CompletionResponse, BackendError>;
    fn name(&self) -> &str;
}

/// Flat token estimate: one token per four bytes, rounded up.
pub fn count_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

/// First 16 hex chars of the SHA-256 of the prompt text.
pub fn prompt_digest(prompt: &str) -> String {
    let hash = Sha256::digest(prompt.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Per-1000-token prices, kept as exact rationals so cost totals never
/// accumulate float error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub model: String,
    /// Price in micro-dollars per 1000 prompt tokens.
    pub prompt_micros_per_1k: i64,
    /// Price in micro-dollars per 1000 completion tokens.
    pub completion_micros_per_1k: i64,
}

impl Default for CostModel {
    fn default() -> Self {
        // gpt-3.5 era list prices: $1.50 / $2.00 per million tokens.
        CostModel {
            model: "gpt-3.5-turbo".to_string(),
            prompt_micros_per_1k: 1500,
            completion_micros_per_1k: 2000,
        }
    }
}

/// Accumulated call/token/cost totals for one run or batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Exact cost in micro-dollars.
    cost_micros: Ratio<i64>,
}

impl CostLedger {
    pub fn record(&mut self, response: &CompletionResponse, model: &CostModel) {
        self.calls += 1;
        self.prompt_tokens += response.prompt_tokens;
        self.completion_tokens += response.completion_tokens;
        self.cost_micros += Ratio::new(
            response.prompt_tokens as i64 * model.prompt_micros_per_1k
                + response.completion_tokens as i64 * model.completion_micros_per_1k,
            1000,
        );
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.calls += other.calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.cost_micros += other.cost_micros;
    }

    /// Exact cost in micro-dollars.
    pub fn cost_micros(&self) -> Ratio<i64> {
        self.cost_micros
    }

    /// Cost in dollars, converted to float only at the display boundary.
    pub fn cost_dollars(&self) -> f64 {
        (self.cost_micros / Ratio::from_integer(1_000_000))
            .to_f64()
            .unwrap_or(f64::NAN)
    }

    pub fn is_zero_cost(&self) -> bool {
        self.cost_micros.is_zero()
    }
}

impl fmt::Display for CostLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} calls, {} prompt + {} completion tokens, ${:.6}",
            self.calls,
            self.prompt_tokens,
            self.completion_tokens,
            self.cost_dollars()
        )
    }
}

/// On-disk fixture replayed by [`ScriptedBackend`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptFixture {
    /// Responses keyed by prompt digest; each digest holds a FIFO queue so
    /// repeated identical prompts can receive distinct completions.
    #[serde(default)]
    pub by_digest: BTreeMap<String, Vec<String>>,
    /// Fallback responses consumed in call order when no digest entry matches.
    #[serde(default)]
    pub sequence: Vec<String>,
}

/// Replays canned responses from a fixture, preferring digest-keyed entries.
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

struct ScriptState {
    by_digest: BTreeMap<String, std::collections::VecDeque<String>>,
    sequence: std::collections::VecDeque<String>,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptFixture) -> Self {
        ScriptedBackend {
            state: Mutex::new(ScriptState {
                by_digest: fixture
                    .by_digest
                    .into_iter()
                    .map(|(k, v)| (k, v.into()))
                    .collect(),
                sequence: fixture.sequence.into(),
            }),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path)?;
        Ok(Self::new(serde_json::from_str(&raw)?))
    }
}

impl LlmBackend for ScriptedBackend {
    fn query(
        &self,
        request: &CompletionRequest,
        call_id: u64,
    ) -> Result<CompletionResponse, BackendError> {
        let digest = prompt_digest(&request.prompt);
        let mut state = self.state.lock().expect("script state poisoned");
        let text = state
            .by_digest
            .get_mut(&digest)
            .and_then(|q| q.pop_front())
            .or_else(|| state.sequence.pop_front())
            .ok_or(BackendError::ScriptMiss { call_id, digest })?;
        Ok(CompletionResponse {
            prompt_tokens: count_tokens(&request.prompt),
            completion_tokens: count_tokens(&text),
            text,
        })
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Task oracle: recognises the built-in prompt shapes, computes the exact
/// answer, and optionally corrupts it with seeded single-fault injection.
///
/// With `fault_rate == 0` every answer is perfect. Otherwise each response
/// independently draws Bernoulli(`fault_rate`) from an RNG seeded by
/// `(seed, call_id)`; a firing draw applies exactly one mutation — an element
/// drop, a duplication, an adjacent swap, or (for count maps) an off-by-one.
/// Split responses and the free-text document prompts are never corrupted:
/// they set up structure rather than carry an answer that the scorers grade.
pub struct OracleBackend {
    seed: u64,
    fault_rate: f64,
}

impl OracleBackend {
    pub fn new(seed: u64, fault_rate: f64) -> Self {
        assert!((0.0..=1.0).contains(&fault_rate), "fault rate must be a probability");
        OracleBackend { seed, fault_rate }
    }

    pub fn perfect() -> Self {
        Self::new(0, 0.0)
    }

    fn rng_for(&self, call_id: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(call_id),
        )
    }

    fn maybe_corrupt_list(&self, mut list: Vec<i64>, call_id: u64) -> Vec<i64> {
        let mut rng = self.rng_for(call_id);
        if self.fault_rate == 0.0 || !rng.random_bool(self.fault_rate) || list.is_empty() {
            return list;
        }
        match rng.random_range(0..3u8) {
            0 => {
                // Drop one element.
                let i = rng.random_range(0..list.len());
                list.remove(i);
            }
            1 => {
                // Duplicate one element in place.
                let i = rng.random_range(0..list.len());
                let v = list[i];
                list.insert(i, v);
            }
            _ => {
                // Swap an adjacent pair (an inversion when values differ).
                if list.len() >= 2 {
                    let i = rng.random_range(0..list.len() - 1);
                    list.swap(i, i + 1);
                }
            }
        }
        list
    }

    fn maybe_corrupt_counts(
        &self,
        mut counts: BTreeMap<String, i64>,
        call_id: u64,
    ) -> BTreeMap<String, i64> {
        let mut rng = self.rng_for(call_id);
        if self.fault_rate == 0.0 || !rng.random_bool(self.fault_rate) || counts.is_empty() {
            return counts;
        }
        let keys: Vec<String> = counts.keys().cloned().collect();
        let key = keys.choose(&mut rng).expect("non-empty").clone();
        if rng.random_bool(0.5) {
            // Off-by-one on one frequency, never below zero.
            let delta = if rng.random_bool(0.5) { 1 } else { -1 };
            let v = counts.get_mut(&key).expect("chosen key present");
            *v = (*v + delta).max(0);
        } else {
            // Lose one key entirely.
            counts.remove(&key);
        }
        counts
    }
}

/// The slice of `text` following the LAST occurrence of `marker`, so few-shot
/// examples containing the same marker are skipped.
fn after_last<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.rfind(marker).map(|i| &text[i + marker.len()..])
}

fn first_list(text: &str) -> Option<Vec<i64>> {
    crate::prompting::parse_digit_list_first(text)
}

fn first_map(text: &str) -> Option<BTreeMap<String, i64>> {
    crate::prompting::parse_count_map(text).ok()
}

impl LlmBackend for OracleBackend {
    fn query(
        &self,
        request: &CompletionRequest,
        call_id: u64,
    ) -> Result<CompletionResponse, BackendError> {
        let p = request.prompt.as_str();
        let unrecognised = || BackendError::UnrecognisedPrompt { call_id };

        let text = if p.contains("Sort the following list of numbers in ascending order") {
            let input = after_last(p, "Input:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let mut sorted = input;
            sorted.sort_unstable();
            format!("Output: {}", format_list(&self.maybe_corrupt_list(sorted, call_id)))
        } else if p.contains("The following two lists represent an unsorted list") {
            // The improvement prompt: answer with the true sorted input list.
            let input = after_last(p, "Input:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let mut sorted = input;
            sorted.sort_unstable();
            format!("Output: {}", format_list(&self.maybe_corrupt_list(sorted, call_id)))
        } else if p.contains("Merge the following 2 sorted lists") {
            let tail = after_last(p, "Merge the following two lists into one sorted list:")
                .ok_or_else(unrecognised)?;
            let lists = crate::prompting::parse_named_lists(tail, 2)
                .map_err(|_| unrecognised())?;
            let mut merged: Vec<i64> = lists.concat();
            merged.sort_unstable();
            format!("Merged list: {}", format_list(&self.maybe_corrupt_list(merged, call_id)))
        } else if p.contains("Split the following list of") {
            // Structural split (sorting and set tasks): never corrupted.
            let k = if p.contains("into 2 lists") {
                2
            } else if p.contains("into 4 lists") {
                4
            } else {
                8
            };
            let input = after_last(p, "Input:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let part = input.len() / k;
            let lines: Vec<String> = (0..k)
                .map(|i| {
                    format!(
                        "    \"List {}\": {}",
                        i + 1,
                        format_list(&input[i * part..(i + 1) * part])
                    )
                })
                .collect();
            format!("{{\n{}\n}}", lines.join(",\n"))
        } else if p.contains("Find the intersection of two sets") {
            let set1 = after_last(p, "Input Set 1:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let set2 = after_last(p, "Input Set 2:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let s1: std::collections::BTreeSet<i64> = set1.into_iter().collect();
            let mut seen = std::collections::BTreeSet::new();
            let common: Vec<i64> = set2
                .into_iter()
                .filter(|v| s1.contains(v) && seen.insert(*v))
                .collect();
            format!("Output: {}", format_list(&self.maybe_corrupt_list(common, call_id)))
        } else if p.contains("by appending the second list to the first") {
            let l1 = after_last(p, "List 1:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let l2 = after_last(p, "List 2:")
                .and_then(first_list)
                .ok_or_else(unrecognised)?;
            let mut appended = l1;
            appended.extend(l2);
            format!("Output: {}", format_list(&self.maybe_corrupt_list(appended, call_id)))
        } else if p.contains("Count the frequency of how many times each country") {
            let text = after_last(p, "Input:").ok_or_else(unrecognised)?;
            let counts = count_country_mentions(text);
            format!(
                "Output: {}",
                format_counts(&self.maybe_corrupt_counts(counts, call_id))
            )
        } else if p.contains("Split the following input text into 4 paragraphs") {
            // Structural split: never corrupted.
            let text = after_last(p, "Input:").ok_or_else(unrecognised)?.trim();
            let parts = split_text_into_chunks(text, 4);
            let lines: Vec<String> = parts
                .iter()
                .enumerate()
                .map(|(i, part)| format!("    \"Paragraph {}\": \"{}\"", i + 1, part))
                .collect();
            format!("{{\n{}\n}}", lines.join(",\n"))
        } else if p.contains("Combine the following 2 dictionaries") {
            let tail = after_last(p, "Combine the following 2 dictionaries into a single dictionary:")
                .ok_or_else(unrecognised)?;
            let maps = two_maps(tail).ok_or_else(unrecognised)?;
            let sum = crate::scoring::sum_counts([&maps.0, &maps.1]);
            format!(
                "Combined Output: {}",
                format_counts(&self.maybe_corrupt_counts(sum, call_id))
            )
        } else if p.contains("were combined into the third dictionary") {
            let d1 = after_last(p, "Dictionary 1:")
                .and_then(first_map)
                .ok_or_else(unrecognised)?;
            let d2 = after_last(p, "Dictionary 2:")
                .and_then(first_map)
                .ok_or_else(unrecognised)?;
            let sum = crate::scoring::sum_counts([&d1, &d2]);
            format!(
                "Output: {}",
                format_counts(&self.maybe_corrupt_counts(sum, call_id))
            )
        } else if p.contains("Merge the following 4 NDA documents")
            || p.contains("Combine the merged NDAs")
            || p.contains("Please improve the merged NDA")
        {
            // Free-text merge family: deterministic canonical merge, no faults.
            format!("<Merged>\n{}\n</Merged>", canonical_nda_merge(p))
        } else if p.contains("Please score the merged NDA") {
            // The canonical merge retains everything without repetition.
            "<Redundancy>10</Redundancy>\n<Retained>10</Retained>".to_string()
        } else {
            return Err(unrecognised());
        };

        Ok(CompletionResponse {
            prompt_tokens: count_tokens(p),
            completion_tokens: count_tokens(&text),
            text,
        })
    }

    fn name(&self) -> &str {
        "oracle"
    }
}

/// Deterministic reference merge of the `<DocN>` blocks embedded in a prompt:
/// all distinct non-empty lines in first-seen order.
fn canonical_nda_merge(prompt: &str) -> String {
    let mut seen = std::collections::BTreeSet::new();
    let mut lines = Vec::new();
    for n in 1..=4 {
        // The instruction line also mentions `<DocN>`, so the document body
        // is the LAST opening tag, not the first.
        let open = format!("<Doc{n}>");
        let close = format!("</Doc{n}>");
        let doc = prompt.rfind(&open).and_then(|start| {
            let rest = &prompt[start + open.len()..];
            rest.find(&close).map(|end| rest[..end].trim().to_string())
        });
        if let Some(doc) = doc {
            for line in doc.lines() {
                let line = line.trim();
                if !line.is_empty() && seen.insert(line.to_string()) {
                    lines.push(line.to_string());
                }
            }
        }
    }
    lines.join("\n")
}

/// Split running text into `k` sentence-aligned chunks of similar length.
pub fn split_text_into_chunks(text: &str, k: usize) -> Vec<String> {
    let mut sentences: Vec<&str> = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        if bytes[i] == b'.' && (i + 1 == bytes.len() || bytes[i + 1] == b' ') {
            sentences.push(text[start..=i].trim());
            start = (i + 2).min(bytes.len());
        }
    }
    if start < text.len() {
        let rest = text[start..].trim();
        if !rest.is_empty() {
            sentences.push(rest);
        }
    }
    let total: usize = sentences.iter().map(|s| s.len()).sum();
    let mut chunks: Vec<String> = Vec::with_capacity(k);
    let mut current = String::new();
    let mut consumed = 0usize;
    for (idx, s) in sentences.iter().enumerate() {
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(s);
        consumed += s.len();
        let remaining_sentences = sentences.len() - idx - 1;
        let remaining_chunks = k - chunks.len();
        // Close the chunk once the cumulative length crosses this chunk's
        // fair share, or when the remaining chunks need every sentence left;
        // never close so early that a later chunk would end up empty.
        let share_reached = consumed * k >= total * (chunks.len() + 1);
        let must_close = remaining_sentences == remaining_chunks - 1;
        if remaining_chunks > 1
            && remaining_sentences >= remaining_chunks - 1
            && (share_reached || must_close)
        {
            chunks.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() || chunks.len() < k {
        chunks.push(current);
    }
    while chunks.len() < k {
        chunks.push(String::new());
    }
    chunks
}

fn two_maps(text: &str) -> Option<(BTreeMap<String, i64>, BTreeMap<String, i64>)> {
    let first_close = text.find('}')?;
    let d1 = crate::prompting::parse_count_map(&text[..=first_close]).ok()?;
    let d2 = crate::prompting::parse_count_map(&text[first_close + 1..]).ok()?;
    Some((d1, d2))
}

/// Configuration for the chat-completion HTTP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-3.5-turbo".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            temperature: 1.0,
            max_tokens: 1024,
            max_attempts: 3,
            backoff_ms: 1000,
        }
    }
}

/// Chat-completion client with exponential backoff on failure.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| BackendError::MissingApiKey(config.api_key_env.clone()))?;
        Ok(HttpBackend { config, api_key })
    }
}

impl LlmBackend for HttpBackend {
    fn query(
        &self,
        request: &CompletionRequest,
        _call_id: u64,
    ) -> Result<CompletionResponse, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut last_error = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(
                    self.config.backoff_ms << (attempt - 1),
                ));
            }
            let result = ureq::post(&self.config.url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body);
            match result {
                Ok(mut response) => {
                    let payload: serde_json::Value = response
                        .body_mut()
                        .read_json()
                        .map_err(|e| BackendError::BadPayload(e.to_string()))?;
                    let text = payload["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            BackendError::BadPayload("missing choices[0].message.content".into())
                        })?
                        .to_string();
                    let prompt_tokens = payload["usage"]["prompt_tokens"]
                        .as_u64()
                        .unwrap_or_else(|| count_tokens(&request.prompt));
                    let completion_tokens = payload["usage"]["completion_tokens"]
                        .as_u64()
                        .unwrap_or_else(|| count_tokens(&text));
                    return Ok(CompletionResponse { text, prompt_tokens, completion_tokens });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Http {
            attempts: self.config.max_attempts,
            message: last_error,
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}
