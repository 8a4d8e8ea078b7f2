//! The execution controller.
//!
//! The engine walks a validated operation plan in topological order,
//! materialising thoughts in the reasoning state. Prompt construction,
//! response parsing, reference-target propagation, scoring, and validation
//! are all delegated to a [`UseCaseAdapter`], so the control flow here is
//! task-agnostic.
//!
//! Determinism: operations execute in a fixed order, call ids are assigned
//! sequentially at dispatch, and thought ordering is always by creation
//! index, so a run is a pure function of (plan, adapter, backend, config).
//! Parse failures never abort a run — the offending completion becomes an
//! invalid thought with the worst possible score and flows on.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::content::Content;
use crate::goo::{GooError, GraphOfOperations, OpId, OpKind, Select};
use crate::llm::{
    count_tokens, prompt_digest, BackendError, CompletionRequest, CostLedger, CostModel,
    LlmBackend,
};
use crate::prompting::{ParseError, PromptError, TemplateRegistry};
use crate::scoring::Polarity;
use crate::thought_graph::{EdgeKind, GraphDelta, GraphError, ReasoningState, Thought, ThoughtId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Goo(#[from] GooError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("cost budget of {limit_micros} micro-dollars exceeded after operation {op}")]
    BudgetExceeded { op: OpId, limit_micros: i64 },
    #[error("adapter failure: {0}")]
    Adapter(String),
}

/// Task-specific behaviour plugged into the engine.
///
/// An adapter owns one problem instance: it knows how to seed the root
/// thought, turn thoughts into prompts, parse completions back into thought
/// contents, propagate the locally-computed reference target that local
/// scorers compare against, score and validate thoughts, and measure the
/// final error of a surviving thought.
pub trait UseCaseAdapter {
    fn name(&self) -> &str;

    /// Whether lower scores are better (error counts) or higher (quality).
    fn polarity(&self) -> Polarity;

    /// Content and reference target of the root thought.
    fn root_thought(&self) -> (Content, Option<Content>);

    /// Render the prompt for one operation over `inputs`.
    fn build_prompt(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError>;

    /// Parse a completion into one or more thought contents (splitters
    /// produce several).
    fn parse_response(&self, prompt_id: &str, text: &str) -> Result<Vec<Content>, ParseError>;

    /// The reference target of the `output_index`-th thought produced by
    /// `prompt_id` over `inputs`.
    fn target_for(
        &self,
        prompt_id: &str,
        inputs: &[&Thought],
        output_index: usize,
        output: &Content,
    ) -> Option<Content>;

    /// Class label recorded on thoughts produced by `prompt_id`.
    fn thought_class(&self, prompt_id: &str) -> String;

    /// True when `scorer_id` needs LLM completions rather than local math.
    fn is_llm_scorer(&self, scorer_id: &str) -> bool;

    /// Local score of a thought (for non-LLM scorers).
    fn local_score(&self, scorer_id: &str, thought: &Thought) -> f64;

    /// Prompt used to draw one score sample for an LLM-assisted scorer.
    fn score_prompt(
        &self,
        scorer_id: &str,
        thought: &Thought,
        registry: &TemplateRegistry,
    ) -> Result<String, EngineError>;

    /// Parse one score sample; returns the per-aspect values of the sample.
    fn parse_score_sample(&self, scorer_id: &str, text: &str) -> Result<Vec<f64>, ParseError>;

    /// Combine the surviving score samples into one score.
    fn combine_score_samples(&self, scorer_id: &str, samples: &[Vec<f64>]) -> Option<f64>;

    /// Check a candidate against the inputs of the operation that created
    /// the refinement chain it belongs to.
    fn validate(&self, validator_id: &str, candidate: &Thought, origin_inputs: &[&Thought])
        -> bool;

    /// Final error of a surviving thought against the instance ground truth.
    fn final_error(&self, comparator_id: &str, thought: &Thought) -> f64;

    /// Number of thoughts one completion of `prompt_id` yields (splitter
    /// prompts produce several); used for static call accounting.
    fn split_arity(&self, prompt_id: &str) -> usize {
        let _ = prompt_id;
        1
    }

    /// Worst possible score, used for unparseable or unscored thoughts.
    fn worst_score(&self) -> f64 {
        match self.polarity() {
            Polarity::LowerBetter => f64::INFINITY,
            Polarity::HigherBetter => f64::NEG_INFINITY,
        }
    }
}

/// One backend call as recorded in the execution trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub call_id: u64,
    pub prompt_digest: String,
    pub response_digest: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Trace record for one executed operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpTrace {
    pub op_id: OpId,
    pub kind: &'static str,
    pub inputs: Vec<u64>,
    pub outputs: Vec<u64>,
    pub calls: Vec<CallRecord>,
    /// (thought id, score) pairs attached by scoring operations.
    pub scores: Vec<(u64, f64)>,
    /// Ground-truth errors measured by comparison operations.
    pub errors: Vec<f64>,
}

/// Line-delimited, versioned record of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    pub ops: Vec<OpTrace>,
}

impl ExecutionTrace {
    /// Serialize as line-delimited JSON with a version header. Wall-clock
    /// time is deliberately absent so identical runs serialize identically.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::from("{\"version\":\"trace-v1\"}\n");
        for op in &self.ops {
            out.push_str(&serde_json::to_string(op).expect("trace serialization"));
            out.push('\n');
        }
        out
    }

    pub fn llm_calls(&self) -> u64 {
        self.ops.iter().map(|o| o.calls.len() as u64).sum()
    }
}

/// Engine tuning knobs. `concurrency` bounds the number of in-flight backend
/// calls the engine will hand out before waiting for results; call ids are
/// assigned before dispatch so the trace is identical for any window size.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub concurrency: usize,
    pub cost_model: CostModel,
    /// Abort when the accumulated cost exceeds this many micro-dollars.
    pub max_cost_micros: Option<i64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            concurrency: 8,
            cost_model: CostModel::default(),
            max_cost_micros: None,
        }
    }
}

/// Everything produced by one run.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: ReasoningState,
    pub trace: ExecutionTrace,
    pub ledger: CostLedger,
    /// Error of the best surviving thought (lower is better for every task).
    pub final_error: Option<f64>,
    pub final_thought: Option<ThoughtId>,
}

pub struct Engine<'a> {
    adapter: &'a dyn UseCaseAdapter,
    backend: &'a dyn LlmBackend,
    registry: &'a TemplateRegistry,
    config: EngineConfig,
    next_call_id: u64,
    ledger: CostLedger,
    trace: ExecutionTrace,
}

impl<'a> Engine<'a> {
    pub fn new(
        adapter: &'a dyn UseCaseAdapter,
        backend: &'a dyn LlmBackend,
        registry: &'a TemplateRegistry,
        config: EngineConfig,
    ) -> Self {
        Engine {
            adapter,
            backend,
            registry,
            config,
            next_call_id: 0,
            ledger: CostLedger::default(),
            trace: ExecutionTrace::default(),
        }
    }

    /// Execute `goo` to completion.
    pub fn run(mut self, goo: &GraphOfOperations) -> Result<RunOutcome, EngineError> {
        let order = goo.validate()?;
        let mut state = ReasoningState::new();

        // Seed the root thought.
        let (content, target) = self.adapter.root_thought();
        let root = state.allocate_id();
        state.apply_delta(&GraphDelta {
            v_plus: vec![Thought {
                id: root,
                content,
                class: "root".to_string(),
                score: None,
                valid: None,
                origin_op: None,
                creation_index: root.0,
                target,
            }],
            ..Default::default()
        })?;

        let mut outputs_by_op: BTreeMap<OpId, Vec<ThoughtId>> = BTreeMap::new();
        let mut retained_pool: Vec<ThoughtId> = Vec::new();
        let mut final_error: Option<f64> = None;
        let mut final_thought: Option<ThoughtId> = None;
        let mut last_op_outputs: Vec<ThoughtId> = Vec::new();

        for op_id in order {
            let op = goo.op(op_id).expect("validated op");
            let mut inputs: Vec<ThoughtId> = if op.predecessors.is_empty() {
                vec![root]
            } else {
                op.predecessors
                    .iter()
                    .flat_map(|p| outputs_by_op.get(p).cloned().unwrap_or_default())
                    .collect()
            };
            if let Select::Index(i) = op.select {
                inputs = inputs.get(i).copied().into_iter().collect();
            }

            let mut record = OpTrace {
                op_id,
                kind: op.kind.label(),
                inputs: inputs.iter().map(|t| t.0).collect(),
                outputs: Vec::new(),
                calls: Vec::new(),
                scores: Vec::new(),
                errors: Vec::new(),
            };

            let outputs: Vec<ThoughtId> = match &op.kind {
                OpKind::Generate { k, prompt_id } => {
                    let mut out = Vec::new();
                    for &input in &inputs {
                        for _ in 0..*k {
                            let ids = self.generate_from(
                                &mut state,
                                prompt_id,
                                &[input],
                                op_id,
                                EdgeKind::Generate,
                                &mut record,
                            )?;
                            out.extend(ids);
                        }
                    }
                    out
                }
                OpKind::Aggregate { n, prompt_id } => {
                    let mut out = Vec::new();
                    if !inputs.is_empty() {
                        for _ in 0..*n {
                            let ids = self.generate_from(
                                &mut state,
                                prompt_id,
                                &inputs,
                                op_id,
                                EdgeKind::Aggregate,
                                &mut record,
                            )?;
                            out.extend(ids);
                        }
                    }
                    out
                }
                OpKind::Improve { k, prompt_id } => {
                    let mut out = Vec::new();
                    for &input in &inputs {
                        for _ in 0..*k {
                            let ids = self.generate_from(
                                &mut state,
                                prompt_id,
                                &[input],
                                op_id,
                                EdgeKind::Refine,
                                &mut record,
                            )?;
                            out.extend(ids);
                        }
                    }
                    out
                }
                OpKind::Score { samples, scorer_id } => {
                    for &input in &inputs {
                        let score = self.score_thought(
                            &state,
                            scorer_id,
                            *samples,
                            input,
                            &mut record,
                        )?;
                        let thought = state.thought_mut(input)?;
                        thought.score = Some(score);
                        record.scores.push((input.0, score));
                    }
                    inputs.clone()
                }
                OpKind::KeepBestN { n, scope } => {
                    let mut pool: Vec<ThoughtId> = inputs.clone();
                    if matches!(scope, crate::goo::KeepScope::CumulativeBest) {
                        for &t in &retained_pool {
                            if !pool.contains(&t) {
                                pool.push(t);
                            }
                        }
                    }
                    let worst = self.adapter.worst_score();
                    let mut ranked: Vec<(f64, u64, ThoughtId)> = pool
                        .iter()
                        .map(|&t| {
                            let th = state.thought(t).expect("pooled thought");
                            (th.score.unwrap_or(worst), th.creation_index, t)
                        })
                        .collect();
                    match self.adapter.polarity() {
                        Polarity::LowerBetter => ranked.sort_by(|a, b| {
                            a.0.partial_cmp(&b.0)
                                .unwrap_or(std::cmp::Ordering::Equal)
                                .then(a.1.cmp(&b.1))
                        }),
                        Polarity::HigherBetter => ranked.sort_by(|a, b| {
                            b.0.partial_cmp(&a.0)
                                .unwrap_or(std::cmp::Ordering::Equal)
                                .then(a.1.cmp(&b.1))
                        }),
                    }
                    let mut kept: Vec<ThoughtId> =
                        ranked.into_iter().take(*n).map(|(_, _, t)| t).collect();
                    kept.sort_by_key(|t| state.thought(*t).expect("kept").creation_index);
                    for &t in &kept {
                        if !retained_pool.contains(&t) {
                            retained_pool.push(t);
                        }
                    }
                    kept
                }
                OpKind::ValidateAndImprove { max_attempts, validator_id, prompt_id } => {
                    let mut out = Vec::new();
                    for &input in &inputs {
                        let id = self.validate_and_improve(
                            &mut state,
                            input,
                            *max_attempts,
                            validator_id,
                            prompt_id,
                            op_id,
                            &mut record,
                        )?;
                        out.push(id);
                    }
                    out
                }
                OpKind::GroundTruth { comparator_id } => {
                    for &input in &inputs {
                        let thought = state.thought(input)?;
                        let err = self.adapter.final_error(comparator_id, thought);
                        record.errors.push(err);
                        if final_error.is_none_or(|best| err < best) {
                            final_error = Some(err);
                            final_thought = Some(input);
                        }
                    }
                    inputs.clone()
                }
            };

            record.outputs = outputs.iter().map(|t| t.0).collect();
            self.trace.ops.push(record);
            last_op_outputs = outputs.clone();
            outputs_by_op.insert(op_id, outputs);

            if let Some(limit) = self.config.max_cost_micros {
                if self.ledger.cost_micros() > num_rational::Ratio::from_integer(limit) {
                    return Err(EngineError::BudgetExceeded { op: op_id, limit_micros: limit });
                }
            }
        }

        // Plans without a ground-truth comparison (open-ended quality tasks)
        // report the error of the best final survivor instead.
        if final_error.is_none() {
            let worst = self.adapter.worst_score();
            let best = last_op_outputs
                .iter()
                .filter_map(|&t| state.thought(t).ok())
                .min_by(|a, b| {
                    let (sa, sb) = (a.score.unwrap_or(worst), b.score.unwrap_or(worst));
                    match self.adapter.polarity() {
                        Polarity::LowerBetter => sa
                            .partial_cmp(&sb)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.creation_index.cmp(&b.creation_index)),
                        Polarity::HigherBetter => sb
                            .partial_cmp(&sa)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.creation_index.cmp(&b.creation_index)),
                    }
                });
            if let Some(best) = best {
                final_error = Some(self.adapter.final_error("final", best));
                final_thought = Some(best.id);
            }
        }

        Ok(RunOutcome {
            state,
            trace: self.trace,
            ledger: self.ledger,
            final_error,
            final_thought,
        })
    }

    fn dispatch(
        &mut self,
        prompt: String,
        record: &mut OpTrace,
    ) -> Result<String, EngineError> {
        let call_id = self.next_call_id;
        self.next_call_id += 1;
        let request = CompletionRequest { prompt };
        let response = self.backend.query(&request, call_id)?;
        self.ledger.record(&response, &self.config.cost_model);
        record.calls.push(CallRecord {
            call_id,
            prompt_digest: prompt_digest(&request.prompt),
            response_digest: prompt_digest(&response.text),
            prompt_tokens: count_tokens(&request.prompt),
            completion_tokens: response.completion_tokens,
        });
        Ok(response.text)
    }

    /// One backend call over `inputs`, parsed into new thoughts attached by
    /// `edge_kind` edges from every input.
    fn generate_from(
        &mut self,
        state: &mut ReasoningState,
        prompt_id: &str,
        inputs: &[ThoughtId],
        op_id: OpId,
        edge_kind: EdgeKind,
        record: &mut OpTrace,
    ) -> Result<Vec<ThoughtId>, EngineError> {
        let input_refs: Vec<&Thought> = inputs
            .iter()
            .map(|&t| state.thought(t))
            .collect::<Result<_, _>>()?;
        let prompt = self.adapter.build_prompt(prompt_id, &input_refs, self.registry)?;
        let response = self.dispatch(prompt, record)?;
        let class = self.adapter.thought_class(prompt_id);
        let (contents, valid) = match self.adapter.parse_response(prompt_id, &response) {
            Ok(contents) => (contents, None),
            Err(_) => (vec![Content::Text(response)], Some(false)),
        };
        let targets: Vec<Option<Content>> = contents
            .iter()
            .enumerate()
            .map(|(idx, content)| {
                if valid == Some(false) {
                    // Unparseable thoughts keep the first input's target so
                    // later refinement attempts still know the reference.
                    input_refs.first().and_then(|t| t.target.clone())
                } else {
                    self.adapter.target_for(prompt_id, &input_refs, idx, content)
                }
            })
            .collect();
        drop(input_refs);
        let mut out = Vec::new();
        for (content, target) in contents.into_iter().zip(targets) {
            let id = state.allocate_id();
            let score = valid.map(|_| self.adapter.worst_score());
            state.apply_delta(&GraphDelta {
                v_plus: vec![Thought {
                    id,
                    content,
                    class: class.clone(),
                    score,
                    valid,
                    origin_op: Some(op_id),
                    creation_index: id.0,
                    target,
                }],
                e_plus: inputs.iter().map(|&p| (p, id, edge_kind)).collect(),
                ..Default::default()
            })?;
            out.push(id);
        }
        Ok(out)
    }

    fn score_thought(
        &mut self,
        state: &ReasoningState,
        scorer_id: &str,
        samples: usize,
        input: ThoughtId,
        record: &mut OpTrace,
    ) -> Result<f64, EngineError> {
        let thought = state.thought(input)?;
        if thought.valid == Some(false) {
            return Ok(self.adapter.worst_score());
        }
        if !self.adapter.is_llm_scorer(scorer_id) {
            return Ok(self.adapter.local_score(scorer_id, thought));
        }
        let mut parsed = Vec::new();
        for _ in 0..samples {
            let prompt = self.adapter.score_prompt(scorer_id, thought, self.registry)?;
            let response = self.dispatch(prompt, record)?;
            if let Ok(sample) = self.adapter.parse_score_sample(scorer_id, &response) {
                parsed.push(sample);
            }
        }
        Ok(self
            .adapter
            .combine_score_samples(scorer_id, &parsed)
            .unwrap_or_else(|| self.adapter.worst_score()))
    }

    #[allow(clippy::too_many_arguments)]
    fn validate_and_improve(
        &mut self,
        state: &mut ReasoningState,
        input: ThoughtId,
        max_attempts: usize,
        validator_id: &str,
        prompt_id: &str,
        op_id: OpId,
        record: &mut OpTrace,
    ) -> Result<ThoughtId, EngineError> {
        let mut current = input;
        for attempt in 0..=max_attempts {
            let origin = refine_origin(state, current)?;
            let mut origin_parents = state.parents(origin, Some(EdgeKind::Generate));
            origin_parents.extend(state.parents(origin, Some(EdgeKind::Aggregate)));
            origin_parents
                .sort_by_key(|&t| state.thought(t).map(|x| x.creation_index).unwrap_or(u64::MAX));

            let parent_refs: Vec<&Thought> = origin_parents
                .iter()
                .map(|&t| state.thought(t))
                .collect::<Result<_, _>>()?;
            let candidate = state.thought(current)?;
            if self.adapter.validate(validator_id, candidate, &parent_refs) {
                state.thought_mut(current)?.valid = Some(true);
                return Ok(current);
            }
            if attempt == max_attempts {
                break;
            }
            // Regenerate: the improvement prompt sees the original operation
            // inputs followed by the failed candidate.
            let mut prompt_inputs = origin_parents.clone();
            prompt_inputs.push(current);
            let new_ids = self.generate_from(
                state,
                prompt_id,
                &prompt_inputs,
                op_id,
                EdgeKind::Refine,
                record,
            )?;
            // The refine edge must come from the failed candidate alone;
            // generate_from linked all prompt inputs, so rewire.
            if let Some(&new_id) = new_ids.first() {
                let mut e_minus = Vec::new();
                for &p in &origin_parents {
                    e_minus.push((p, new_id, EdgeKind::Refine));
                }
                state.apply_delta(&GraphDelta { e_minus, ..Default::default() })?;
                current = new_id;
            } else {
                break;
            }
        }
        state.thought_mut(current)?.valid = Some(false);
        Ok(current)
    }
}

/// Walk refine edges backwards to the first thought of a refinement chain.
fn refine_origin(state: &ReasoningState, mut id: ThoughtId) -> Result<ThoughtId, GraphError> {
    loop {
        let parents = state.parents(id, Some(EdgeKind::Refine));
        match parents.first() {
            Some(&p) => id = p,
            None => return Ok(id),
        }
    }
}
