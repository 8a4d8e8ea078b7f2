//! Graph-of-thoughts prompting harness.
//!
//! The crate is organised around the lifecycle of one reasoning run:
//!
//! * [`thought_graph`] — the dynamic graph reasoning state (GRS): thoughts,
//!   edges, and graph deltas.
//! * [`goo`] — the static graph of operations (GoO) that prescribes an
//!   execution plan, plus validation and a declarative config format.
//! * [`engine`] — the controller that walks a GoO topologically, dispatching
//!   prompts to an LLM backend and committing results to the GRS.
//! * [`llm`] — the backend contract (scripted mock, task oracle with seeded
//!   fault injection, HTTP chat-completion client) and cost accounting.
//! * [`prompting`] — prompt templates with few-shot blocks, and the response
//!   parsers that turn raw completions into thought contents.
//! * [`scoring`] — the task score functions (error scopes, keyword distance,
//!   harmonic-mean merge quality) and validators.
//! * [`schemes`] — problem-instance generation and builders that translate
//!   (scheme, use case, size) into a concrete GoO.
//! * [`metrics`] — latency/volume topology analysis for the prompting shapes.
//! * [`runner`] — seeded batch execution, run records, summaries.

pub mod content;
pub mod engine;
pub mod goo;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod runner;
pub mod schemes;
pub mod scoring;
pub mod thought_graph;
