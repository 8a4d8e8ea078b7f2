//! Seeded batch execution and run-record bookkeeping.
//!
//! A batch executes one (scheme, use case, size) triple across a seed range,
//! appending a JSON line per finished run so an interrupted batch loses at
//! most the run in flight. Records capture everything needed to compare
//! schemes — final error, call and token counts, exact cost — plus a digest
//! of the execution trace so reruns can be checked for byte-identity.
//! Wall-clock timings are tracked in memory only and never serialized, which
//! keeps records reproducible across machines.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, EngineError, RunOutcome};
use crate::llm::{prompt_digest, LlmBackend, OracleBackend, ScriptedBackend};
use crate::prompting::TemplateRegistry;
use crate::schemes::{adapter_for, build_scheme, generate_instance, Scheme, UseCase};

pub const RUNS_FORMAT_VERSION: &str = "runs-v1";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("record parse error: {0}")]
    Records(String),
    #[error("unknown backend spec `{0}`")]
    BadBackend(String),
}

/// Which backend a batch runs against.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    /// Task oracle answering every prompt perfectly.
    MockPerfect,
    /// Task oracle with the given per-response fault probability.
    MockFaulty(f64),
    /// Replay of a recorded fixture file.
    Scripted(PathBuf),
    /// Live chat-completion endpoint.
    Http(crate::llm::HttpConfig),
}

impl BackendSpec {
    /// Parse a CLI backend name: `mock-perfect`, `mock-faulty:<rate>`,
    /// `scripted:<path>`, or `http`.
    pub fn parse(name: &str) -> Result<Self, RunnerError> {
        if name == "mock-perfect" {
            return Ok(BackendSpec::MockPerfect);
        }
        if let Some(rate) = name.strip_prefix("mock-faulty:") {
            let rate: f64 = rate
                .parse()
                .map_err(|_| RunnerError::BadBackend(name.to_string()))?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(RunnerError::BadBackend(name.to_string()));
            }
            return Ok(BackendSpec::MockFaulty(rate));
        }
        if let Some(path) = name.strip_prefix("scripted:") {
            return Ok(BackendSpec::Scripted(PathBuf::from(path)));
        }
        if name == "http" {
            return Ok(BackendSpec::Http(crate::llm::HttpConfig::default()));
        }
        Err(RunnerError::BadBackend(name.to_string()))
    }

    pub fn label(&self) -> String {
        match self {
            BackendSpec::MockPerfect => "mock-perfect".to_string(),
            BackendSpec::MockFaulty(rate) => format!("mock-faulty:{rate}"),
            BackendSpec::Scripted(path) => format!("scripted:{}", path.display()),
            BackendSpec::Http(_) => "http".to_string(),
        }
    }

    /// Instantiate the backend for one seeded run.
    pub fn build(&self, seed: u64) -> Result<Box<dyn LlmBackend>, RunnerError> {
        Ok(match self {
            BackendSpec::MockPerfect => Box::new(OracleBackend::perfect()),
            BackendSpec::MockFaulty(rate) => Box::new(OracleBackend::new(seed, *rate)),
            BackendSpec::Scripted(path) => Box::new(
                ScriptedBackend::from_file(path).map_err(EngineError::Backend)?,
            ),
            BackendSpec::Http(config) => Box::new(
                crate::llm::HttpBackend::new(config.clone()).map_err(EngineError::Backend)?,
            ),
        })
    }
}

/// One completed run, as serialized into a batch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scheme: String,
    pub use_case: String,
    pub size: usize,
    pub seed: u64,
    pub backend: String,
    pub final_error: Option<f64>,
    pub llm_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Exact accumulated cost in micro-dollars as (numerator, denominator).
    pub cost_micros: (i64, i64),
    /// Digest of the serialized execution trace.
    pub trace_digest: String,
}

/// Execute a single seeded run.
pub fn run_one(
    scheme: Scheme,
    use_case: UseCase,
    size: usize,
    seed: u64,
    backend_spec: &BackendSpec,
    config: &EngineConfig,
) -> Result<(RunOutcome, RunRecord), RunnerError> {
    let instance = generate_instance(use_case, size, seed);
    let adapter = adapter_for(&instance);
    let goo = build_scheme(scheme, use_case, size);
    let registry = TemplateRegistry::builtin();
    let backend = backend_spec.build(seed)?;
    let engine = Engine::new(adapter.as_ref(), backend.as_ref(), &registry, config.clone());
    let outcome = engine.run(&goo)?;
    let cost = outcome.ledger.cost_micros();
    let record = RunRecord {
        scheme: scheme.label(),
        use_case: use_case.as_str().to_string(),
        size,
        seed,
        backend: backend_spec.label(),
        final_error: outcome.final_error,
        llm_calls: outcome.trace.llm_calls(),
        prompt_tokens: outcome.ledger.prompt_tokens,
        completion_tokens: outcome.ledger.completion_tokens,
        cost_micros: (*cost.numer(), *cost.denom()),
        trace_digest: prompt_digest(&outcome.trace.to_jsonl()),
    };
    Ok((outcome, record))
}

/// Run `seeds` and append each record to `out` as it completes.
pub fn run_batch(
    scheme: Scheme,
    use_case: UseCase,
    size: usize,
    seeds: std::ops::Range<u64>,
    backend_spec: &BackendSpec,
    config: &EngineConfig,
    out: &Path,
) -> Result<Vec<RunRecord>, RunnerError> {
    let io_err = |source| RunnerError::Io { path: out.to_path_buf(), source };
    let fresh = !out.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(io_err)?;
    if fresh {
        writeln!(file, "{{\"version\":\"{RUNS_FORMAT_VERSION}\"}}").map_err(io_err)?;
    }
    let mut records = Vec::new();
    for seed in seeds {
        let (_, record) = run_one(scheme, use_case, size, seed, backend_spec, config)?;
        let line = serde_json::to_string(&record).expect("record serialization");
        writeln!(file, "{line}").map_err(io_err)?;
        file.flush().map_err(io_err)?;
        records.push(record);
    }
    Ok(records)
}

/// Load every record from a batch file, skipping the version header.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, RunnerError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| RunnerError::Io { path: path.to_path_buf(), source })?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 && line.contains("\"version\"") {
            if !line.contains(RUNS_FORMAT_VERSION) {
                return Err(RunnerError::Records(format!(
                    "unsupported record file version in header: {line}"
                )));
            }
            continue;
        }
        let record: RunRecord = serde_json::from_str(line)
            .map_err(|e| RunnerError::Records(format!("line {}: {e}", i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Distribution summary of a batch, quantiles by the nearest-rank method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub errored: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub total_llm_calls: u64,
    pub total_cost_dollars: f64,
}

/// Nearest-rank quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn summarize(records: &[RunRecord]) -> Option<Summary> {
    let mut errors: Vec<f64> = records
        .iter()
        .filter_map(|r| r.final_error)
        .filter(|e| e.is_finite())
        .collect();
    if errors.is_empty() {
        return None;
    }
    errors.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let total_cost: Ratio<i64> = records
        .iter()
        .map(|r| Ratio::new(r.cost_micros.0, r.cost_micros.1))
        .sum();
    Some(Summary {
        runs: records.len(),
        errored: records.len() - errors.len(),
        min: errors[0],
        q1: quantile(&errors, 0.25),
        median: quantile(&errors, 0.5),
        q3: quantile(&errors, 0.75),
        max: *errors.last().expect("non-empty"),
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        total_llm_calls: records.iter().map(|r| r.llm_calls).sum(),
        total_cost_dollars: num_traits::ToPrimitive::to_f64(
            &(total_cost / Ratio::from_integer(1_000_000)),
        )
        .unwrap_or(f64::NAN),
    })
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "runs:        {}", self.runs)?;
        writeln!(f, "unscored:    {}", self.errored)?;
        writeln!(
            f,
            "error:       min {} | q1 {} | median {} | q3 {} | max {} | mean {:.3}",
            self.min, self.q1, self.median, self.q3, self.max, self.mean
        )?;
        writeln!(f, "llm calls:   {}", self.total_llm_calls)?;
        write!(f, "total cost:  ${:.6}", self.total_cost_dollars)
    }
}

/// Side-by-side comparison of two batches.
pub fn compare(a: &[RunRecord], b: &[RunRecord]) -> String {
    let name = |rs: &[RunRecord]| {
        rs.first()
            .map(|r| format!("{}/{}", r.scheme, r.use_case))
            .unwrap_or_else(|| "(empty)".to_string())
    };
    let mut out = String::new();
    for (label, records) in [(name(a), a), (name(b), b)] {
        out.push_str(&format!("== {label} ==\n"));
        match summarize(records) {
            Some(summary) => out.push_str(&format!("{summary}\n")),
            None => out.push_str("no scored runs\n"),
        }
    }
    if let (Some(sa), Some(sb)) = (summarize(a), summarize(b)) {
        let verdict = if sa.median < sb.median {
            format!("{} has the lower median error", name(a))
        } else if sb.median < sa.median {
            format!("{} has the lower median error", name(b))
        } else {
            "median errors are tied".to_string()
        };
        out.push_str(&format!("verdict: {verdict}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, err: f64) -> RunRecord {
        RunRecord {
            scheme: "io".to_string(),
            use_case: "sorting".to_string(),
            size: 32,
            seed,
            backend: "mock-perfect".to_string(),
            final_error: Some(err),
            llm_calls: 1,
            prompt_tokens: 10,
            completion_tokens: 5,
            cost_micros: (35, 2),
            trace_digest: "00".to_string(),
        }
    }

    #[test]
    fn nearest_rank_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.25), 1.0);
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert_eq!(quantile(&xs, 0.75), 3.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        let xs = [5.0, 7.0, 9.0];
        assert_eq!(quantile(&xs, 0.5), 7.0);
    }

    #[test]
    fn summary_totals() {
        let records: Vec<RunRecord> = (0..4).map(|s| record(s, s as f64)).collect();
        let summary = summarize(&records).unwrap();
        assert_eq!(summary.runs, 4);
        assert_eq!(summary.median, 1.0);
        assert_eq!(summary.total_llm_calls, 4);
        // 4 × 35/2 µ$ = 70 µ$ = $0.00007.
        assert!((summary.total_cost_dollars - 0.00007).abs() < 1e-12);
    }

    #[test]
    fn backend_spec_parsing() {
        assert_eq!(BackendSpec::parse("mock-perfect").unwrap(), BackendSpec::MockPerfect);
        assert_eq!(
            BackendSpec::parse("mock-faulty:0.3").unwrap(),
            BackendSpec::MockFaulty(0.3)
        );
        assert!(matches!(
            BackendSpec::parse("scripted:/tmp/x.json").unwrap(),
            BackendSpec::Scripted(_)
        ));
        assert!(BackendSpec::parse("mock-faulty:1.5").is_err());
        assert!(BackendSpec::parse("warp-drive").is_err());
    }

    #[test]
    fn record_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let config = EngineConfig::default();
        let records = run_batch(
            Scheme::Io,
            UseCase::Sorting,
            32,
            0..3,
            &BackendSpec::MockPerfect,
            &config,
            &path,
        )
        .unwrap();
        assert_eq!(records.len(), 3);
        let loaded = load_records(&path).unwrap();
        assert_eq!(records, loaded);
        // Appending another batch keeps earlier records intact.
        run_batch(
            Scheme::Io,
            UseCase::Sorting,
            32,
            3..4,
            &BackendSpec::MockPerfect,
            &config,
            &path,
        )
        .unwrap();
        assert_eq!(load_records(&path).unwrap().len(), 4);
    }

    #[test]
    fn perfect_io_run_is_error_free_and_repeatable() {
        let config = EngineConfig::default();
        let (outcome_a, record_a) = run_one(
            Scheme::Io,
            UseCase::Sorting,
            32,
            5,
            &BackendSpec::MockPerfect,
            &config,
        )
        .unwrap();
        let (_, record_b) = run_one(
            Scheme::Io,
            UseCase::Sorting,
            32,
            5,
            &BackendSpec::MockPerfect,
            &config,
        )
        .unwrap();
        assert_eq!(outcome_a.final_error, Some(0.0));
        assert_eq!(record_a, record_b);
        assert_eq!(record_a.llm_calls, 1);
    }
}
