//! The graph of operations (GoO): a static execution plan.
//!
//! A plan is a DAG of operations over thoughts. Operation inputs are the
//! outputs of their predecessors, concatenated in predecessor order and
//! optionally narrowed by a [`Select`] index (used when a split produces
//! several sibling thoughts and a branch should consume just one of them).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type OpId = u64;

/// Which slice of the concatenated predecessor outputs an operation consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Select {
    /// All predecessor outputs, in order.
    #[default]
    All,
    /// Only the i-th predecessor output.
    Index(usize),
}

/// Candidate pool for a keep-best filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepScope {
    /// Rank only the direct inputs.
    Predecessors,
    /// Rank the direct inputs together with every thought retained by
    /// earlier keep-best operations in the same run.
    CumulativeBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpKind {
    /// `k` independent completions per input thought (one completion when the
    /// prompt is a splitter that yields several outputs at once).
    Generate { k: usize, prompt_id: String },
    /// `n` attempts at combining ALL inputs into one candidate each.
    Aggregate { n: usize, prompt_id: String },
    /// `k` refinement attempts per input; each creates a new thought linked
    /// to its source by a refine edge.
    Improve { k: usize, prompt_id: String },
    /// Attach a score to every input thought. LLM-assisted scorers issue
    /// `samples` completions per input; local scorers issue none.
    Score { samples: usize, scorer_id: String },
    /// Validate each input; on failure, regenerate via `prompt_id` up to
    /// `max_attempts` times before marking the thought invalid.
    ValidateAndImprove {
        max_attempts: usize,
        validator_id: String,
        prompt_id: String,
    },
    /// Retain the best `n` thoughts from the scope.
    KeepBestN { n: usize, scope: KeepScope },
    /// Compare the surviving thought(s) against the instance ground truth.
    GroundTruth { comparator_id: String },
}

impl OpKind {
    pub fn label(&self) -> &'static str {
        match self {
            OpKind::Generate { .. } => "generate",
            OpKind::Aggregate { .. } => "aggregate",
            OpKind::Improve { .. } => "improve",
            OpKind::Score { .. } => "score",
            OpKind::ValidateAndImprove { .. } => "validate_and_improve",
            OpKind::KeepBestN { .. } => "keep_best_n",
            OpKind::GroundTruth { .. } => "ground_truth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub id: OpId,
    #[serde(flatten)]
    pub kind: OpKind,
    #[serde(default)]
    pub predecessors: Vec<OpId>,
    #[serde(default)]
    pub select: Select,
}

/// Versioned on-disk form of a plan.
pub const GOO_FORMAT_VERSION: &str = "goo-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOfOperations {
    pub version: String,
    pub ops: Vec<OperationSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GooError {
    #[error("plan has no operations")]
    Empty,
    #[error("unsupported plan version `{0}`, expected `{GOO_FORMAT_VERSION}`")]
    BadVersion(String),
    #[error("operation id {0} appears more than once")]
    DuplicateOpId(OpId),
    #[error("operation {op} references unknown predecessor {predecessor}")]
    UnknownPredecessor { op: OpId, predecessor: OpId },
    #[error("operation dependencies contain a cycle through operation {0}")]
    CycleDetected(OpId),
    #[error("ground-truth comparison must be the single sink, but {0} also has no successors")]
    ExtraSink(OpId),
    #[error("operation {0} has a zero arity parameter")]
    ZeroArity(OpId),
    #[error("plan serialization failed: {0}")]
    Serde(String),
}

impl GraphOfOperations {
    pub fn new(ops: Vec<OperationSpec>) -> Self {
        GraphOfOperations { version: GOO_FORMAT_VERSION.to_string(), ops }
    }

    pub fn op(&self, id: OpId) -> Option<&OperationSpec> {
        self.ops.iter().find(|o| o.id == id)
    }

    /// Validate the plan and return the operation ids in execution order.
    ///
    /// Checks performed: non-empty, version match, unique ids, known
    /// predecessors, acyclicity, non-zero arity parameters, and — when a
    /// ground-truth comparison is present — that it is the unique sink.
    pub fn validate(&self) -> Result<Vec<OpId>, GooError> {
        if self.ops.is_empty() {
            return Err(GooError::Empty);
        }
        if self.version != GOO_FORMAT_VERSION {
            return Err(GooError::BadVersion(self.version.clone()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for op in &self.ops {
            if !ids.insert(op.id) {
                return Err(GooError::DuplicateOpId(op.id));
            }
            let arity_ok = match &op.kind {
                OpKind::Generate { k, .. } | OpKind::Improve { k, .. } => *k > 0,
                OpKind::Aggregate { n, .. } | OpKind::KeepBestN { n, .. } => *n > 0,
                OpKind::Score { .. } | OpKind::GroundTruth { .. } => true,
                OpKind::ValidateAndImprove { max_attempts, .. } => *max_attempts > 0,
            };
            if !arity_ok {
                return Err(GooError::ZeroArity(op.id));
            }
        }
        for op in &self.ops {
            for &p in &op.predecessors {
                if !ids.contains(&p) {
                    return Err(GooError::UnknownPredecessor { op: op.id, predecessor: p });
                }
            }
        }
        // Kahn's algorithm; ties broken by ascending id for a stable order.
        let mut indegree: std::collections::BTreeMap<OpId, usize> =
            self.ops.iter().map(|o| (o.id, o.predecessors.len())).collect();
        let mut successors: std::collections::BTreeMap<OpId, Vec<OpId>> = Default::default();
        for op in &self.ops {
            for &p in &op.predecessors {
                successors.entry(p).or_default().push(op.id);
            }
        }
        let mut order = Vec::with_capacity(self.ops.len());
        let mut ready: std::collections::BTreeSet<OpId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            for &s in successors.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(&s).expect("known op");
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        if order.len() != self.ops.len() {
            let stuck = self
                .ops
                .iter()
                .map(|o| o.id)
                .find(|id| !order.contains(id))
                .expect("some op missing from order");
            return Err(GooError::CycleDetected(stuck));
        }
        // With a ground-truth comparison present, it must be the unique sink.
        let has_ground_truth = self
            .ops
            .iter()
            .any(|o| matches!(o.kind, OpKind::GroundTruth { .. }));
        if has_ground_truth {
            let with_successors: std::collections::BTreeSet<OpId> =
                self.ops.iter().flat_map(|o| o.predecessors.iter().copied()).collect();
            for op in &self.ops {
                let is_sink = !with_successors.contains(&op.id);
                let is_gt = matches!(op.kind, OpKind::GroundTruth { .. });
                if is_sink && !is_gt {
                    return Err(GooError::ExtraSink(op.id));
                }
            }
        }
        Ok(order)
    }

    pub fn to_json(&self) -> Result<String, GooError> {
        serde_json::to_string_pretty(self).map_err(|e| GooError::Serde(e.to_string()))
    }

    pub fn from_json(raw: &str) -> Result<Self, GooError> {
        let goo: GraphOfOperations =
            serde_json::from_str(raw).map_err(|e| GooError::Serde(e.to_string()))?;
        goo.validate()?;
        Ok(goo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(id: OpId, predecessors: Vec<OpId>) -> OperationSpec {
        OperationSpec {
            id,
            kind: OpKind::Generate { k: 1, prompt_id: "sort_prompt".to_string() },
            predecessors,
            select: Select::All,
        }
    }

    #[test]
    fn valid_chain_orders_topologically() {
        let goo = GraphOfOperations::new(vec![gen(2, vec![1]), gen(1, vec![0]), gen(0, vec![])]);
        assert_eq!(goo.validate().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_duplicates_unknowns_and_cycles() {
        let goo = GraphOfOperations::new(vec![gen(0, vec![]), gen(0, vec![])]);
        assert_eq!(goo.validate(), Err(GooError::DuplicateOpId(0)));

        let goo = GraphOfOperations::new(vec![gen(0, vec![7])]);
        assert_eq!(
            goo.validate(),
            Err(GooError::UnknownPredecessor { op: 0, predecessor: 7 })
        );

        let goo = GraphOfOperations::new(vec![gen(0, vec![1]), gen(1, vec![0])]);
        assert!(matches!(goo.validate(), Err(GooError::CycleDetected(_))));

        assert_eq!(GraphOfOperations::new(vec![]).validate(), Err(GooError::Empty));
    }

    #[test]
    fn ground_truth_must_be_unique_sink() {
        let gt = OperationSpec {
            id: 2,
            kind: OpKind::GroundTruth { comparator_id: "sorting".to_string() },
            predecessors: vec![0],
            select: Select::All,
        };
        // Op 1 is a second sink next to the ground-truth op.
        let goo = GraphOfOperations::new(vec![gen(0, vec![]), gen(1, vec![0]), gt.clone()]);
        assert_eq!(goo.validate(), Err(GooError::ExtraSink(1)));

        let goo = GraphOfOperations::new(vec![gen(0, vec![]), gt]);
        assert!(goo.validate().is_ok());
    }

    #[test]
    fn zero_arity_is_rejected() {
        let goo = GraphOfOperations::new(vec![OperationSpec {
            id: 0,
            kind: OpKind::KeepBestN { n: 0, scope: KeepScope::Predecessors },
            predecessors: vec![],
            select: Select::All,
        }]);
        assert_eq!(goo.validate(), Err(GooError::ZeroArity(0)));
    }

    #[test]
    fn json_round_trip() {
        let goo = GraphOfOperations::new(vec![
            gen(0, vec![]),
            OperationSpec {
                id: 1,
                kind: OpKind::KeepBestN { n: 1, scope: KeepScope::CumulativeBest },
                predecessors: vec![0],
                select: Select::Index(0),
            },
        ]);
        let json = goo.to_json().unwrap();
        let back = GraphOfOperations::from_json(&json).unwrap();
        assert_eq!(goo, back);
        assert!(json.contains("keep_best_n"));
    }

    #[test]
    fn version_is_checked() {
        let mut goo = GraphOfOperations::new(vec![gen(0, vec![])]);
        goo.version = "goo-v0".to_string();
        assert_eq!(goo.validate(), Err(GooError::BadVersion("goo-v0".to_string())));
    }
}
