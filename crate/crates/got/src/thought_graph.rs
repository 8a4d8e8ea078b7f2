//! The graph reasoning state (GRS): thoughts, typed edges, and the delta
//! algebra used by thought transformations.
//!
//! A transformation never mutates a thought in place. Refinement creates a
//! new vertex joined to its predecessor by a `Refine` edge; the edge kind
//! records that this is a refinement round rather than fresh generation, and
//! keeps the full history available for later ranking. Cycle checking runs
//! over generate/aggregate edges only — refine edges are annotations.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::content::Content;

/// Identifier of a thought within one [`ReasoningState`]. Never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ThoughtId(pub u64);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Generate,
    Aggregate,
    Refine,
}

impl EdgeKind {
    fn label(self) -> &'static str {
        match self {
            EdgeKind::Generate => "generate",
            EdgeKind::Aggregate => "aggregate",
            EdgeKind::Refine => "refine",
        }
    }
}

/// One vertex of the reasoning graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thought {
    pub id: ThoughtId,
    pub content: Content,
    /// Thought-class label: "input", "solution", "plan", ...
    pub class: String,
    /// Set by a Score operation; absent until then.
    pub score: Option<f64>,
    /// Set by validation or by the parse-failure policy.
    pub valid: Option<bool>,
    /// Id of the GoO operation that produced this thought (None for the root).
    pub origin_op: Option<u64>,
    /// Monotone counter used for every deterministic ordering decision.
    pub creation_index: u64,
    /// Locally computed reference content the thought should be scored
    /// against (e.g. the list a sort attempt was asked to sort). Carried on
    /// the thought so scorers never have to re-derive lineage.
    pub target: Option<Content>,
}

/// A thought transformation expressed as a set difference against the state.
#[derive(Debug, Clone, Default)]
pub struct GraphDelta {
    pub v_plus: Vec<Thought>,
    pub e_plus: Vec<(ThoughtId, ThoughtId, EdgeKind)>,
    pub v_minus: Vec<ThoughtId>,
    pub e_minus: Vec<(ThoughtId, ThoughtId, EdgeKind)>,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.v_plus.is_empty()
            && self.e_plus.is_empty()
            && self.v_minus.is_empty()
            && self.e_minus.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("inconsistent delta: {0}")]
    InconsistentDelta(String),
    #[error("unknown thought {0:?}")]
    UnknownThought(ThoughtId),
    #[error("cycle through {0:?} over generate/aggregate edges")]
    CycleDetected(ThoughtId),
}

type EdgeSet = BTreeSet<(ThoughtId, EdgeKind)>;

/// Directed graph of all thoughts produced so far.
#[derive(Debug, Clone, Default)]
pub struct ReasoningState {
    vertices: BTreeMap<ThoughtId, Thought>,
    forward: BTreeMap<ThoughtId, EdgeSet>,
    reverse: BTreeMap<ThoughtId, EdgeSet>,
    next_id: u64,
}

impl ReasoningState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserve the next thought id. Ids are handed out monotonically and
    /// never reused, even if the vertex is later removed.
    pub fn allocate_id(&mut self) -> ThoughtId {
        let id = ThoughtId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, id: ThoughtId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn thought(&self, id: ThoughtId) -> Result<&Thought, GraphError> {
        self.vertices.get(&id).ok_or(GraphError::UnknownThought(id))
    }

    pub fn thought_mut(&mut self, id: ThoughtId) -> Result<&mut Thought, GraphError> {
        self.vertices
            .get_mut(&id)
            .ok_or(GraphError::UnknownThought(id))
    }

    pub fn thoughts(&self) -> impl Iterator<Item = &Thought> {
        self.vertices.values()
    }

    /// Direct predecessors (incoming edges), optionally restricted by kind.
    pub fn parents(&self, id: ThoughtId, kind: Option<EdgeKind>) -> Vec<ThoughtId> {
        self.reverse
            .get(&id)
            .into_iter()
            .flatten()
            .filter(|(_, k)| kind.is_none_or(|want| *k == want))
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn edges(&self) -> Vec<(ThoughtId, ThoughtId, EdgeKind)> {
        let mut out = Vec::new();
        for (src, targets) in &self.forward {
            for (dst, kind) in targets {
                out.push((*src, *dst, *kind));
            }
        }
        out
    }

    /// Apply a transformation delta.
    ///
    /// Removal cascades: edges incident to removed vertices disappear with
    /// them. The state is left untouched on error.
    pub fn apply_delta(&mut self, delta: &GraphDelta) -> Result<(), GraphError> {
        self.check_delta(delta)?;

        for id in &delta.v_minus {
            self.vertices.remove(id);
            if let Some(out) = self.forward.remove(id) {
                for (dst, kind) in out {
                    if let Some(rev) = self.reverse.get_mut(&dst) {
                        rev.remove(&(*id, kind));
                    }
                }
            }
            if let Some(inc) = self.reverse.remove(id) {
                for (src, kind) in inc {
                    if let Some(fwd) = self.forward.get_mut(&src) {
                        fwd.remove(&(*id, kind));
                    }
                }
            }
        }
        for (src, dst, kind) in &delta.e_minus {
            if let Some(fwd) = self.forward.get_mut(src) {
                fwd.remove(&(*dst, *kind));
            }
            if let Some(rev) = self.reverse.get_mut(dst) {
                rev.remove(&(*src, *kind));
            }
        }
        for thought in &delta.v_plus {
            self.next_id = self.next_id.max(thought.id.0 + 1);
            self.vertices.insert(thought.id, thought.clone());
        }
        for (src, dst, kind) in &delta.e_plus {
            self.forward.entry(*src).or_default().insert((*dst, *kind));
            self.reverse.entry(*dst).or_default().insert((*src, *kind));
        }

        if let Some(offender) = self.find_cycle() {
            return Err(GraphError::CycleDetected(offender));
        }
        Ok(())
    }

    fn check_delta(&self, delta: &GraphDelta) -> Result<(), GraphError> {
        let added: HashSet<ThoughtId> = delta.v_plus.iter().map(|t| t.id).collect();
        let removed: HashSet<ThoughtId> = delta.v_minus.iter().copied().collect();
        if let Some(id) = added.intersection(&removed).next() {
            return Err(GraphError::InconsistentDelta(format!(
                "{id:?} both added and removed"
            )));
        }
        for thought in &delta.v_plus {
            if self.vertices.contains_key(&thought.id) {
                return Err(GraphError::InconsistentDelta(format!(
                    "{:?} already exists",
                    thought.id
                )));
            }
        }
        for id in &removed {
            if !self.vertices.contains_key(id) {
                return Err(GraphError::InconsistentDelta(format!(
                    "removal of nonexistent {id:?}"
                )));
            }
        }
        let post_has = |id: &ThoughtId| {
            (self.vertices.contains_key(id) || added.contains(id)) && !removed.contains(id)
        };
        for (src, dst, _) in &delta.e_plus {
            if !post_has(src) || !post_has(dst) {
                return Err(GraphError::InconsistentDelta(format!(
                    "edge ({src:?}, {dst:?}) references a vertex absent from the post-state"
                )));
            }
        }
        Ok(())
    }

    /// Kahn's algorithm over generate/aggregate edges; returns a vertex on a
    /// cycle if one exists.
    fn find_cycle(&self) -> Option<ThoughtId> {
        let mut indeg: BTreeMap<ThoughtId, usize> = BTreeMap::new();
        for id in self.vertices.keys() {
            indeg.insert(*id, 0);
        }
        for (src, targets) in &self.forward {
            if !self.vertices.contains_key(src) {
                continue;
            }
            for (dst, kind) in targets {
                if *kind != EdgeKind::Refine {
                    *indeg.entry(*dst).or_insert(0) += 1;
                }
            }
        }
        let mut queue: Vec<ThoughtId> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut seen = 0usize;
        while let Some(id) = queue.pop() {
            seen += 1;
            if let Some(targets) = self.forward.get(&id) {
                for (dst, kind) in targets {
                    if *kind == EdgeKind::Refine {
                        continue;
                    }
                    let d = indeg.get_mut(dst).expect("edge target exists");
                    *d -= 1;
                    if *d == 0 {
                        queue.push(*dst);
                    }
                }
            }
        }
        if seen == self.vertices.len() {
            None
        } else {
            indeg
                .iter()
                .find(|(_, d)| **d > 0)
                .map(|(id, _)| *id)
        }
    }

    /// All thoughts with a directed path to `id` (any edge kind), excluding
    /// `id` itself.
    pub fn ancestors(&self, id: ThoughtId) -> Result<BTreeSet<ThoughtId>, GraphError> {
        if !self.contains(id) {
            return Err(GraphError::UnknownThought(id));
        }
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if let Some(parents) = self.reverse.get(&cur) {
                for (p, _) in parents {
                    if *p != id && out.insert(*p) {
                        stack.push(*p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Number of preceding thoughts that could have impacted `id`.
    pub fn volume(&self, id: ThoughtId) -> Result<usize, GraphError> {
        Ok(self.ancestors(id)?.len())
    }

    /// Length (edge count) of the longest directed path from any source
    /// vertex to `id`; 0 for a source.
    pub fn latency(&self, id: ThoughtId) -> Result<usize, GraphError> {
        if !self.contains(id) {
            return Err(GraphError::UnknownThought(id));
        }
        let mut memo: HashMap<ThoughtId, usize> = HashMap::new();
        self.latency_rec(id, &mut memo, &mut HashSet::new())
    }

    fn latency_rec(
        &self,
        id: ThoughtId,
        memo: &mut HashMap<ThoughtId, usize>,
        on_path: &mut HashSet<ThoughtId>,
    ) -> Result<usize, GraphError> {
        if let Some(v) = memo.get(&id) {
            return Ok(*v);
        }
        if !on_path.insert(id) {
            return Err(GraphError::CycleDetected(id));
        }
        let mut best = 0usize;
        if let Some(parents) = self.reverse.get(&id) {
            for (p, _) in parents.clone() {
                best = best.max(self.latency_rec(p, memo, on_path)? + 1);
            }
        }
        on_path.remove(&id);
        memo.insert(id, best);
        Ok(best)
    }

    /// Versioned plain-text trace export: vertex list (id, class, score,
    /// validity, content digest) and edge list with kinds.
    pub fn export_grs(&self) -> String {
        let mut out = String::from("grs-v1\n");
        for thought in self.vertices.values() {
            let score = thought
                .score
                .map(|s| format!("{s}"))
                .unwrap_or_else(|| "-".to_string());
            let valid = match thought.valid {
                Some(true) => "valid",
                Some(false) => "invalid",
                None => "-",
            };
            let digest = Sha256::digest(thought.content.canonical().as_bytes());
            let _ = writeln!(
                out,
                "v {} {} {} {} {:02x}{:02x}{:02x}{:02x}",
                thought.id.0, thought.class, score, valid, digest[0], digest[1], digest[2], digest[3],
            );
        }
        for (src, dst, kind) in self.edges() {
            let _ = writeln!(out, "e {} {} {}", src.0, dst.0, kind.label());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare(id: u64) -> Thought {
        Thought {
            id: ThoughtId(id),
            content: Content::Text(format!("t{id}")),
            class: "solution".to_string(),
            score: None,
            valid: None,
            origin_op: None,
            creation_index: id,
            target: None,
        }
    }

    fn add(state: &mut ReasoningState, ids: &[u64], edges: &[(u64, u64)]) {
        let delta = GraphDelta {
            v_plus: ids.iter().map(|i| bare(*i)).collect(),
            e_plus: edges
                .iter()
                .map(|(a, b)| (ThoughtId(*a), ThoughtId(*b), EdgeKind::Generate))
                .collect(),
            ..Default::default()
        };
        state.apply_delta(&delta).unwrap();
    }

    #[test]
    fn insert_into_empty_graph() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0], &[]);
        assert_eq!(s.len(), 1);
        assert!(s.edges().is_empty());
    }

    #[test]
    fn generation_fan_out() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0], &[]);
        add(&mut s, &[1, 2], &[(0, 1), (0, 2)]);
        assert_eq!(s.edges().len(), 2);
        assert_eq!(s.parents(ThoughtId(1), None), vec![ThoughtId(0)]);
    }

    #[test]
    fn aggregation_in_degree() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1], &[]);
        add(&mut s, &[2], &[(0, 2), (1, 2)]);
        assert_eq!(s.parents(ThoughtId(2), None).len(), 2);
    }

    #[test]
    fn empty_delta_is_identity() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1], &[(0, 1)]);
        let before = s.export_grs();
        s.apply_delta(&GraphDelta::default()).unwrap();
        assert_eq!(s.export_grs(), before);
    }

    #[test]
    fn removal_cascades_incident_edges() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1, 2], &[(0, 1), (1, 2)]);
        let delta = GraphDelta {
            v_minus: vec![ThoughtId(1)],
            ..Default::default()
        };
        s.apply_delta(&delta).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.edges().is_empty());
    }

    #[test]
    fn inconsistent_deltas_are_rejected() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0], &[]);
        let delta = GraphDelta {
            v_minus: vec![ThoughtId(9)],
            ..Default::default()
        };
        assert!(matches!(
            s.apply_delta(&delta),
            Err(GraphError::InconsistentDelta(_))
        ));
        let delta = GraphDelta {
            e_plus: vec![(ThoughtId(0), ThoughtId(7), EdgeKind::Generate)],
            ..Default::default()
        };
        assert!(matches!(
            s.apply_delta(&delta),
            Err(GraphError::InconsistentDelta(_))
        ));
        // Failed deltas leave the state untouched.
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn cycles_over_generate_edges_are_rejected() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1], &[(0, 1)]);
        let delta = GraphDelta {
            e_plus: vec![(ThoughtId(1), ThoughtId(0), EdgeKind::Generate)],
            ..Default::default()
        };
        assert!(matches!(
            s.apply_delta(&delta),
            Err(GraphError::CycleDetected(_))
        ));
    }

    #[test]
    fn refine_edges_are_exempt_from_cycle_checks() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1], &[(0, 1)]);
        let delta = GraphDelta {
            e_plus: vec![(ThoughtId(1), ThoughtId(0), EdgeKind::Refine)],
            ..Default::default()
        };
        s.apply_delta(&delta).unwrap();
    }

    #[test]
    fn ancestors_chain_and_diamond() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1, 2], &[(0, 1), (1, 2)]);
        assert!(s.ancestors(ThoughtId(0)).unwrap().is_empty());
        assert_eq!(
            s.ancestors(ThoughtId(2)).unwrap(),
            [ThoughtId(0), ThoughtId(1)].into_iter().collect()
        );

        let mut d = ReasoningState::new();
        add(&mut d, &[0, 1, 2, 3], &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(d.ancestors(ThoughtId(3)).unwrap().len(), 3);
        assert_eq!(d.volume(ThoughtId(3)).unwrap(), 3);
        assert_eq!(d.latency(ThoughtId(3)).unwrap(), 2);
    }

    #[test]
    fn chain_latency_and_volume() {
        let mut s = ReasoningState::new();
        add(&mut s, &[0, 1, 2, 3, 4], &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(s.volume(ThoughtId(4)).unwrap(), 4);
        assert_eq!(s.latency(ThoughtId(4)).unwrap(), 4);
        assert_eq!(s.latency(ThoughtId(0)).unwrap(), 0);
    }

    #[test]
    fn unknown_thought_errors() {
        let s = ReasoningState::new();
        assert_eq!(
            s.ancestors(ThoughtId(5)).unwrap_err(),
            GraphError::UnknownThought(ThoughtId(5))
        );
    }
}
