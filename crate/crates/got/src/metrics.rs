//! Latency/volume analysis of reasoning topologies.
//!
//! For a thought t, *volume* is the number of ancestor thoughts that can
//! influence it and *latency* is the longest edge path ending in t. The
//! synthetic shapes here reproduce the classic prompting topologies: a chain
//! (deep but narrow), parallel chains from a shared root, a k-ary tree
//! (wide but shallow), and an hourglass — a tree joined to its mirror image
//! so everything funnels back into a single sink, which maximises volume at
//! only double the tree's latency.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::content::Content;
use crate::thought_graph::{EdgeKind, GraphDelta, ReasoningState, Thought, ThoughtId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TopologyShape {
    /// `n` thoughts in a single refinement chain.
    Chain { n: usize },
    /// A shared root feeding `k` chains that partition `n` thoughts.
    MultiChain { k: usize, n: usize },
    /// A complete k-ary tree of the given depth.
    KaryTree { k: usize, depth: usize },
    /// A complete k-ary tree joined, at its leaves, to a mirrored reversed
    /// tree that converges to a single sink.
    Hourglass { k: usize, depth: usize },
}

impl TopologyShape {
    pub fn label(&self) -> String {
        match self {
            TopologyShape::Chain { n } => format!("chain(n={n})"),
            TopologyShape::MultiChain { k, n } => format!("multi_chain(k={k}, n={n})"),
            TopologyShape::KaryTree { k, depth } => format!("kary_tree(k={k}, depth={depth})"),
            TopologyShape::Hourglass { k, depth } => format!("hourglass(k={k}, depth={depth})"),
        }
    }
}

/// A built topology: the state, every vertex, and the measurement target
/// (the final vertex whose latency/volume the closed forms predict).
pub struct Topology {
    pub state: ReasoningState,
    pub target: ThoughtId,
}

fn blank_thought(id: ThoughtId) -> Thought {
    Thought {
        id,
        content: Content::Text(String::new()),
        class: "node".to_string(),
        score: None,
        valid: None,
        origin_op: None,
        creation_index: id.0,
        target: None,
    }
}

/// Materialise a shape as a reasoning graph.
///
/// Panics on degenerate parameters (`n == 0`, `k == 0`, or a multi-chain
/// whose `n` is not divisible by `k`); shapes come from trusted callers.
pub fn build_topology(shape: TopologyShape) -> Topology {
    let mut state = ReasoningState::new();
    let add = |state: &mut ReasoningState, parents: &[ThoughtId]| -> ThoughtId {
        let id = state.allocate_id();
        state
            .apply_delta(&GraphDelta {
                v_plus: vec![blank_thought(id)],
                e_plus: parents.iter().map(|&p| (p, id, EdgeKind::Generate)).collect(),
                ..Default::default()
            })
            .expect("topology construction is acyclic");
        id
    };
    let target = match shape {
        TopologyShape::Chain { n } => {
            assert!(n > 0, "chain needs at least one thought");
            let mut prev = add(&mut state, &[]);
            for _ in 1..n {
                prev = add(&mut state, &[prev]);
            }
            prev
        }
        TopologyShape::MultiChain { k, n } => {
            assert!(k > 0 && n > 0 && n % k == 0, "n must split evenly over k chains");
            let root = add(&mut state, &[]);
            let per_chain = n / k;
            let mut last = root;
            for _ in 0..k {
                let mut prev = root;
                for _ in 0..per_chain {
                    prev = add(&mut state, &[prev]);
                }
                last = prev;
            }
            last
        }
        TopologyShape::KaryTree { k, depth } => {
            assert!(k > 0, "tree arity must be positive");
            let root = add(&mut state, &[]);
            let mut frontier = vec![root];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(frontier.len() * k);
                for &parent in &frontier {
                    for _ in 0..k {
                        next.push(add(&mut state, &[parent]));
                    }
                }
                frontier = next;
            }
            *frontier.last().expect("tree has leaves")
        }
        TopologyShape::Hourglass { k, depth } => {
            assert!(k > 0, "tree arity must be positive");
            let root = add(&mut state, &[]);
            let mut frontier = vec![root];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(frontier.len() * k);
                for &parent in &frontier {
                    for _ in 0..k {
                        next.push(add(&mut state, &[parent]));
                    }
                }
                frontier = next;
            }
            // Mirror: merge the leaves back together, k siblings at a time,
            // down to a single sink.
            while frontier.len() > 1 {
                let mut next = Vec::with_capacity(frontier.len() / k);
                for group in frontier.chunks(k) {
                    next.push(add(&mut state, group));
                }
                frontier = next;
            }
            frontier[0]
        }
    };
    Topology { state, target }
}

/// Predicted (latency, volume) of the target vertex.
pub fn closed_form(shape: TopologyShape) -> (usize, usize) {
    match shape {
        TopologyShape::Chain { n } => (n - 1, n - 1),
        TopologyShape::MultiChain { k, n } => (n / k, n / k),
        TopologyShape::KaryTree { depth, .. } => (depth, depth),
        TopologyShape::Hourglass { k, depth } => {
            (2 * depth, hourglass_vertex_count(k, depth) - 1)
        }
    }
}

/// Total vertices of an hourglass: a complete k-ary tree plus its mirror,
/// sharing the leaf layer.
pub fn hourglass_vertex_count(k: usize, depth: usize) -> usize {
    let tree: usize = (0..=depth).map(|d| k.pow(d as u32)).sum();
    2 * tree - k.pow(depth as u32)
}

/// Measured (latency, volume) for one shape's target vertex.
pub fn measure(shape: TopologyShape) -> (usize, usize) {
    let topology = build_topology(shape);
    let latency = topology
        .state
        .latency(topology.target)
        .expect("target exists");
    let volume = topology
        .state
        .volume(topology.target)
        .expect("target exists");
    (latency, volume)
}

/// A delimited table comparing measured metrics against the closed forms.
pub fn topology_table(shapes: &[TopologyShape]) -> String {
    let mut out = String::from("shape\tvertices\tlatency\tvolume\tpredicted_latency\tpredicted_volume\n");
    for &shape in shapes {
        let topology = build_topology(shape);
        let latency = topology.state.latency(topology.target).expect("target");
        let volume = topology.state.volume(topology.target).expect("target");
        let (pl, pv) = closed_form(shape);
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            shape.label(),
            topology.state.len(),
            latency,
            volume,
            pl,
            pv
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_metrics() {
        for n in [1, 2, 5, 12] {
            assert_eq!(measure(TopologyShape::Chain { n }), (n - 1, n - 1));
        }
    }

    #[test]
    fn multi_chain_metrics() {
        for (k, n) in [(2, 12), (3, 12), (4, 16)] {
            let shape = TopologyShape::MultiChain { k, n };
            assert_eq!(measure(shape), closed_form(shape));
            assert_eq!(build_topology(shape).state.len(), n + 1);
        }
    }

    #[test]
    fn tree_metrics() {
        for k in [2, 3] {
            for depth in [2, 3, 4] {
                let shape = TopologyShape::KaryTree { k, depth };
                assert_eq!(measure(shape), (depth, depth));
                let expected: usize = (0..=depth).map(|d| k.pow(d as u32)).sum();
                assert_eq!(build_topology(shape).state.len(), expected);
            }
        }
    }

    #[test]
    fn hourglass_sink_sees_everything() {
        for k in [2, 3] {
            for depth in [2, 3, 4] {
                let shape = TopologyShape::Hourglass { k, depth };
                let topology = build_topology(shape);
                let count = topology.state.len();
                assert_eq!(count, hourglass_vertex_count(k, depth));
                // The sink depends on every other vertex.
                assert_eq!(
                    topology.state.volume(topology.target).unwrap(),
                    count - 1
                );
                assert_eq!(
                    topology.state.latency(topology.target).unwrap(),
                    2 * depth
                );
            }
        }
    }

    #[test]
    fn table_lists_all_shapes() {
        let table = topology_table(&[
            TopologyShape::Chain { n: 4 },
            TopologyShape::Hourglass { k: 2, depth: 2 },
        ]);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("chain(n=4)\t4\t3\t3\t3\t3"));
    }
}
