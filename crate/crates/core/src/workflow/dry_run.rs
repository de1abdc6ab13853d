use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use super::graph::{NodeKind, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Fork(String),
    Action(String),
    Join(String),
}

impl TraceEvent {
    pub fn name(&self) -> &str {
        match self {
            TraceEvent::Fork(n) | TraceEvent::Action(n) | TraceEvent::Join(n) => n,
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Fork(n) => write!(f, "fork({n})"),
            TraceEvent::Action(n) => write!(f, "{n}"),
            TraceEvent::Join(n) => write!(f, "join({n})"),
        }
    }
}

/// Walks the success path of a validated graph in topological order.
///
/// Only ok / path / join edges are followed. Among nodes that are ready at the
/// same time, the lexicographically smallest name goes first.
pub fn dry_run(graph: &WorkflowGraph) -> Vec<TraceEvent> {
    let index = graph.index();
    let Some(start) = graph
        .nodes
        .iter()
        .position(|n| matches!(n.kind, NodeKind::Start { .. }))
    else {
        return Vec::new();
    };

    let successors: Vec<Vec<usize>> = graph
        .nodes
        .iter()
        .map(|n| n.success_edges().filter_map(|t| index.get(t).copied()).collect())
        .collect();

    let mut reachable = vec![false; graph.nodes.len()];
    let mut queue = VecDeque::from([start]);
    reachable[start] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &successors[i] {
            if !reachable[j] {
                reachable[j] = true;
                queue.push_back(j);
            }
        }
    }

    let mut in_degree = vec![0usize; graph.nodes.len()];
    for (i, succ) in successors.iter().enumerate() {
        if reachable[i] {
            for &j in succ {
                in_degree[j] += 1;
            }
        }
    }

    let mut ready = BinaryHeap::new();
    ready.push(Reverse((graph.nodes[start].name.as_str(), start)));
    let mut trace = Vec::new();
    while let Some(Reverse((_, i))) = ready.pop() {
        let node = &graph.nodes[i];
        match node.kind {
            NodeKind::Action { .. } => trace.push(TraceEvent::Action(node.name.clone())),
            NodeKind::Fork { .. } => trace.push(TraceEvent::Fork(node.name.clone())),
            NodeKind::Join { .. } => trace.push(TraceEvent::Join(node.name.clone())),
            _ => {}
        }
        for &j in &successors[i] {
            in_degree[j] -= 1;
            if in_degree[j] == 0 {
                ready.push(Reverse((graph.nodes[j].name.as_str(), j)));
            }
        }
    }
    trace
}
