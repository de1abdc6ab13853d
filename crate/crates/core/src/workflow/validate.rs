use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use super::graph::{NodeKind, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingStart,
    MultipleStarts(usize),
    MissingEnd,
    DuplicateName(String),
    DanglingTarget { from: String, target: String },
    Cycle(Vec<String>),
    UnreachableNode(String),
    ForkWithoutJoin(String),
    JoinFanInMismatch {
        join: String,
        expected: usize,
        actual: usize,
    },
    OrphanJoin(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingStart => f.write_str("workflow has no start node"),
            Violation::MultipleStarts(n) => write!(f, "workflow has {n} start nodes"),
            Violation::MissingEnd => f.write_str("workflow has no end node"),
            Violation::DuplicateName(n) => write!(f, "node name `{n}` is used more than once"),
            Violation::DanglingTarget { from, target } => {
                write!(f, "`{from}` transitions to missing node `{target}`")
            }
            Violation::Cycle(path) => write!(f, "cycle: {}", path.join(" -> ")),
            Violation::UnreachableNode(n) => write!(f, "node `{n}` is unreachable from start"),
            Violation::ForkWithoutJoin(n) => {
                write!(f, "paths of fork `{n}` do not all converge on one join")
            }
            Violation::JoinFanInMismatch {
                join,
                expected,
                actual,
            } => write!(f, "join `{join}` expects {expected} incoming paths, has {actual}"),
            Violation::OrphanJoin(n) => write!(f, "join `{n}` does not close any fork"),
        }
    }
}

/// Checks structural well-formedness. An empty result means the graph is valid.
pub fn validate_graph(graph: &WorkflowGraph) -> Vec<Violation> {
    let mut report = Vec::new();
    let index = graph.index();

    let starts = graph
        .nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Start { .. }))
        .count();
    match starts {
        0 => report.push(Violation::MissingStart),
        1 => {}
        n => report.push(Violation::MultipleStarts(n)),
    }
    if !graph.nodes.iter().any(|n| n.kind == NodeKind::End) {
        report.push(Violation::MissingEnd);
    }

    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for n in &graph.nodes {
        if !seen.insert(n.name.as_str()) && reported.insert(n.name.as_str()) {
            report.push(Violation::DuplicateName(n.name.clone()));
        }
    }

    for n in &graph.nodes {
        for (_, target) in n.edges() {
            if !index.contains_key(target) {
                report.push(Violation::DanglingTarget {
                    from: n.name.clone(),
                    target: target.to_owned(),
                });
            }
        }
    }

    report.extend(find_cycles(graph, &index).into_iter().map(Violation::Cycle));

    if let Some(start) = graph
        .nodes
        .iter()
        .position(|n| matches!(n.kind, NodeKind::Start { .. }))
    {
        let mut visited = vec![false; graph.nodes.len()];
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = queue.pop_front() {
            for (_, t) in graph.nodes[i].edges() {
                if let Some(&j) = index.get(t) {
                    if !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        for (i, n) in graph.nodes.iter().enumerate() {
            if !visited[i] && index.get(n.name.as_str()) == Some(&i) {
                report.push(Violation::UnreachableNode(n.name.clone()));
            }
        }
    }

    check_fork_regions(graph, &index, &mut report);
    report
}

/// Cycles found by depth-first search, one per back edge.
fn find_cycles(graph: &WorkflowGraph, index: &HashMap<&str, usize>) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; graph.nodes.len()];
    let mut cycles = Vec::new();

    for root in 0..graph.nodes.len() {
        if marks[root] != Mark::New {
            continue;
        }
        // stack of (node, next edge to explore)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        marks[root] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let edges = graph.nodes[node].edges();
            if *next >= edges.len() {
                marks[node] = Mark::Done;
                stack.pop();
                continue;
            }
            let target = edges[*next].1;
            *next += 1;
            let Some(&t) = index.get(target) else { continue };
            match marks[t] {
                Mark::New => {
                    marks[t] = Mark::Active;
                    stack.push((t, 0));
                }
                Mark::Active => {
                    let pos = stack.iter().position(|&(n, _)| n == t).expect("active node on stack");
                    let mut path: Vec<String> =
                        stack[pos..].iter().map(|&(n, _)| graph.nodes[n].name.clone()).collect();
                    path.push(graph.nodes[t].name.clone());
                    cycles.push(path);
                }
                Mark::Done => {}
            }
        }
    }
    cycles
}

struct RegionWalker<'g> {
    graph: &'g WorkflowGraph,
    index: &'g HashMap<&'g str, usize>,
    open_forks: Vec<usize>,
}

impl RegionWalker<'_> {
    /// Follows success edges from `from` to the join that closes the enclosing
    /// fork region, skipping over properly nested fork/join pairs.
    fn join_reached(&mut self, from: usize) -> Option<usize> {
        let mut current = from;
        let mut steps = 0;
        loop {
            steps += 1;
            if steps > self.graph.nodes.len() {
                return None;
            }
            match &self.graph.nodes[current].kind {
                NodeKind::Action { ok, .. } => current = *self.index.get(ok.as_str())?,
                NodeKind::Join { .. } => return Some(current),
                NodeKind::Fork { .. } => {
                    let inner = self.fork_join(current)?;
                    let NodeKind::Join { to } = &self.graph.nodes[inner].kind else {
                        return None;
                    };
                    current = *self.index.get(to.as_str())?;
                }
                NodeKind::Start { .. } | NodeKind::Kill | NodeKind::End => return None,
            }
        }
    }

    /// The single join all paths of `fork` converge on.
    fn fork_join(&mut self, fork: usize) -> Option<usize> {
        if self.open_forks.contains(&fork) {
            return None;
        }
        let NodeKind::Fork { paths } = &self.graph.nodes[fork].kind else {
            return None;
        };
        if paths.is_empty() {
            return None;
        }
        self.open_forks.push(fork);
        let mut joins = paths
            .iter()
            .map(|p| self.index.get(p.as_str()).and_then(|&i| self.join_reached(i)));
        let first = joins.next().flatten();
        let all_same = joins.all(|j| j.is_some() && j == first);
        self.open_forks.pop();
        if all_same {
            first
        } else {
            None
        }
    }
}

fn check_fork_regions(graph: &WorkflowGraph, index: &HashMap<&str, usize>, report: &mut Vec<Violation>) {
    let mut walker = RegionWalker {
        graph,
        index,
        open_forks: Vec::new(),
    };
    let mut claimed: BTreeMap<usize, usize> = BTreeMap::new();

    for (i, n) in graph.nodes.iter().enumerate() {
        let NodeKind::Fork { paths } = &n.kind else { continue };
        if index.get(n.name.as_str()) != Some(&i) {
            continue;
        }
        match walker.fork_join(i) {
            Some(j) => *claimed.entry(j).or_default() += paths.len(),
            None => report.push(Violation::ForkWithoutJoin(n.name.clone())),
        }
    }

    let mut fan_in: HashMap<usize, usize> = HashMap::new();
    for n in &graph.nodes {
        for t in n.success_edges() {
            if let Some(&j) = index.get(t) {
                *fan_in.entry(j).or_default() += 1;
            }
        }
    }

    for (i, n) in graph.nodes.iter().enumerate() {
        if !matches!(n.kind, NodeKind::Join { .. }) || index.get(n.name.as_str()) != Some(&i) {
            continue;
        }
        let actual = fan_in.get(&i).copied().unwrap_or(0);
        match claimed.get(&i) {
            Some(&expected) if expected != actual => report.push(Violation::JoinFanInMismatch {
                join: n.name.clone(),
                expected,
                actual,
            }),
            Some(_) => {}
            None => report.push(Violation::OrphanJoin(n.name.clone())),
        }
    }
}
