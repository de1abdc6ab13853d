//! Assembling expanded nodes into a `workflow-app` document and checking it.

mod dry_run;
mod graph;
mod validate;

use std::collections::BTreeMap;

use roxmltree::Document;
use thiserror::Error;

pub use dry_run::{dry_run, TraceEvent};
pub use graph::{EdgeKind, Node, NodeKind, WorkflowGraph, START_NODE};
pub use validate::{validate_graph, Violation};

use crate::expand::ExpandedNodeSet;
use crate::template::{BlockKind, Segment, TemplateDocument};
use crate::xml::reindent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("no expansion supplied for {kind} block `{name}` (line {line})")]
    MissingExpansion {
        kind: BlockKind,
        name: String,
        line: usize,
    },
    #[error("{0} expansions supplied but not used")]
    UnusedExpansions(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmitStats {
    pub line_count: usize,
    pub non_blank_lines: usize,
    /// Node counts keyed by kind label (`action`, `fork`, ...).
    pub node_counts: BTreeMap<&'static str, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedWorkflow {
    pub xml_text: String,
    pub graph: WorkflowGraph,
    pub stats: EmitStats,
}

pub fn non_blank_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

/// Replaces every ACTION / FORK_MERGE block with its expansion, drops REPLACE
/// blocks, and keeps passthrough text verbatim.
///
/// `expanded` holds one entry per ACTION / FORK_MERGE block, in document order.
/// Generated nodes are written one indentation level below the root.
pub fn emit_workflow(doc: &TemplateDocument, expanded: &[ExpandedNodeSet]) -> Result<EmittedWorkflow, EmitError> {
    let mut xml_text = String::new();
    let mut sets = expanded.iter();

    for segment in &doc.segments {
        match segment {
            Segment::Passthrough(text) => xml_text.push_str(text),
            Segment::Block(block) if block.kind == BlockKind::Replace => {}
            Segment::Block(block) => {
                let set = sets.next().ok_or_else(|| EmitError::MissingExpansion {
                    kind: block.kind,
                    name: block.name().to_owned(),
                    line: block.span.0,
                })?;
                for node in &set.nodes {
                    let text = reindent(&node.xml, 1).map_err(|e| {
                        EmitError::XmlMalformed(format!(
                            "node `{}` from {} block `{}` (line {}): {e}",
                            node.name,
                            block.kind,
                            block.name(),
                            block.span.0
                        ))
                    })?;
                    xml_text.push_str(&text);
                }
            }
        }
    }
    let unused = sets.count();
    if unused > 0 {
        return Err(EmitError::UnusedExpansions(unused));
    }

    let graph = {
        let parsed = Document::parse(&xml_text).map_err(|e| EmitError::XmlMalformed(e.to_string()))?;
        WorkflowGraph::from_document(&parsed)?
    };

    let mut node_counts = BTreeMap::new();
    for n in &graph.nodes {
        *node_counts.entry(n.kind.label()).or_insert(0) += 1;
    }
    let stats = EmitStats {
        line_count: xml_text.lines().count(),
        non_blank_lines: non_blank_lines(&xml_text),
        node_counts,
    };
    Ok(EmittedWorkflow { xml_text, graph, stats })
}
