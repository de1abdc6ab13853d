use std::collections::HashMap;

use roxmltree::{Document, Node as XmlNode};

use super::EmitError;

/// Synthetic name given to the `<start>` node, which has no name in the XML.
pub const START_NODE: &str = ":start";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Start { to: String },
    Action { ok: String, error: String },
    Fork { paths: Vec<String> },
    Join { to: String },
    Kill,
    End,
}

impl NodeKind {
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Start { .. } => "start",
            NodeKind::Action { .. } => "action",
            NodeKind::Fork { .. } => "fork",
            NodeKind::Join { .. } => "join",
            NodeKind::Kill => "kill",
            NodeKind::End => "end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Ok,
    Error,
    Path,
    To,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(name: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn edges(&self) -> Vec<(EdgeKind, &str)> {
        match &self.kind {
            NodeKind::Start { to } | NodeKind::Join { to } => vec![(EdgeKind::To, to.as_str())],
            NodeKind::Action { ok, error } => {
                vec![(EdgeKind::Ok, ok.as_str()), (EdgeKind::Error, error.as_str())]
            }
            NodeKind::Fork { paths } => paths.iter().map(|p| (EdgeKind::Path, p.as_str())).collect(),
            NodeKind::Kill | NodeKind::End => Vec::new(),
        }
    }

    /// Edges followed when every action succeeds.
    pub fn success_edges(&self) -> impl Iterator<Item = &str> {
        self.edges()
            .into_iter()
            .filter(|(k, _)| *k != EdgeKind::Error)
            .map(|(_, t)| t)
    }

    pub fn edges_mut(&mut self) -> Vec<&mut String> {
        match &mut self.kind {
            NodeKind::Start { to } | NodeKind::Join { to } => vec![to],
            NodeKind::Action { ok, error } => vec![ok, error],
            NodeKind::Fork { paths } => paths.iter_mut().collect(),
            NodeKind::Kill | NodeKind::End => Vec::new(),
        }
    }
}

/// Workflow control-flow graph. Nodes are kept in document order; duplicate
/// names are preserved so that validation can report them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkflowGraph {
    pub nodes: Vec<Node>,
}

impl WorkflowGraph {
    pub fn new(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    /// Index of the first node with `name`.
    pub fn index(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            map.entry(n.name.as_str()).or_insert(i);
        }
        map
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn count(&self, label: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind.label() == label).count()
    }

    pub fn action_names(&self) -> impl Iterator<Item = &str> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Action { .. }))
            .map(|n| n.name.as_str())
    }

    /// Builds the graph from a `workflow-app` document.
    pub fn from_xml(text: &str) -> Result<Self, EmitError> {
        let doc = Document::parse(text).map_err(|e| EmitError::XmlMalformed(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub(crate) fn from_document(doc: &Document) -> Result<Self, EmitError> {
        let root = doc.root_element();
        if root.tag_name().name() != "workflow-app" {
            return Err(EmitError::XmlMalformed(format!(
                "root element is <{}>, expected <workflow-app>",
                root.tag_name().name()
            )));
        }

        let mut nodes = Vec::new();
        for el in root.children().filter(XmlNode::is_element) {
            let kind = match el.tag_name().name() {
                "start" => NodeKind::Start {
                    to: required_attr(el, "to")?,
                },
                "action" => NodeKind::Action {
                    ok: transition(el, "ok")?,
                    error: transition(el, "error")?,
                },
                "fork" => NodeKind::Fork {
                    paths: el
                        .children()
                        .filter(|c| c.has_tag_name("path"))
                        .map(|p| required_attr(p, "start"))
                        .collect::<Result<_, _>>()?,
                },
                "join" => NodeKind::Join {
                    to: required_attr(el, "to")?,
                },
                "kill" => NodeKind::Kill,
                "end" => NodeKind::End,
                // parameters, global, credentials and similar carry no control flow
                _ => continue,
            };
            let name = match kind {
                NodeKind::Start { .. } => START_NODE.to_owned(),
                _ => required_attr(el, "name")?,
            };
            nodes.push(Node { name, kind });
        }
        Ok(Self { nodes })
    }
}

fn required_attr(el: XmlNode, attr: &str) -> Result<String, EmitError> {
    el.attribute(attr).map(str::to_owned).ok_or_else(|| {
        let pos = el.document().text_pos_at(el.range().start);
        EmitError::XmlMalformed(format!(
            "<{}> at line {} is missing attribute `{attr}`",
            el.tag_name().name(),
            pos.row
        ))
    })
}

fn transition(action: XmlNode, which: &str) -> Result<String, EmitError> {
    let el = action.children().find(|c| c.has_tag_name(which)).ok_or_else(|| {
        let pos = action.document().text_pos_at(action.range().start);
        EmitError::XmlMalformed(format!(
            "action `{}` at line {} has no <{which}> transition",
            action.attribute("name").unwrap_or("?"),
            pos.row
        ))
    })?;
    required_attr(el, "to")
}
