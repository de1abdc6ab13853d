//! Small XML helpers: escaping and re-indentation of generated node fragments.

use std::fmt::Write as _;

use roxmltree::{Document, Node, NodeType};

pub const INDENT: &str = "    ";

/// Escapes a value for a single-quoted attribute.
pub fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn escape_text(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

/// Re-serializes a single-element XML fragment with 4-space indentation,
/// starting at `depth` levels. Every output line ends with `\n`.
pub fn reindent(fragment: &str, depth: usize) -> Result<String, roxmltree::Error> {
    let doc = Document::parse(fragment)?;
    let mut out = String::new();
    write_element(&mut out, doc.root_element(), depth);
    Ok(out)
}

fn qualified_name(node: Node) -> String {
    let tag = node.tag_name();
    match tag.namespace().and_then(|ns| node.lookup_prefix(ns)) {
        Some(prefix) if !prefix.is_empty() => format!("{prefix}:{}", tag.name()),
        _ => tag.name().to_owned(),
    }
}

fn open_tag(node: Node) -> String {
    let mut tag = format!("<{}", qualified_name(node));
    let parent_ns: Vec<_> = node
        .parent_element()
        .map(|p| p.namespaces().map(|n| (n.name(), n.uri())).collect())
        .unwrap_or_default();
    for ns in node.namespaces() {
        if ns.name() == Some("xml") || parent_ns.contains(&(ns.name(), ns.uri())) {
            continue;
        }
        match ns.name() {
            Some(prefix) => write!(tag, " xmlns:{prefix}='{}'", escape_attr(ns.uri())),
            None => write!(tag, " xmlns='{}'", escape_attr(ns.uri())),
        }
        .expect("write to string");
    }
    for attr in node.attributes() {
        let name = match attr.namespace().and_then(|ns| node.lookup_prefix(ns)) {
            Some(prefix) if !prefix.is_empty() => format!("{prefix}:{}", attr.name()),
            _ => attr.name().to_owned(),
        };
        write!(tag, " {name}='{}'", escape_attr(attr.value())).expect("write to string");
    }
    tag
}

fn write_element(out: &mut String, node: Node, depth: usize) {
    let pad = INDENT.repeat(depth);
    let tag = open_tag(node);
    let name = qualified_name(node);

    let children: Vec<Node> = node
        .children()
        .filter(|c| match c.node_type() {
            NodeType::Text => !c.text().unwrap_or_default().trim().is_empty(),
            NodeType::Element | NodeType::Comment => true,
            _ => false,
        })
        .collect();

    if children.is_empty() {
        writeln!(out, "{pad}{tag}/>").expect("write to string");
        return;
    }
    if children.iter().all(|c| c.is_text()) {
        let text: String = node.children().filter_map(|c| c.text()).collect();
        writeln!(out, "{pad}{tag}>{}</{name}>", escape_text(&text)).expect("write to string");
        return;
    }

    writeln!(out, "{pad}{tag}>").expect("write to string");
    for child in children {
        match child.node_type() {
            NodeType::Element => write_element(out, child, depth + 1),
            NodeType::Comment => writeln!(
                out,
                "{pad}{INDENT}<!--{}-->",
                child.text().unwrap_or_default()
            )
            .expect("write to string"),
            _ => writeln!(
                out,
                "{pad}{INDENT}{}",
                escape_text(child.text().unwrap_or_default().trim())
            )
            .expect("write to string"),
        }
    }
    writeln!(out, "{pad}</{name}>").expect("write to string");
}
