use std::sync::LazyLock;

use regex::Regex;

use super::replace::{Resolver, PLACEHOLDER};
use super::{ExpandError, IdiomRegistry, Origin, ReplaceTable};
use crate::properties::PropertySet;
use crate::template::{is_placeholder, Block, BlockKind};
use crate::xml::escape_attr;

/// Upper bound on the combinations a single FORK_MERGE block may produce.
pub const MAX_FAN_OUT: usize = 100_000;

static IDIOM_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z_][A-Za-z0-9_]*)\(([^()]*)\)$").expect("idiom regex"));
static PROPERTY_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$\{([^}]*)\}").expect("property regex"));

/// One FORK_MERGE parameter axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    /// Name without the surrounding `@`.
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedNode {
    pub name: String,
    pub xml: String,
}

/// Workflow nodes produced from one block, plus how the block connects to the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedNodeSet {
    pub nodes: Vec<ExpandedNode>,
    pub entry_name: String,
    pub ok_target: String,
    pub error_target: String,
}

impl ExpandedNodeSet {
    pub fn action_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.xml.trim_start().starts_with("<action"))
            .count()
    }
}

fn axis_line(line: &str) -> Option<(&str, &str)> {
    let trimmed = line.trim();
    let first = trimmed.split_whitespace().next()?;
    if !is_placeholder(first) {
        return None;
    }
    let rest = trimmed[first.len()..].trim();
    (!rest.is_empty()).then(|| (&first[1..first.len() - 1], rest))
}

fn axis_prefix_len(body: &[String]) -> usize {
    body.iter().take_while(|l| axis_line(l).is_some()).count()
}

/// Parses the axis declarations at the head of a FORK_MERGE body.
///
/// Only the leading run of `@name@ value...` lines is considered. A value list that
/// is a single `idiom(args)` call is evaluated; `${prop}` references in its
/// arguments are looked up in `properties`.
pub fn parse_axes(
    body: &[String],
    properties: &PropertySet,
    idioms: &IdiomRegistry,
) -> Result<Vec<Axis>, ExpandError> {
    parse_axes_at(body, properties, idioms, &Origin::new("FORK_MERGE axes", Some(1)))
}

fn parse_axes_at(
    body: &[String],
    properties: &PropertySet,
    idioms: &IdiomRegistry,
    origin: &Origin,
) -> Result<Vec<Axis>, ExpandError> {
    let mut axes: Vec<Axis> = Vec::new();
    for (i, line) in body.iter().enumerate() {
        let Some((name, rest)) = axis_line(line) else {
            break;
        };
        if axes.iter().any(|a| a.name == name) {
            return Err(ExpandError::DuplicateAxis {
                name: name.to_owned(),
                location: origin.at(i),
            });
        }
        let values = match IDIOM_CALL.captures(rest) {
            Some(call) => eval_idiom(&call[1], &call[2], properties, idioms, origin, i)?,
            None => rest.split_whitespace().map(str::to_owned).collect(),
        };
        axes.push(Axis {
            name: name.to_owned(),
            values,
        });
    }
    Ok(axes)
}

fn eval_idiom(
    name: &str,
    raw_args: &str,
    properties: &PropertySet,
    idioms: &IdiomRegistry,
    origin: &Origin,
    index: usize,
) -> Result<Vec<String>, ExpandError> {
    let rule = idioms.get(name).ok_or_else(|| ExpandError::UnknownIdiom {
        name: name.to_owned(),
        location: origin.at(index),
    })?;

    let mut args = Vec::new();
    if !raw_args.trim().is_empty() {
        for raw in raw_args.split(',') {
            let mut unresolved = None;
            let substituted = PROPERTY_REF.replace_all(raw.trim(), |caps: &regex::Captures| {
                let key = &caps[1];
                match properties.single(key) {
                    Some(v) => v.to_owned(),
                    None => {
                        unresolved.get_or_insert_with(|| key.to_owned());
                        String::new()
                    }
                }
            });
            if let Some(key) = unresolved {
                return Err(ExpandError::UnresolvedPropertyInIdiom {
                    name: key,
                    location: origin.at(index),
                });
            }
            let value = substituted.trim().parse::<i64>().map_err(|_| {
                ExpandError::NonIntegerIdiomArg {
                    token: substituted.trim().to_owned(),
                    location: origin.at(index),
                }
            })?;
            args.push(value);
        }
    }
    rule(&args).map_err(|source| ExpandError::Idiom {
        name: name.to_owned(),
        location: origin.at(index),
        source,
    })
}

fn action_xml(name: &str, body: &[String], ok: &str, error: &str) -> String {
    let mut xml = format!("<action name='{}'>\n", escape_attr(name));
    for line in body {
        xml.push_str(line);
        xml.push('\n');
    }
    xml.push_str(&format!(
        "<ok to='{}'/>\n<error to='{}'/>\n</action>",
        escape_attr(ok),
        escape_attr(error)
    ));
    xml
}

fn block_origin(block: &Block) -> Origin {
    Origin::new(
        format!("{} {}", block.kind, block.name()),
        Some(block.body_line_number(0)),
    )
}

/// Expands an ACTION block into a single action node.
pub fn expand_action(block: &Block, table: &ReplaceTable) -> Result<ExpandedNodeSet, ExpandError> {
    if block.kind != BlockKind::Action {
        return Err(ExpandError::WrongBlockKind {
            expected: BlockKind::Action,
            found: block.kind,
        });
    }
    let name = block.name();
    let ok = block.attr("ok").unwrap_or_default();
    let error = block.attr("error").unwrap_or_default();
    let body = Resolver::new(table, &[]).resolve_lines(&block.body, &block_origin(block))?;

    Ok(ExpandedNodeSet {
        nodes: vec![ExpandedNode {
            name: name.to_owned(),
            xml: action_xml(name, &body, ok, error),
        }],
        entry_name: name.to_owned(),
        ok_target: ok.to_owned(),
        error_target: error.to_owned(),
    })
}

/// Replaces axis placeholders in one pass; substituted values are not rescanned.
fn substitute_axes(line: &str, axes: &[Axis], choice: &[usize]) -> String {
    PLACEHOLDER
        .replace_all(line, |caps: &regex::Captures| {
            match axes.iter().position(|a| a.name == caps[1]) {
                Some(i) => axes[i].values[choice[i]].clone(),
                None => caps[0].to_owned(),
            }
        })
        .into_owned()
}

/// Expands a FORK_MERGE block into a fork, one action per axis combination and a join.
///
/// Combinations are enumerated row-major with the first declared axis varying
/// slowest; action `k` is named `NAME-k`. A single combination collapses to one
/// plain action named `NAME`.
pub fn expand_fork_merge(
    block: &Block,
    table: &ReplaceTable,
    properties: &PropertySet,
    idioms: &IdiomRegistry,
) -> Result<ExpandedNodeSet, ExpandError> {
    if block.kind != BlockKind::ForkMerge {
        return Err(ExpandError::WrongBlockKind {
            expected: BlockKind::ForkMerge,
            found: block.kind,
        });
    }
    let name = block.name();
    let after_join = block.attr("node_after_join").unwrap_or_default();
    let error = block.attr("error").unwrap_or_default();
    let origin = block_origin(block);

    let prefix = axis_prefix_len(&block.body);
    let axes = parse_axes_at(&block.body[..prefix], properties, idioms, &origin)?;
    if let Some((i, axis)) = axes.iter().enumerate().find(|(_, a)| table.contains(&a.name)) {
        return Err(ExpandError::AxisShadowsReplace {
            name: axis.name.clone(),
            location: origin.at(i),
        });
    }

    let count = axes.iter().map(|a| a.values.len() as u128).product::<u128>();
    if count > MAX_FAN_OUT as u128 {
        return Err(ExpandError::FanOutTooLarge {
            count,
            limit: MAX_FAN_OUT,
            location: origin.at(0),
        });
    }
    let count = count as usize;

    let axis_names: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    let body_origin = Origin::new(origin.context.clone(), origin.first_line.map(|l| l + prefix));
    let template = Resolver::new(table, &axis_names).resolve_lines(&block.body[prefix..], &body_origin)?;

    let render = |k: usize| -> Vec<String> {
        let mut choice = vec![0; axes.len()];
        let mut rem = k;
        for (slot, axis) in choice.iter_mut().zip(&axes).rev() {
            *slot = rem % axis.values.len();
            rem /= axis.values.len();
        }
        template.iter().map(|l| substitute_axes(l, &axes, &choice)).collect()
    };

    if count == 1 {
        return Ok(ExpandedNodeSet {
            nodes: vec![ExpandedNode {
                name: name.to_owned(),
                xml: action_xml(name, &render(0), after_join, error),
            }],
            entry_name: name.to_owned(),
            ok_target: after_join.to_owned(),
            error_target: error.to_owned(),
        });
    }

    let join_name = format!("{name}-join");
    let mut fork = format!("<fork name='{}'>\n", escape_attr(name));
    for k in 0..count {
        fork.push_str(&format!("    <path start='{}'/>\n", escape_attr(&format!("{name}-{k}"))));
    }
    fork.push_str("</fork>");

    let mut nodes = Vec::with_capacity(count + 2);
    nodes.push(ExpandedNode {
        name: name.to_owned(),
        xml: fork,
    });
    for k in 0..count {
        let action_name = format!("{name}-{k}");
        let xml = action_xml(&action_name, &render(k), &join_name, error);
        nodes.push(ExpandedNode { name: action_name, xml });
    }
    nodes.push(ExpandedNode {
        xml: format!(
            "<join name='{}' to='{}'/>",
            escape_attr(&join_name),
            escape_attr(after_join)
        ),
        name: join_name,
    });

    Ok(ExpandedNodeSet {
        nodes,
        entry_name: name.to_owned(),
        ok_target: after_join.to_owned(),
        error_target: error.to_owned(),
    })
}
