//! Macro expansion: REPLACE substitution, idioms and ACTION / FORK_MERGE blocks.

mod blocks;
mod idiom;
mod replace;

use std::fmt;

use thiserror::Error;

pub use blocks::{expand_action, expand_fork_merge, parse_axes, Axis, ExpandedNode, ExpandedNodeSet};
pub use idiom::{eval_seq, IdiomError, IdiomFn, IdiomRegistry};
pub use replace::{build_replace_table, resolve_text, resolve_text_with_axes, ReplaceEntry, ReplaceTable};

/// Where in the template an expansion error was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    /// Human readable context such as `ACTION docs2neigh_01` or `REPLACE @WF-1@`.
    pub context: String,
    /// 1-based source line, when known.
    pub line: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line} ({})", self.context),
            None => f.write_str(&self.context),
        }
    }
}

fn cycle_display(path: &[String]) -> String {
    path.iter()
        .map(|p| format!("@{p}@"))
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("placeholder @{name}@ is defined twice (lines {first_line} and {second_line})")]
    DuplicateReplace {
        name: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("substitution cycle: {}", cycle_display(path))]
    SubstitutionCycle { path: Vec<String> },
    #[error("{location}: unknown placeholder @{name}@")]
    UnknownPlaceholder { name: String, location: Location },
    #[error("{location}: unknown idiom `{name}`")]
    UnknownIdiom { name: String, location: Location },
    #[error("{location}: property `{name}` used in idiom arguments has no value")]
    UnresolvedPropertyInIdiom { name: String, location: Location },
    #[error("{location}: idiom argument `{token}` is not an integer")]
    NonIntegerIdiomArg { token: String, location: Location },
    #[error("{location}: idiom `{name}`: {source}")]
    Idiom {
        name: String,
        location: Location,
        source: IdiomError,
    },
    #[error("{location}: axis @{name}@ is declared twice")]
    DuplicateAxis { name: String, location: Location },
    #[error("{location}: axis @{name}@ has the same name as a REPLACE placeholder")]
    AxisShadowsReplace { name: String, location: Location },
    #[error("{location}: {count} combinations exceeds the fan-out limit of {limit}")]
    FanOutTooLarge {
        count: u128,
        limit: usize,
        location: Location,
    },
    #[error("expected a {expected} block, got {found}")]
    WrongBlockKind {
        expected: crate::template::BlockKind,
        found: crate::template::BlockKind,
    },
}

impl ExpandError {
    pub fn location(&self) -> Option<&Location> {
        match self {
            ExpandError::UnknownPlaceholder { location, .. }
            | ExpandError::UnknownIdiom { location, .. }
            | ExpandError::UnresolvedPropertyInIdiom { location, .. }
            | ExpandError::NonIntegerIdiomArg { location, .. }
            | ExpandError::Idiom { location, .. }
            | ExpandError::DuplicateAxis { location, .. }
            | ExpandError::AxisShadowsReplace { location, .. }
            | ExpandError::FanOutTooLarge { location, .. } => Some(location),
            _ => None,
        }
    }
}

/// Context used to attach locations to errors raised while expanding a run of lines.
#[derive(Debug, Clone)]
pub(crate) struct Origin {
    pub context: String,
    /// Source line of the first line in the run.
    pub first_line: Option<usize>,
}

impl Origin {
    pub fn new(context: impl Into<String>, first_line: Option<usize>) -> Self {
        Self {
            context: context.into(),
            first_line,
        }
    }

    pub fn at(&self, index: usize) -> Location {
        Location {
            context: self.context.clone(),
            line: self.first_line.map(|l| l + index),
        }
    }
}
