//! Template-to-workflow pipeline: parse, build the replace table, expand, emit.

use std::fmt;

use thiserror::Error;

use crate::expand::{
    build_replace_table, expand_action, expand_fork_merge, ExpandError, ExpandedNodeSet, IdiomRegistry,
    ReplaceTable,
};
use crate::properties::PropertySet;
use crate::template::{parse_template, BlockKind, TemplateDocument, TemplateError};
use crate::workflow::{emit_workflow, EmitError, EmittedWorkflow};

/// The block being expanded when an error occurred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockContext {
    pub kind: BlockKind,
    pub name: String,
    pub line: usize,
}

impl fmt::Display for BlockContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} block `{}` (line {})", self.kind, self.name, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{}{source}", .block.as_ref().map(|b| format!("in {b}: ")).unwrap_or_default())]
    Expand {
        block: Option<BlockContext>,
        source: ExpandError,
    },
    #[error(transparent)]
    Emit(#[from] EmitError),
}

impl CompileError {
    /// Best-effort source line for diagnostics.
    pub fn line(&self) -> Option<usize> {
        match self {
            CompileError::Template(e) => Some(e.line()),
            CompileError::Expand { block, source } => source
                .location()
                .and_then(|l| l.line)
                .or(match source {
                    ExpandError::DuplicateReplace { second_line, .. } => Some(*second_line),
                    _ => None,
                })
                .or(block.as_ref().map(|b| b.line)),
            CompileError::Emit(_) => None,
        }
    }
}

/// Expands every ACTION and FORK_MERGE block in document order.
pub fn expand_blocks(
    doc: &TemplateDocument,
    table: &ReplaceTable,
    properties: &PropertySet,
    idioms: &IdiomRegistry,
) -> Result<Vec<ExpandedNodeSet>, CompileError> {
    doc.blocks()
        .filter(|b| b.kind != BlockKind::Replace)
        .map(|block| {
            let result = match block.kind {
                BlockKind::Action => expand_action(block, table),
                _ => expand_fork_merge(block, table, properties, idioms),
            };
            result.map_err(|source| CompileError::Expand {
                block: Some(BlockContext {
                    kind: block.kind,
                    name: block.name().to_owned(),
                    line: block.span.0,
                }),
                source,
            })
        })
        .collect()
}

/// Compiles a parsed template against a set of plain properties.
pub fn compile_document(
    doc: &TemplateDocument,
    properties: &PropertySet,
    idioms: &IdiomRegistry,
) -> Result<EmittedWorkflow, CompileError> {
    let table = build_replace_table(doc).map_err(|source| CompileError::Expand { block: None, source })?;
    let expanded = expand_blocks(doc, &table, properties, idioms)?;
    Ok(emit_workflow(doc, &expanded)?)
}

pub fn compile_source(
    source_text: &str,
    source_name: &str,
    properties: &PropertySet,
    idioms: &IdiomRegistry,
) -> Result<EmittedWorkflow, CompileError> {
    let doc = parse_template(source_text, source_name)?;
    compile_document(&doc, properties, idioms)
}
