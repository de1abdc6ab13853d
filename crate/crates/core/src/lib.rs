//! Workflow macro-compiler and experiment manager.
//!
//! Templates annotated with ACTION / REPLACE / FORK_MERGE blocks are expanded
//! into Oozie workflow XML. Multivalued properties files drive parameter
//! sweeps: every combination gets its own flattened properties file, its own
//! directory on the storage side, and can be submitted to an Oozie-style
//! REST endpoint.

pub mod clock;
pub mod compile;
pub mod config;
pub mod experiment;
pub mod expand;
pub mod properties;
pub mod storage;
pub mod submit;
pub mod template;
pub mod workflow;
pub mod xml;

pub use compile::{compile_document, compile_source, expand_blocks, BlockContext, CompileError};
pub use config::{parse_config, ChrumConfig, ConfigError};
pub use expand::{IdiomRegistry, ReplaceTable};
pub use properties::{parse_properties, PropertySet};
pub use template::{parse_template, TemplateDocument};
pub use workflow::{dry_run, emit_workflow, validate_graph, EmittedWorkflow, WorkflowGraph};
