use std::collections::HashMap;
use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::Regex;

use super::{ExpandError, Origin};
use crate::template::{BlockKind, TemplateDocument};

pub(crate) static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@([A-Za-z0-9_-]+)@").expect("placeholder regex"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaceEntry {
    pub body: Vec<String>,
    /// Line of the BEG marker; `None` for built-in entries.
    pub line: Option<usize>,
}

/// Placeholder name (without the surrounding `@`) to body lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaceTable {
    entries: IndexMap<String, ReplaceEntry>,
    builtins: IndexMap<String, Vec<String>>,
}

impl Default for ReplaceTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ReplaceTable {
    /// A table holding only the built-in `PIG_START` / `PIG_END` entries.
    pub fn new() -> Self {
        let mut builtins = IndexMap::new();
        builtins.insert(
            "PIG_START".to_owned(),
            vec![
                "<pig>".to_owned(),
                "    <job-tracker>${jobTracker}</job-tracker>".to_owned(),
                "    <name-node>${nameNode}</name-node>".to_owned(),
            ],
        );
        builtins.insert("PIG_END".to_owned(), vec!["</pig>".to_owned()]);
        Self {
            entries: IndexMap::new(),
            builtins,
        }
    }

    /// A table without builtins.
    pub fn bare() -> Self {
        Self {
            entries: IndexMap::new(),
            builtins: IndexMap::new(),
        }
    }

    /// Adds a user entry. Names are given without `@`.
    pub fn insert(
        &mut self,
        name: impl Into<String>,
        body: Vec<String>,
        line: Option<usize>,
    ) -> Result<(), ExpandError> {
        let name = name.into();
        if let Some(existing) = self.entries.get(&name) {
            return Err(ExpandError::DuplicateReplace {
                name,
                first_line: existing.line.unwrap_or(0),
                second_line: line.unwrap_or(0),
            });
        }
        self.entries.insert(name, ReplaceEntry { body, line });
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&[String]> {
        self.entries
            .get(name)
            .map(|e| e.body.as_slice())
            .or_else(|| self.builtins.get(name).map(Vec::as_slice))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn entry(&self, name: &str) -> Option<&ReplaceEntry> {
        self.entries.get(name)
    }

    /// User-defined entries in definition order.
    pub fn user_entries(&self) -> impl Iterator<Item = (&str, &ReplaceEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn builtin_names(&self) -> impl Iterator<Item = &str> {
        self.builtins.keys().map(String::as_str)
    }
}

/// Collects every REPLACE block of the document. Resolution is whole-file, so
/// a placeholder may be used before its definition.
pub fn build_replace_table(doc: &TemplateDocument) -> Result<ReplaceTable, ExpandError> {
    let mut table = ReplaceTable::new();
    for block in doc.blocks().filter(|b| b.kind == BlockKind::Replace) {
        let placeholder = block.name();
        let name = &placeholder[1..placeholder.len() - 1];
        table.insert(name, block.body.clone(), Some(block.span.0))?;
    }
    Ok(table)
}

/// Resolves every placeholder in `lines`; any placeholder not in the table is an error.
pub fn resolve_text(lines: &[String], table: &ReplaceTable) -> Result<Vec<String>, ExpandError> {
    resolve_text_with_axes(lines, table, &[])
}

/// Like [`resolve_text`], but placeholders named in `axes` are left verbatim.
pub fn resolve_text_with_axes(
    lines: &[String],
    table: &ReplaceTable,
    axes: &[String],
) -> Result<Vec<String>, ExpandError> {
    Resolver::new(table, axes).resolve_lines(lines, &Origin::new("text", Some(1)))
}

pub(crate) struct Resolver<'a> {
    table: &'a ReplaceTable,
    axes: &'a [String],
    memo: HashMap<String, Vec<String>>,
    stack: Vec<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(table: &'a ReplaceTable, axes: &'a [String]) -> Self {
        Self {
            table,
            axes,
            memo: HashMap::new(),
            stack: Vec::new(),
        }
    }

    pub fn resolve_lines(
        &mut self,
        lines: &[String],
        origin: &Origin,
    ) -> Result<Vec<String>, ExpandError> {
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            self.resolve_line(line, origin, i, &mut out)?;
        }
        Ok(out)
    }

    /// Substitutes the placeholders of one line. A multi-line body continues on
    /// new lines prefixed with the indentation of the original line.
    fn resolve_line(
        &mut self,
        line: &str,
        origin: &Origin,
        index: usize,
        out: &mut Vec<String>,
    ) -> Result<(), ExpandError> {
        let indent_len = line.len() - line.trim_start().len();
        let indent = &line[..indent_len];

        let mut current = String::new();
        let mut last = 0;
        let mut replaced = false;
        let mut emitted = 0;

        for caps in PLACEHOLDER.captures_iter(line) {
            let whole = caps.get(0).expect("match");
            let name = &caps[1];
            if self.axes.iter().any(|a| a == name) {
                continue;
            }
            let body = self.resolve_entry(name, origin, index)?;
            current.push_str(&line[last..whole.start()]);
            last = whole.end();
            replaced = true;
            let mut body_lines = body.iter();
            if let Some(first) = body_lines.next() {
                current.push_str(first);
            }
            for next in body_lines {
                out.push(std::mem::take(&mut current));
                emitted += 1;
                current.push_str(indent);
                current.push_str(next);
            }
        }
        current.push_str(&line[last..]);

        // A line holding only placeholders with empty bodies disappears.
        if replaced && emitted == 0 && current.trim().is_empty() {
            return Ok(());
        }
        out.push(current);
        Ok(())
    }

    fn resolve_entry(
        &mut self,
        name: &str,
        origin: &Origin,
        index: usize,
    ) -> Result<Vec<String>, ExpandError> {
        if let Some(done) = self.memo.get(name) {
            return Ok(done.clone());
        }
        if let Some(pos) = self.stack.iter().position(|n| n == name) {
            let mut path = self.stack[pos..].to_vec();
            path.push(name.to_owned());
            return Err(ExpandError::SubstitutionCycle { path });
        }
        let body = self
            .table
            .lookup(name)
            .ok_or_else(|| ExpandError::UnknownPlaceholder {
                name: name.to_owned(),
                location: origin.at(index),
            })?;
        let entry_origin = Origin::new(
            format!("REPLACE @{name}@"),
            self.table.entry(name).and_then(|e| e.line).map(|l| l + 1),
        );

        self.stack.push(name.to_owned());
        let resolved = self.resolve_lines(body, &entry_origin);
        self.stack.pop();
        let resolved = resolved?;
        self.memo.insert(name.to_owned(), resolved.clone());
        Ok(resolved)
    }
}
