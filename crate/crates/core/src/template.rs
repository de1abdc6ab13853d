//! Reading annotated workflow templates.
//!
//! A template is ordinary text interleaved with blocks delimited by
//! `# BEG:<KIND> <attrs>` and `# END:<KIND>` marker lines. Everything outside a
//! block is kept verbatim so that the document can be reassembled exactly.

use std::fmt;

use thiserror::Error;

/// The three block kinds understood by the compiler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Action,
    Replace,
    ForkMerge,
}

impl BlockKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BlockKind::Action => "ACTION",
            BlockKind::Replace => "REPLACE",
            BlockKind::ForkMerge => "FORK_MERGE",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "ACTION" => Some(BlockKind::Action),
            "REPLACE" => Some(BlockKind::Replace),
            "FORK_MERGE" => Some(BlockKind::ForkMerge),
            _ => None,
        }
    }

    /// Attribute keys required on the opening marker, in canonical order.
    fn required_keys(self) -> &'static [&'static str] {
        match self {
            BlockKind::Action => &["name", "ok", "error"],
            BlockKind::ForkMerge => &["name", "node_after_join", "error"],
            BlockKind::Replace => &["placeholder"],
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {start_line}: {kind} block is never closed")]
    UnterminatedBlock { kind: BlockKind, start_line: usize },
    #[error("line {line}: END:{kind} without an open {kind} block")]
    UnexpectedEnd { kind: BlockKind, line: usize },
    #[error("line {line}: block markers cannot be nested")]
    NestedBlock { line: usize },
    #[error("line {line}: bad attributes for {kind} block: {detail}")]
    BadAttributes {
        kind: BlockKind,
        line: usize,
        detail: String,
    },
    #[error("line {line}: unknown block kind `{keyword}`")]
    UnknownKind { keyword: String, line: usize },
}

impl TemplateError {
    pub fn line(&self) -> usize {
        match self {
            TemplateError::UnterminatedBlock { start_line, .. } => *start_line,
            TemplateError::UnexpectedEnd { line, .. }
            | TemplateError::NestedBlock { line }
            | TemplateError::BadAttributes { line, .. }
            | TemplateError::UnknownKind { line, .. } => *line,
        }
    }
}

/// A parsed block: header attributes, body lines and the raw source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub attributes: Vec<(String, String)>,
    /// Body lines without their line terminators.
    pub body: Vec<String>,
    /// 1-based line numbers of the BEG and END markers.
    pub span: (usize, usize),
    raw: String,
}

impl Block {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// The `name` attribute for ACTION and FORK_MERGE blocks, the placeholder for REPLACE.
    pub fn name(&self) -> &str {
        match self.kind {
            BlockKind::Replace => self.attr("placeholder").unwrap_or_default(),
            _ => self.attr("name").unwrap_or_default(),
        }
    }

    /// Source line number of body line `index`.
    pub fn body_line_number(&self, index: usize) -> usize {
        self.span.0 + 1 + index
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Passthrough(String),
    Block(Block),
}

impl Segment {
    pub fn raw(&self) -> &str {
        match self {
            Segment::Passthrough(text) => text,
            Segment::Block(block) => block.raw(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateDocument {
    pub source_name: String,
    pub segments: Vec<Segment>,
}

impl TemplateDocument {
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Block(b) => Some(b),
            Segment::Passthrough(_) => None,
        })
    }

    /// Reassembles the (newline-normalized) source text.
    pub fn to_source(&self) -> String {
        self.segments.iter().map(Segment::raw).collect()
    }
}

enum Marker<'a> {
    Begin(&'a str, &'a str),
    End(&'a str, &'a str),
}

fn marker(line: &str) -> Option<Marker<'_>> {
    let rest = line.trim().strip_prefix('#')?.trim_start();
    let (is_begin, rest) = match rest.strip_prefix("BEG:") {
        Some(r) => (true, r),
        None => (false, rest.strip_prefix("END:")?),
    };
    let (keyword, attrs) = match rest.find(char::is_whitespace) {
        Some(i) => (&rest[..i], rest[i..].trim()),
        None => (rest, ""),
    };
    Some(if is_begin {
        Marker::Begin(keyword, attrs)
    } else {
        Marker::End(keyword, attrs)
    })
}

/// True when `s` has the `@IDENT@` shape used by placeholders.
pub fn is_placeholder(s: &str) -> bool {
    s.len() > 2
        && s.starts_with('@')
        && s.ends_with('@')
        && s[1..s.len() - 1]
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn parse_attributes(
    kind: BlockKind,
    text: &str,
    line: usize,
) -> Result<Vec<(String, String)>, TemplateError> {
    let bad = |detail: String| TemplateError::BadAttributes { kind, line, detail };
    let tokens: Vec<&str> = text.split_whitespace().collect();

    if kind == BlockKind::Replace {
        return match tokens.as_slice() {
            [p] if is_placeholder(p) => Ok(vec![("placeholder".to_owned(), (*p).to_owned())]),
            [p] => Err(bad(format!("`{p}` is not a placeholder of the form @NAME@"))),
            _ => Err(bad(format!(
                "expected exactly one placeholder, found {} tokens",
                tokens.len()
            ))),
        };
    }

    let mut attrs: Vec<(String, String)> = Vec::with_capacity(tokens.len());
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| bad(format!("`{token}` is not a key=value pair")))?;
        if value.is_empty() {
            return Err(bad(format!("empty value for `{key}`")));
        }
        if attrs.iter().any(|(k, _)| k == key) {
            return Err(bad(format!("duplicate key `{key}`")));
        }
        attrs.push((key.to_owned(), value.to_owned()));
    }

    let required = kind.required_keys();
    for key in required {
        if !attrs.iter().any(|(k, _)| k == key) {
            return Err(bad(format!("missing `{key}`")));
        }
    }
    if let Some((extra, _)) = attrs.iter().find(|(k, _)| !required.contains(&k.as_str())) {
        return Err(bad(format!("unexpected key `{extra}`")));
    }
    Ok(attrs)
}

struct OpenBlock {
    kind: BlockKind,
    attributes: Vec<(String, String)>,
    start_line: usize,
    body: Vec<String>,
    raw: String,
}

/// Parses template text into passthrough segments and blocks.
///
/// `\r\n` line endings are normalized to `\n` before parsing.
pub fn parse_template(source_text: &str, source_name: &str) -> Result<TemplateDocument, TemplateError> {
    let normalized;
    let text = if source_text.contains('\r') {
        normalized = source_text.replace("\r\n", "\n");
        normalized.as_str()
    } else {
        source_text
    };

    let mut segments = Vec::new();
    let mut passthrough = String::new();
    let mut open: Option<OpenBlock> = None;

    for (idx, raw_line) in text.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\n').unwrap_or(raw_line);

        match (marker(line), open.as_mut()) {
            (Some(Marker::Begin(keyword, attrs)), None) => {
                let kind = BlockKind::from_keyword(keyword).ok_or_else(|| {
                    TemplateError::UnknownKind {
                        keyword: keyword.to_owned(),
                        line: line_no,
                    }
                })?;
                let attributes = parse_attributes(kind, attrs, line_no)?;
                if !passthrough.is_empty() {
                    segments.push(Segment::Passthrough(std::mem::take(&mut passthrough)));
                }
                open = Some(OpenBlock {
                    kind,
                    attributes,
                    start_line: line_no,
                    body: Vec::new(),
                    raw: raw_line.to_owned(),
                });
            }
            (Some(Marker::Begin(..)), Some(_)) => {
                return Err(TemplateError::NestedBlock { line: line_no });
            }
            (Some(Marker::End(keyword, attrs)), current) => {
                let kind = BlockKind::from_keyword(keyword).ok_or_else(|| {
                    TemplateError::UnknownKind {
                        keyword: keyword.to_owned(),
                        line: line_no,
                    }
                })?;
                match current {
                    Some(block) if block.kind == kind => {
                        if !attrs.is_empty() {
                            return Err(TemplateError::BadAttributes {
                                kind,
                                line: line_no,
                                detail: "END marker takes no attributes".to_owned(),
                            });
                        }
                        let mut block = open.take().expect("open block");
                        block.raw.push_str(raw_line);
                        segments.push(Segment::Block(Block {
                            kind: block.kind,
                            attributes: block.attributes,
                            body: block.body,
                            span: (block.start_line, line_no),
                            raw: block.raw,
                        }));
                    }
                    _ => return Err(TemplateError::UnexpectedEnd { kind, line: line_no }),
                }
            }
            (None, Some(block)) => {
                block.body.push(line.to_owned());
                block.raw.push_str(raw_line);
            }
            (None, None) => passthrough.push_str(raw_line),
        }
    }

    if let Some(block) = open {
        return Err(TemplateError::UnterminatedBlock {
            kind: block.kind,
            start_line: block.start_line,
        });
    }
    if !passthrough.is_empty() {
        segments.push(Segment::Passthrough(passthrough));
    }

    Ok(TemplateDocument {
        source_name: source_name.to_owned(),
        segments,
    })
}
