//! The experiment configuration file.
//!
//! ```text
//! # comment
//! project = docclassif
//! storage_root = /data/experiments
//! scripts = /home/me/chrum/scripts
//! server = oozie.local:11000
//! folder lib <- /usr/lib/pig/pig-0.9.2-cdh4.0.1.jar
//! folder pig <- ./pig
//! ```

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("line {line}: `{value}` is not a valid port")]
    BadPort { value: String, line: usize },
    #[error("line {line}: key `{key}` given more than once")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: cannot parse `{text}`")]
    Malformed { text: String, line: usize },
    #[error("project name `{0}` must be non-empty and contain no path separators")]
    InvalidProject(String),
    #[error("line {line}: invalid folder name `{name}`")]
    InvalidFolder { name: String, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FolderMapping {
    pub name: String,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrumConfig {
    pub project: String,
    /// Root of the storage side (stands in for the HDFS location).
    pub storage_root: PathBuf,
    pub trigger_scripts_path: PathBuf,
    pub server_address: String,
    pub server_port: u16,
    pub folder_mappings: Vec<FolderMapping>,
}

impl ChrumConfig {
    pub fn server(&self) -> String {
        format!("{}:{}", self.server_address, self.server_port)
    }
}

/// Names the storage layout already uses for generated content.
const RESERVED_FOLDERS: &[&str] = &["results", "workflow.xml"];

fn valid_component(name: &str) -> bool {
    !name.is_empty() && name != "." && name != ".." && !name.contains(['/', '\\'])
}

pub fn parse_config(text: &str) -> Result<ChrumConfig, ConfigError> {
    let mut project = None;
    let mut storage_root = None;
    let mut scripts = None;
    let mut server: Option<(String, u16)> = None;
    let mut folders: Vec<FolderMapping> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || ConfigError::Malformed {
            text: line.to_owned(),
            line: line_no,
        };

        if let Some(rest) = line.strip_prefix("folder").filter(|r| r.starts_with(char::is_whitespace)) {
            let (name, source) = rest.split_once("<-").ok_or_else(malformed)?;
            let (name, source) = (name.trim(), source.trim());
            if source.is_empty() {
                return Err(malformed());
            }
            if !valid_component(name) || RESERVED_FOLDERS.contains(&name) {
                return Err(ConfigError::InvalidFolder {
                    name: name.to_owned(),
                    line: line_no,
                });
            }
            if folders.iter().any(|f| f.name == name) {
                return Err(ConfigError::DuplicateKey {
                    key: format!("folder {name}"),
                    line: line_no,
                });
            }
            folders.push(FolderMapping {
                name: name.to_owned(),
                source: PathBuf::from(source),
            });
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(malformed)?;
        let (key, value) = (key.trim(), value.trim());
        let duplicate = || ConfigError::DuplicateKey {
            key: key.to_owned(),
            line: line_no,
        };
        match key {
            "project" => {
                if project.replace(value.to_owned()).is_some() {
                    return Err(duplicate());
                }
            }
            "storage_root" => {
                if storage_root.replace(PathBuf::from(value)).is_some() {
                    return Err(duplicate());
                }
            }
            "scripts" => {
                if scripts.replace(PathBuf::from(value)).is_some() {
                    return Err(duplicate());
                }
            }
            "server" => {
                let (host, port) = value.rsplit_once(':').ok_or_else(|| ConfigError::BadPort {
                    value: value.to_owned(),
                    line: line_no,
                })?;
                let port = port.parse::<u16>().ok().filter(|p| *p != 0).ok_or_else(|| {
                    ConfigError::BadPort {
                        value: port.to_owned(),
                        line: line_no,
                    }
                })?;
                if host.is_empty() {
                    return Err(malformed());
                }
                if server.replace((host.to_owned(), port)).is_some() {
                    return Err(duplicate());
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_owned(),
                    line: line_no,
                })
            }
        }
    }

    let project = project.ok_or_else(|| ConfigError::MissingKey("project".into()))?;
    if !valid_component(&project) {
        return Err(ConfigError::InvalidProject(project));
    }
    let storage_root = storage_root.ok_or_else(|| ConfigError::MissingKey("storage_root".into()))?;
    let trigger_scripts_path = scripts.ok_or_else(|| ConfigError::MissingKey("scripts".into()))?;
    let (server_address, server_port) = server.ok_or_else(|| ConfigError::MissingKey("server".into()))?;

    Ok(ChrumConfig {
        project,
        storage_root,
        trigger_scripts_path,
        server_address,
        server_port,
        folder_mappings: folders,
    })
}
