//! Storage backends for the experiment tree.
//!
//! Paths handed to a backend are relative to its root. [`LocalStorage`] maps
//! them onto a directory of the local filesystem.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

pub trait StorageBackend: Send + Sync {
    /// Absolute location of `rel` as it should be given to the workflow server.
    fn location(&self, rel: &Path) -> String;
    fn create_dir_all(&self, rel: &Path) -> io::Result<()>;
    fn write_file(&self, rel: &Path, contents: &[u8]) -> io::Result<()>;
    /// Copies a local file or directory tree into directory `rel`. A file keeps
    /// its file name; a directory contributes its contents. Returns the number
    /// of files written.
    fn copy_in(&self, source: &Path, rel: &Path) -> io::Result<usize>;
    fn exists(&self, rel: &Path) -> bool;
}

#[derive(Debug, Clone)]
pub struct LocalStorage {
    root: PathBuf,
}

impl LocalStorage {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }
}

impl StorageBackend for LocalStorage {
    fn location(&self, rel: &Path) -> String {
        self.resolve(rel).display().to_string()
    }

    fn create_dir_all(&self, rel: &Path) -> io::Result<()> {
        fs::create_dir_all(self.resolve(rel))
    }

    fn write_file(&self, rel: &Path, contents: &[u8]) -> io::Result<()> {
        let path = self.resolve(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)
    }

    fn copy_in(&self, source: &Path, rel: &Path) -> io::Result<usize> {
        let dest = self.resolve(rel);
        fs::create_dir_all(&dest)?;
        if source.is_file() {
            let name = source
                .file_name()
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "source has no file name"))?;
            fs::copy(source, dest.join(name))?;
            return Ok(1);
        }

        let mut copied = 0;
        for entry in WalkDir::new(source).follow_links(true).sort_by_file_name() {
            let entry = entry.map_err(io::Error::other)?;
            let relative = entry
                .path()
                .strip_prefix(source)
                .expect("walkdir yields paths under its root");
            let target = dest.join(relative);
            if entry.file_type().is_dir() {
                fs::create_dir_all(&target)?;
            } else {
                fs::copy(entry.path(), &target)?;
                copied += 1;
            }
        }
        Ok(copied)
    }

    fn exists(&self, rel: &Path) -> bool {
        self.resolve(rel).exists()
    }
}
