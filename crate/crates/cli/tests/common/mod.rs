#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use chrum_cli::{run, Cli};
use clap::Parser;

pub const CLOCK: &str = "2013-05-01T12:00:00Z";
pub const STAMP: &str = "20130501-120000";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub struct Outcome {
    pub code: u8,
    pub out: String,
    pub err: String,
}

/// Runs the CLI in-process.
pub fn chrum(args: &[&str]) -> Outcome {
    let mut argv = vec!["chrum"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).expect("arguments parse");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&cli, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// A scratch experiment: config, properties and output roots in one temp dir.
pub struct Scratch {
    pub dir: tempfile::TempDir,
}

impl Scratch {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn write(&self, rel: &str, text: &str) -> PathBuf {
        let p = self.path(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, text).unwrap();
        p
    }

    pub fn config(&self, server: &str) -> PathBuf {
        let lib = self.write("src/lib/pig-udfs.jar", "jar");
        self.write(
            "chrum.conf",
            &format!(
                "project = docclassif\nstorage_root = {}\nscripts = {}\nserver = {server}\nfolder lib <- {}\n",
                self.path("hdfs").display(),
                self.path("scripts").display(),
                lib.parent().unwrap().display()
            ),
        )
    }

    pub fn local(&self) -> PathBuf {
        self.path("local")
    }

    pub fn storage(&self) -> PathBuf {
        self.path("hdfs")
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn dir_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}
