//! Experiment planning and materialization.
//!
//! Every combination of multivalued property values becomes one run. A run
//! owns a local directory `LOCAL/PROJECT/COMPILATION_TIME/LABEL` holding its
//! flattened properties file, workflow and submission manifest, and a storage
//! directory `STORAGE/PROJECT/COMPILATION_TIME/LABEL` holding the workflow,
//! configured folders and a `results/` tree.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{timestamp, Clock};
use crate::config::ChrumConfig;
use crate::properties::{PropertySet, PropertyValue};
use crate::storage::StorageBackend;
use crate::workflow::{validate_graph, EmittedWorkflow, Violation};

pub const COMPILATION_TIME: &str = "COMPILATION_TIME";
pub const PARAMETER_COMBINATION: &str = "PARAMETER_COMBINATION";
pub const EXECUTION_TIME: &str = "EXECUTION_TIME";
pub const RESERVED_KEYS: [&str; 3] = [COMPILATION_TIME, PARAMETER_COMBINATION, EXECUTION_TIME];

pub const PROPERTIES_FILE: &str = "job.properties";
pub const MANIFEST_FILE: &str = "submission.json";
pub const WORKFLOW_FILE: &str = "workflow.xml";
pub const RESULTS_DIR: &str = "results";
pub const DEFAULT_LABEL: &str = "default";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("property `{0}` is reserved")]
    ReservedKey(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("folder `{folder}`: source {} does not exist", .path.display())]
    SourceMissing { folder: String, path: PathBuf },
    #[error("workflow for `{label}` is invalid: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidWorkflow { label: String, violations: Vec<Violation> },
    #[error("{workflows} workflows supplied for {runs} runs")]
    WorkflowCountMismatch { runs: usize, workflows: usize },
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> ExperimentError {
    let path = path.into();
    move |source| ExperimentError::Io { path, source }
}

/// One choice of value for every multivalued key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub assignments: Vec<(String, String)>,
    pub label: String,
}

impl Combination {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Replaces every character outside `[A-Za-z0-9._=-]` with `-`.
pub fn sanitize_label_part(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '=' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Cartesian product of the multivalued entries, first declared key varying slowest.
///
/// Labels are `key=value` pairs joined by `_`. If sanitizing makes two labels
/// collide, later ones get a `.N` suffix. Without multivalued keys there is a
/// single combination labelled `default`.
pub fn enumerate_combinations(props: &PropertySet) -> Vec<Combination> {
    let axes: Vec<(&str, &[String])> = props.multis().collect();
    if axes.is_empty() {
        return vec![Combination {
            assignments: Vec::new(),
            label: DEFAULT_LABEL.to_owned(),
        }];
    }

    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut seen = HashSet::with_capacity(total);
    let mut combos = Vec::with_capacity(total);
    for k in 0..total {
        let mut choice = vec![0; axes.len()];
        let mut rem = k;
        for (slot, (_, values)) in choice.iter_mut().zip(&axes).rev() {
            *slot = rem % values.len();
            rem /= values.len();
        }
        let assignments: Vec<(String, String)> = axes
            .iter()
            .zip(&choice)
            .map(|((key, values), &i)| ((*key).to_owned(), values[i].clone()))
            .collect();
        let base = assignments
            .iter()
            .map(|(key, value)| format!("{}={}", sanitize_label_part(key), sanitize_label_part(value)))
            .collect::<Vec<_>>()
            .join("_");
        let mut label = base.clone();
        let mut n = 1;
        while !seen.insert(label.clone()) {
            label = format!("{base}.{n}");
            n += 1;
        }
        combos.push(Combination { assignments, label });
    }
    combos
}

/// Plain properties for one combination: every single entry, and every
/// multivalued entry collapsed to its chosen value, in declaration order.
pub fn flatten(props: &PropertySet, combo: &Combination) -> PropertySet {
    let mut flat = PropertySet::new();
    for (key, value) in props.entries() {
        match value {
            PropertyValue::Single(v) => flat.set_single(key, v.as_str()),
            PropertyValue::Multi(values) => {
                let chosen = combo.get(key).unwrap_or(values[0].as_str());
                flat.set_single(key, chosen);
            }
        }
    }
    flat
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedRun {
    pub combination: Combination,
    pub local_dir: PathBuf,
    pub properties_path: PathBuf,
    /// Storage directory relative to the storage root.
    pub storage_rel: PathBuf,
}

impl PlannedRun {
    pub fn label(&self) -> &str {
        &self.combination.label
    }

    pub fn results_rel(&self) -> PathBuf {
        self.storage_rel.join(RESULTS_DIR)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentPlan {
    pub config: ChrumConfig,
    pub compilation_time: String,
    pub local_root: PathBuf,
    pub runs: Vec<PlannedRun>,
}

impl ExperimentPlan {
    /// Enumerates combinations and assigns their directories. Nothing is written.
    pub fn new(
        config: ChrumConfig,
        props: &PropertySet,
        local_root: impl Into<PathBuf>,
        clock: &dyn Clock,
    ) -> Result<Self, ExperimentError> {
        if let Some(key) = RESERVED_KEYS.iter().find(|k| props.get(k).is_some()) {
            return Err(ExperimentError::ReservedKey((*key).to_owned()));
        }
        let local_root = local_root.into();
        let compilation_time = timestamp(clock);
        let runs = enumerate_combinations(props)
            .into_iter()
            .map(|combination| {
                let tail = Path::new(&config.project)
                    .join(&compilation_time)
                    .join(&combination.label);
                let local_dir = local_root.join(&tail);
                PlannedRun {
                    properties_path: local_dir.join(PROPERTIES_FILE),
                    local_dir,
                    storage_rel: tail,
                    combination,
                }
            })
            .collect();
        Ok(Self {
            config,
            compilation_time,
            local_root,
            runs,
        })
    }

    pub fn storage_dir(&self, run: &PlannedRun) -> PathBuf {
        self.config.storage_root.join(&run.storage_rel)
    }

    /// Flattened properties plus the COMPILATION_TIME and PARAMETER_COMBINATION stamps.
    pub fn run_properties(&self, run: &PlannedRun, props: &PropertySet) -> PropertySet {
        let mut flat = flatten(props, &run.combination);
        flat.set_single(COMPILATION_TIME, self.compilation_time.as_str());
        flat.set_single(PARAMETER_COMBINATION, run.label());
        flat
    }
}

/// Writes the run's flattened properties file and returns its path.
pub fn write_combination_properties(
    plan: &ExperimentPlan,
    run: &PlannedRun,
    props: &PropertySet,
) -> Result<PathBuf, ExperimentError> {
    let text = plan.run_properties(run, props).to_text();
    fs::write(&run.properties_path, text).map_err(io_err(&run.properties_path))?;
    Ok(run.properties_path.clone())
}

/// What a submission needs to know about a materialized run; stored as
/// `submission.json` in the run's local directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionManifest {
    pub project: String,
    pub compilation_time: String,
    pub server: String,
    pub scripts: PathBuf,
    pub storage_root: PathBuf,
    pub application_path: String,
    pub run: PlannedRun,
}

impl SubmissionManifest {
    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Io {
            path: path.to_owned(),
            source: io::Error::new(io::ErrorKind::InvalidData, e),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaterializationReport {
    pub runs: usize,
    pub local_files: usize,
    pub storage_files: usize,
    pub directories: usize,
}

impl std::ops::AddAssign for MaterializationReport {
    fn add_assign(&mut self, rhs: Self) {
        self.runs += rhs.runs;
        self.local_files += rhs.local_files;
        self.storage_files += rhs.storage_files;
        self.directories += rhs.directories;
    }
}

/// Materializes a single run.
pub fn materialize_run(
    plan: &ExperimentPlan,
    run: &PlannedRun,
    props: &PropertySet,
    workflow: &EmittedWorkflow,
    storage: &dyn StorageBackend,
) -> Result<MaterializationReport, ExperimentError> {
    let violations = validate_graph(&workflow.graph);
    if !violations.is_empty() {
        return Err(ExperimentError::InvalidWorkflow {
            label: run.label().to_owned(),
            violations,
        });
    }
    for folder in &plan.config.folder_mappings {
        if !folder.source.exists() {
            return Err(ExperimentError::SourceMissing {
                folder: folder.name.clone(),
                path: folder.source.clone(),
            });
        }
    }

    let mut report = MaterializationReport {
        runs: 1,
        ..Default::default()
    };

    fs::create_dir_all(&run.local_dir).map_err(io_err(&run.local_dir))?;
    write_combination_properties(plan, run, props)?;
    let local_workflow = run.local_dir.join(WORKFLOW_FILE);
    fs::write(&local_workflow, &workflow.xml_text).map_err(io_err(&local_workflow))?;
    let manifest = SubmissionManifest {
        project: plan.config.project.clone(),
        compilation_time: plan.compilation_time.clone(),
        server: plan.config.server(),
        scripts: plan.config.trigger_scripts_path.clone(),
        storage_root: plan.config.storage_root.clone(),
        application_path: storage.location(&run.storage_rel),
        run: run.clone(),
    };
    let manifest_path = run.local_dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    report.local_files += 3;
    report.directories += 1;

    let storage_dir = plan.storage_dir(run);
    storage
        .create_dir_all(&run.storage_rel)
        .map_err(io_err(&storage_dir))?;
    storage
        .write_file(&run.storage_rel.join(WORKFLOW_FILE), workflow.xml_text.as_bytes())
        .map_err(io_err(storage_dir.join(WORKFLOW_FILE)))?;
    report.storage_files += 1;
    for folder in &plan.config.folder_mappings {
        report.storage_files += storage
            .copy_in(&folder.source, &run.storage_rel.join(&folder.name))
            .map_err(io_err(&folder.source))?;
        report.directories += 1;
    }
    storage
        .create_dir_all(&run.results_rel())
        .map_err(io_err(storage_dir.join(RESULTS_DIR)))?;
    report.directories += 2;
    Ok(report)
}

/// Materializes every run of the plan; `workflows[i]` belongs to `plan.runs[i]`.
pub fn materialize(
    plan: &ExperimentPlan,
    props: &PropertySet,
    workflows: &[EmittedWorkflow],
    storage: &dyn StorageBackend,
) -> Result<MaterializationReport, ExperimentError> {
    if workflows.len() != plan.runs.len() {
        return Err(ExperimentError::WorkflowCountMismatch {
            runs: plan.runs.len(),
            workflows: workflows.len(),
        });
    }
    let mut total = MaterializationReport::default();
    for (run, workflow) in plan.runs.iter().zip(workflows) {
        total += materialize_run(plan, run, props, workflow, storage)?;
    }
    Ok(total)
}
