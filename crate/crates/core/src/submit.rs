//! Recording executions and submitting runs to an Oozie-style REST endpoint.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use reqwest::StatusCode;
use serde::Deserialize;
use thiserror::Error;

use crate::clock::{timestamp, Clock};
use crate::experiment::{io_err, PlannedRun, EXECUTION_TIME};
use crate::properties::{PropertySet, PropertyValue};
use crate::storage::StorageBackend;
use crate::xml::escape_text;

pub const APPLICATION_PATH_KEY: &str = "oozie.wf.application.path";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const SUBMIT_CONTENT_TYPE: &str = "application/xml;charset=UTF-8";

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error(transparent)]
    Experiment(#[from] crate::experiment::ExperimentError),
    #[error("failed to build HTTP client: {0}")]
    Client(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    Connection(String),
    HttpStatus { status: u16, body: String },
    BadResponse(String),
    NotRecorded,
    MultivaluedProperty(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Connection(detail) => write!(f, "connection: {detail}"),
            FailureReason::HttpStatus { status, body } => write!(f, "http {status}: {}", body.trim()),
            FailureReason::BadResponse(detail) => write!(f, "bad response: {detail}"),
            FailureReason::NotRecorded => f.write_str("execution time was not recorded"),
            FailureReason::MultivaluedProperty(key) => write!(f, "property `{key}` is still multivalued"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmissionStatus {
    Recorded,
    Submitted,
    Failed(FailureReason),
}

impl fmt::Display for SubmissionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubmissionStatus::Recorded => f.write_str("recorded"),
            SubmissionStatus::Submitted => f.write_str("submitted"),
            SubmissionStatus::Failed(reason) => write!(f, "failed({reason})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionRecord {
    pub label: String,
    pub execution_time: String,
    pub application_path: String,
    /// Present iff the status is `Submitted`.
    pub job_id: Option<String>,
    pub status: SubmissionStatus,
}

/// Stamps a new execution of a materialized run.
///
/// Appends `EXECUTION_TIME=<now>` to the run's properties file and then creates
/// `results/<now>/` in its storage directory. Recording the same instant twice
/// leaves a single line and a single directory.
pub fn record_execution(
    run: &PlannedRun,
    storage: &dyn StorageBackend,
    clock: &dyn Clock,
) -> Result<SubmissionRecord, SubmitError> {
    let execution_time = timestamp(clock);
    let path = &run.properties_path;
    let current = fs::read_to_string(path).map_err(io_err(path))?;
    let line = format!("{EXECUTION_TIME}={execution_time}");

    if !current.lines().any(|l| l.trim() == line) {
        let mut file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        let mut text = String::new();
        if !current.is_empty() && !current.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&line);
        text.push('\n');
        file.write_all(text.as_bytes()).map_err(io_err(path))?;
    }

    let results = run.results_rel().join(&execution_time);
    storage
        .create_dir_all(&results)
        .map_err(io_err(storage.location(&results)))?;

    Ok(SubmissionRecord {
        label: run.label().to_owned(),
        execution_time,
        application_path: storage.location(&run.storage_rel),
        job_id: None,
        status: SubmissionStatus::Recorded,
    })
}

/// Properties for one execution: the run's flattened set plus its EXECUTION_TIME.
pub fn execution_properties(run_properties: &PropertySet, record: &SubmissionRecord) -> PropertySet {
    let mut props = run_properties.clone();
    props.set_single(EXECUTION_TIME, record.execution_time.as_str());
    props
}

/// The Hadoop-style `<configuration>` document sent with a submission.
pub fn configuration_xml(properties: &[(&str, &str)]) -> String {
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<configuration>\n");
    for (name, value) in properties {
        xml.push_str(&format!(
            "    <property>\n        <name>{}</name>\n        <value>{}</value>\n    </property>\n",
            escape_text(name),
            escape_text(value)
        ));
    }
    xml.push_str("</configuration>\n");
    xml
}

#[derive(Deserialize)]
struct JobCreated {
    id: String,
}

/// Blocking client for `POST /oozie/v1/jobs?action=start`.
#[derive(Debug, Clone)]
pub struct SubmitClient {
    http: Client,
    endpoint: String,
}

impl SubmitClient {
    pub fn new(address: &str, port: u16) -> Result<Self, SubmitError> {
        Self::with_timeout(address, port, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(address: &str, port: u16, timeout: Duration) -> Result<Self, SubmitError> {
        let http = Client::builder()
            .timeout(timeout)
            .no_proxy()
            .build()
            .map_err(|e| SubmitError::Client(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: format!("http://{address}:{port}/oozie/v1/jobs?action=start"),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Submits a recorded run. Failures are reported in the returned record's
    /// status; the recorded execution is never touched.
    pub fn submit(&self, record: &SubmissionRecord, properties: &PropertySet) -> SubmissionRecord {
        let mut out = record.clone();
        out.job_id = None;
        let fail = |mut out: SubmissionRecord, reason| {
            out.status = SubmissionStatus::Failed(reason);
            out
        };

        if record.status != SubmissionStatus::Recorded {
            return fail(out, FailureReason::NotRecorded);
        }

        let mut pairs: Vec<(&str, &str)> = Vec::with_capacity(properties.len() + 1);
        for (key, value) in properties.entries() {
            match value {
                PropertyValue::Single(v) if key != APPLICATION_PATH_KEY => pairs.push((key, v)),
                PropertyValue::Single(_) => {}
                PropertyValue::Multi(_) => {
                    return fail(out, FailureReason::MultivaluedProperty(key.to_owned()));
                }
            }
        }
        pairs.push((APPLICATION_PATH_KEY, &record.application_path));

        let response = self
            .http
            .post(&self.endpoint)
            .header(CONTENT_TYPE, SUBMIT_CONTENT_TYPE)
            .body(configuration_xml(&pairs))
            .send();
        let response = match response {
            Ok(r) => r,
            Err(e) => return fail(out, FailureReason::Connection(error_chain(&e))),
        };

        let status = response.status();
        let body = response.text().unwrap_or_default();
        if status != StatusCode::CREATED {
            return fail(
                out,
                FailureReason::HttpStatus {
                    status: status.as_u16(),
                    body,
                },
            );
        }
        match serde_json::from_str::<JobCreated>(&body) {
            Ok(created) => {
                out.job_id = Some(created.id);
                out.status = SubmissionStatus::Submitted;
                out
            }
            Err(e) => fail(out, FailureReason::BadResponse(e.to_string())),
        }
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut text = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        text.push_str(": ");
        text.push_str(&s.to_string());
        source = s.source();
    }
    text
}
