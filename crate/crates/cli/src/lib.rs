//! `chrum` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O error, 2 template or configuration error,
//! 3 when at least one combination of a run failed.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use chrum_core::clock::{parse_instant, Clock, FixedClock, SystemClock};
use chrum_core::experiment::{
    enumerate_combinations, flatten, materialize_run, ExperimentError, ExperimentPlan, SubmissionManifest,
    EXECUTION_TIME, MANIFEST_FILE,
};
use chrum_core::properties::PropertiesError;
use chrum_core::storage::LocalStorage;
use chrum_core::submit::{execution_properties, record_execution, SubmissionStatus, SubmitClient};
use chrum_core::workflow::{non_blank_lines, Violation};
use chrum_core::{
    compile_document, dry_run, parse_config, parse_properties, parse_template, validate_graph, CompileError,
    EmittedWorkflow, IdiomRegistry, PropertySet, TemplateDocument,
};

#[derive(Debug, Parser)]
#[command(name = "chrum", version, about = "Workflow macro-compiler and experiment manager")]
pub struct Cli {
    /// More output on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand a template into workflow XML for the first combination.
    Expand(ExpandArgs),
    /// Print combinations and their directories without writing anything.
    Plan(ExperimentArgs),
    /// Expand, validate and materialize every combination, optionally submitting.
    Run(RunArgs),
    /// Expand a template and check the workflow graph.
    Validate(TemplateArgs),
    /// Print the success-path execution order of the expanded workflow.
    DryRun(TemplateArgs),
    /// Record a new execution of materialized runs and submit them.
    Submit(SubmitArgs),
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub properties: PathBuf,
    /// Output file.
    #[arg(long, default_value = "workflow.xml")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub properties: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub properties: PathBuf,
    /// Local root for per-combination directories.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Fixed time instead of the system clock (e.g. 2013-05-01T12:00:00Z).
    #[arg(long)]
    pub clock: Option<String>,
    /// Overrides `storage_root` from the config file.
    #[arg(long, env = "CHRUM_STORAGE_ROOT")]
    pub storage_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Stop after writing directories (the default).
    #[arg(long, conflicts_with = "submit")]
    pub materialize_only: bool,
    /// Record EXECUTION_TIME and submit every combination.
    #[arg(long)]
    pub submit: bool,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    /// Local run directories (or their submission.json files).
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub clock: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: io::Error },
    Template { file: String, line: Option<usize>, message: String },
    Config { file: String, message: String },
    Usage(String),
    PartialFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Template { .. } | CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::PartialFailure { .. } => 3,
        }
    }

    fn compile(file: &Path, e: &CompileError) -> Self {
        CliError::Template {
            file: file.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        }
    }

    fn invalid(file: &Path, violations: &[Violation]) -> Self {
        CliError::Template {
            file: file.display().to_string(),
            line: None,
            message: format!(
                "invalid workflow:\n  {}",
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  ")
            ),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Template {
                file,
                line: Some(line),
                message,
            } => write!(f, "{file}:{line}: {message}"),
            CliError::Template { file, line: None, message } => write!(f, "{file}: {message}"),
            CliError::Config { file, message } => write!(f, "{file}: {message}"),
            CliError::Usage(message) => f.write_str(message),
            CliError::PartialFailure { failed, total } => {
                write!(f, "{failed} of {total} combinations failed")
            }
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn console(e: io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn load_template(path: &Path) -> Result<TemplateDocument, CliError> {
    let text = read(path)?;
    parse_template(&text, &path.display().to_string()).map_err(|e| CliError::Template {
        file: path.display().to_string(),
        line: Some(e.line()),
        message: e.to_string(),
    })
}

fn load_properties(path: &Path) -> Result<PropertySet, CliError> {
    let text = read(path)?;
    parse_properties(&text).map_err(|e: PropertiesError| CliError::Config {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load_clock(value: Option<&str>) -> Result<Box<dyn Clock>, CliError> {
    match value {
        None => Ok(Box::new(SystemClock)),
        Some(text) => parse_instant(text)
            .map(|t| Box::new(FixedClock(t)) as Box<dyn Clock>)
            .ok_or_else(|| CliError::Usage(format!("cannot parse --clock value `{text}`"))),
    }
}

/// Plain properties of the first combination.
fn first_combination(props: &PropertySet) -> PropertySet {
    let combos = enumerate_combinations(props);
    flatten(props, &combos[0])
}

fn compile_first(template: &Path, properties: Option<&Path>) -> Result<(TemplateDocument, EmittedWorkflow), CliError> {
    let doc = load_template(template)?;
    let props = match properties {
        Some(p) => load_properties(p)?,
        None => PropertySet::new(),
    };
    let workflow = compile_document(&doc, &first_combination(&props), &IdiomRegistry::with_builtins())
        .map_err(|e| CliError::compile(template, &e))?;
    Ok((doc, workflow))
}

pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub verbose: u8,
}

impl Console<'_> {
    fn info(&mut self, text: impl fmt::Display) {
        if self.verbose > 0 {
            let _ = writeln!(self.err, "{text}");
        }
    }
}

pub fn cmd_expand(args: &ExpandArgs, io: &mut Console) -> Result<(), CliError> {
    let (doc, workflow) = compile_first(&args.template, Some(&args.properties))?;
    let violations = validate_graph(&workflow.graph);
    if !violations.is_empty() {
        return Err(CliError::invalid(&args.template, &violations));
    }
    write_file(&args.out, &workflow.xml_text)?;

    let template_lines = non_blank_lines(&doc.to_source());
    let emitted = workflow.stats.non_blank_lines;
    let ratio = emitted as f64 / template_lines.max(1) as f64;
    writeln!(io.out, "template\t{template_lines}").map_err(console)?;
    writeln!(io.out, "workflow\t{emitted}").map_err(console)?;
    writeln!(io.out, "ratio\t{ratio:.1}").map_err(console)?;
    let counts = workflow
        .stats
        .node_counts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(io.out, "nodes\t{counts}").map_err(console)?;
    io.info(format_args!("wrote {}", args.out.display()));
    Ok(())
}

struct Loaded {
    doc: TemplateDocument,
    props: PropertySet,
    plan: ExperimentPlan,
    clock: Box<dyn Clock>,
}

fn load_experiment(args: &ExperimentArgs) -> Result<Loaded, CliError> {
    // read everything up front so that no stage runs with a missing input
    let config_text = read(&args.config)?;
    let template_text = read(&args.template)?;
    let properties_text = read(&args.properties)?;

    let mut config = parse_config(&config_text).map_err(|e| CliError::Config {
        file: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    if let Some(root) = &args.storage_root {
        config.storage_root = root.clone();
    }
    let doc = parse_template(&template_text, &args.template.display().to_string()).map_err(|e| {
        CliError::Template {
            file: args.template.display().to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        }
    })?;
    let props = parse_properties(&properties_text).map_err(|e| CliError::Config {
        file: args.properties.display().to_string(),
        message: e.to_string(),
    })?;
    let clock = load_clock(args.clock.as_deref())?;
    let plan = ExperimentPlan::new(config, &props, &args.out, clock.as_ref()).map_err(|e| CliError::Config {
        file: args.properties.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(Loaded { doc, props, plan, clock })
}

pub fn cmd_plan(args: &ExperimentArgs, io: &mut Console) -> Result<(), CliError> {
    let Loaded { plan, .. } = load_experiment(args)?;
    io.info(format_args!("COMPILATION_TIME={}", plan.compilation_time));
    for run in &plan.runs {
        writeln!(
            io.out,
            "{}\t{}\t{}",
            run.label(),
            run.local_dir.display(),
            plan.storage_dir(run).display()
        )
        .map_err(console)?;
    }
    Ok(())
}

/// One row of the run summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRow {
    pub label: String,
    pub status: String,
    pub job_id: Option<String>,
    pub ok: bool,
}

pub fn cmd_run(args: &RunArgs, io: &mut Console) -> Result<Vec<RunRow>, CliError> {
    let Loaded { doc, props, plan, clock } = load_experiment(&args.experiment)?;
    let storage = LocalStorage::new(&plan.config.storage_root);
    let idioms = IdiomRegistry::with_builtins();
    let client = if args.submit {
        Some(
            SubmitClient::new(&plan.config.server_address, plan.config.server_port)
                .map_err(|e| CliError::Usage(e.to_string()))?,
        )
    } else {
        None
    };
    io.info(format_args!("COMPILATION_TIME={}", plan.compilation_time));

    let mut rows = Vec::with_capacity(plan.runs.len());
    for run in &plan.runs {
        let label = run.label().to_owned();
        let failed = |reason: String| RunRow {
            label: label.clone(),
            status: format!("failed({reason})"),
            job_id: None,
            ok: false,
        };

        let flat = flatten(&props, &run.combination);
        let workflow = match compile_document(&doc, &flat, &idioms) {
            Ok(w) => w,
            Err(e) => {
                let diag = CliError::compile(&args.experiment.template, &e);
                let _ = writeln!(io.err, "error: [{label}] {diag}");
                rows.push(failed("template".into()));
                continue;
            }
        };
        match materialize_run(&plan, run, &props, &workflow, &storage) {
            Ok(report) => io.info(format_args!(
                "[{label}] materialized: {} local files, {} storage files",
                report.local_files, report.storage_files
            )),
            Err(e) => {
                let _ = writeln!(io.err, "error: [{label}] {e}");
                let reason = match e {
                    ExperimentError::InvalidWorkflow { .. } => "invalid workflow",
                    ExperimentError::SourceMissing { .. } => "missing folder source",
                    _ => "io",
                };
                rows.push(failed(reason.into()));
                continue;
            }
        }

        let Some(client) = &client else {
            rows.push(RunRow {
                label,
                status: "materialized".into(),
                job_id: None,
                ok: true,
            });
            continue;
        };
        rows.push(submit_run(client, run, &plan.run_properties(run, &props), &storage, clock.as_ref(), io));
    }

    for row in &rows {
        writeln!(
            io.out,
            "{}\t{}\t{}",
            row.label,
            row.status,
            row.job_id.as_deref().unwrap_or("-")
        )
        .map_err(console)?;
    }
    let failed = rows.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        return Err(CliError::PartialFailure {
            failed,
            total: rows.len(),
        });
    }
    Ok(rows)
}

fn submit_run(
    client: &SubmitClient,
    run: &chrum_core::experiment::PlannedRun,
    run_properties: &PropertySet,
    storage: &LocalStorage,
    clock: &dyn Clock,
    io: &mut Console,
) -> RunRow {
    let label = run.label().to_owned();
    let record = match record_execution(run, storage, clock) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(io.err, "error: [{label}] {e}");
            return RunRow {
                label,
                status: "failed(io)".into(),
                job_id: None,
                ok: false,
            };
        }
    };
    let submitted = client.submit(&record, &execution_properties(run_properties, &record));
    if let SubmissionStatus::Failed(reason) = &submitted.status {
        let _ = writeln!(io.err, "error: [{label}] submission failed: {reason}");
    }
    RunRow {
        label,
        ok: submitted.status == SubmissionStatus::Submitted,
        status: submitted.status.to_string(),
        job_id: submitted.job_id,
    }
}

pub fn cmd_validate(args: &TemplateArgs, io: &mut Console) -> Result<(), CliError> {
    let (_, workflow) = compile_first(&args.template, args.properties.as_deref())?;
    let violations = validate_graph(&workflow.graph);
    if !violations.is_empty() {
        return Err(CliError::invalid(&args.template, &violations));
    }
    writeln!(io.out, "ok\t{} nodes", workflow.graph.nodes.len()).map_err(console)?;
    Ok(())
}

pub fn cmd_dry_run(args: &TemplateArgs, io: &mut Console) -> Result<(), CliError> {
    let (_, workflow) = compile_first(&args.template, args.properties.as_deref())?;
    let violations = validate_graph(&workflow.graph);
    if !violations.is_empty() {
        return Err(CliError::invalid(&args.template, &violations));
    }
    for event in dry_run(&workflow.graph) {
        writeln!(io.out, "{event}").map_err(console)?;
    }
    Ok(())
}

pub fn cmd_submit(args: &SubmitArgs, io: &mut Console) -> Result<Vec<RunRow>, CliError> {
    let clock = load_clock(args.clock.as_deref())?;
    let mut rows = Vec::new();
    for target in &args.runs {
        let manifest_path = if target.is_dir() {
            target.join(MANIFEST_FILE)
        } else {
            target.clone()
        };
        let manifest = SubmissionManifest::read(&manifest_path).map_err(|e| match e {
            ExperimentError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Usage(other.to_string()),
        })?;
        // earlier EXECUTION_TIME lines are history, not submission input
        let text = read(&manifest.run.properties_path)?;
        let stamp = format!("{EXECUTION_TIME}=");
        let base: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with(&stamp))
            .map(|l| format!("{l}\n"))
            .collect();
        let props = parse_properties(&base).map_err(|e| CliError::Config {
            file: manifest.run.properties_path.display().to_string(),
            message: e.to_string(),
        })?;
        let (host, port) = manifest
            .server
            .rsplit_once(':')
            .and_then(|(h, p)| Some((h.to_owned(), p.parse::<u16>().ok()?)))
            .ok_or_else(|| CliError::Usage(format!("bad server `{}` in manifest", manifest.server)))?;
        let client = SubmitClient::new(&host, port).map_err(|e| CliError::Usage(e.to_string()))?;
        let storage = LocalStorage::new(&manifest.storage_root);
        rows.push(submit_run(&client, &manifest.run, &props, &storage, clock.as_ref(), io));
    }
    for row in &rows {
        writeln!(
            io.out,
            "{}\t{}\t{}",
            row.label,
            row.status,
            row.job_id.as_deref().unwrap_or("-")
        )
        .map_err(console)?;
    }
    let failed = rows.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        return Err(CliError::PartialFailure {
            failed,
            total: rows.len(),
        });
    }
    Ok(rows)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut io = Console {
        out,
        err,
        verbose: cli.verbose,
    };
    let result = match &cli.command {
        Command::Expand(a) => cmd_expand(a, &mut io),
        Command::Plan(a) => cmd_plan(a, &mut io),
        Command::Run(a) => cmd_run(a, &mut io).map(drop),
        Command::Validate(a) => cmd_validate(a, &mut io),
        Command::DryRun(a) => cmd_dry_run(a, &mut io),
        Command::Submit(a) => cmd_submit(a, &mut io).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            e.exit_code()
        }
    }
}
