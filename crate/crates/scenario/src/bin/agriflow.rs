//! `agriflow`: operator CLI over the platform's service layer, running the
//! platform embedded on a data directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration as StdDuration, Instant};

use agriflow_api::service::StartRequest;
use agriflow_api::{Api, ApiError, Caller, ServiceConfig};
use agriflow_core::connectors::Fixture;
use agriflow_core::engine::{InstanceId, TaskId};
use agriflow_core::journal::{read_records, Snapshot};
use agriflow_core::platform::{journal_path, snapshot_path, Platform, Worker};
use agriflow_core::scheduler::{Clock, RetryPolicy};
use agriflow_scenario::replay::{replay_check, snapshot_matches};
use agriflow_scenario::{ScenarioConfig, ScenarioError, Simulation};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "agriflow", version, about = "Agricultural workflow platform operator CLI")]
struct Cli {
    /// Directory holding the journal, snapshot and documents.
    #[arg(long, global = true, default_value = "agriflow-data", env = "AGRIFLOW_DATA")]
    data_dir: PathBuf,
    /// Service configuration (users, tokens, roles, data catalog); the
    /// bundled vineyard configuration by default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `now` for the wall clock, an RFC 3339 instant for a simulated clock,
    /// or `journal` to continue at the time of the last journal record.
    #[arg(long, global = true, default_value = "journal")]
    clock: String,
    /// Seed of the simulated data providers.
    #[arg(long, global = true, default_value_t = 42)]
    fixture_seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deploys a BPMN XML file.
    Deploy {
        xml: PathBuf,
        #[arg(long = "as", default_value = "maria")]
        user: String,
    },
    /// Starts an instance of the latest version of a definition.
    Start {
        definition_id: String,
        #[arg(long = "as", default_value = "maria")]
        user: String,
        /// Initial variable, `name=value`.
        #[arg(long = "var")]
        vars: Vec<String>,
    },
    /// Lists the tasks a user can work on.
    Tasks {
        #[arg(long = "as")]
        user: String,
    },
    /// Claims (when unassigned) and completes a task.
    Complete {
        task: u64,
        #[arg(long = "as")]
        user: String,
        /// Form value, `name=value`.
        #[arg(long = "field")]
        fields: Vec<String>,
        /// Report file bound to a document field, `field=kind:path`.
        #[arg(long = "upload")]
        uploads: Vec<String>,
    },
    /// Runs the vineyard scenario on a simulated clock into the data
    /// directory and prints its report.
    Simulate {
        /// Days to simulate [default: 31].
        #[arg(long)]
        days: Option<u32>,
        /// Provider seed [default: 42].
        #[arg(long)]
        seed: Option<u64>,
        /// Forced value, `day:key=value`.
        #[arg(long = "override")]
        overrides: Vec<String>,
        /// Scenario configuration file; command-line flags take precedence.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Print the machine-readable report instead of text.
        #[arg(long)]
        json: bool,
        /// Remove an existing journal, snapshot and documents first.
        #[arg(long)]
        reset: bool,
    },
    /// Lists process instances with status and progress.
    Monitor {
        #[arg(long = "as", default_value = "maria")]
        user: String,
    },
    /// Writes the colour-coded index map of an instance as a PPM image and
    /// prints its legend.
    RenderMap {
        instance: u64,
        index: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// `per_cell` or `parcel_mean`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long = "as", default_value = "maria")]
        user: String,
    },
    /// Replays the journal and checks it against the live state and the
    /// saved snapshot.
    ReplayCheck,
    /// Serves the REST API with a background job worker.
    Serve {
        /// Listen address; the configuration's by default.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Api(#[from] ApiError),
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Platform(#[from] agriflow_core::platform::PlatformError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, CliError>;

fn service_config(cli: &Cli) -> Result<ServiceConfig> {
    match &cli.config {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(ServiceConfig::vineyard()),
    }
}

fn last_record_time(dir: &Path) -> Result<Option<DateTime<Utc>>> {
    let path = journal_path(dir);
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(path)?;
    Ok(read_records(&bytes).0.last().map(|r| r.at))
}

fn clock(cli: &Cli) -> Result<Clock> {
    match cli.clock.as_str() {
        "now" => Ok(Clock::real()),
        "journal" => Ok(match last_record_time(&cli.data_dir)? {
            Some(at) => Clock::simulated(at),
            None => Clock::real(),
        }),
        text => DateTime::parse_from_rfc3339(text)
            .map(|t| Clock::simulated(t.with_timezone(&Utc)))
            .map_err(|e| CliError::Usage(format!("--clock '{text}': {e}"))),
    }
}

fn open(cli: &Cli) -> Result<Api> {
    let platform = Platform::open(
        &cli.data_dir,
        clock(cli)?,
        Arc::new(Fixture::vineyard(cli.fixture_seed)),
        RetryPolicy::default(),
    )?;
    Ok(Api::new(Arc::new(platform), service_config(cli)?)?)
}

fn assignment(text: &str, what: &str) -> Result<(String, String)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| CliError::Usage(format!("{what} '{text}' is not of the form name=value")))
}

/// `true`, numbers and quoted strings are JSON; anything else is text.
fn json_value(raw: &str) -> Value {
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Bool(_) | Value::Number(_) | Value::String(_))) => v,
        _ => Value::String(raw.to_string()),
    }
}

fn values(pairs: &[String], what: &str) -> Result<Map<String, Value>> {
    let mut out = Map::new();
    for p in pairs {
        let (k, v) = assignment(p, what)?;
        out.insert(k, json_value(&v));
    }
    Ok(out)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializes"));
}

fn caller(api: &Api, user: &str) -> Result<Caller> {
    Ok(api.caller(user)?)
}

fn simulate(
    cli: &Cli,
    days: Option<u32>,
    seed: Option<u64>,
    overrides: &[String],
    scenario: Option<&Path>,
    json: bool,
    reset: bool,
) -> Result<()> {
    let mut config = match scenario {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(d) = days {
        config.n_days = d;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let days = config.n_days;
    for o in overrides {
        config.apply_override(o)?;
    }
    config.check()?;
    let dir = &cli.data_dir;
    if reset {
        for p in [journal_path(dir), snapshot_path(dir)] {
            if p.exists() {
                std::fs::remove_file(p)?;
            }
        }
        let docs = dir.join("documents");
        if docs.exists() {
            std::fs::remove_dir_all(docs)?;
        }
    }
    let started = Instant::now();
    let mut sim = Simulation::persistent(config, dir)?;
    let report = sim.run()?;
    sim.platform().checkpoint()?;
    let check = replay_check(sim.platform())?;
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    eprintln!(
        "simulated {} days in {:.2?}; journal replay {} over {} records",
        days,
        started.elapsed(),
        if check.identical { "identical" } else { "DIFFERS" },
        check.records
    );
    if !check.identical {
        return Err(CliError::Usage("replayed state differs from the live state".into()));
    }
    if !report.all_completed() {
        return Err(CliError::Usage("not every daily instance completed; see the report".into()));
    }
    Ok(())
}

fn replay(cli: &Cli) -> Result<()> {
    let dir = &cli.data_dir;
    let path = journal_path(dir);
    if !path.exists() {
        return Err(CliError::Usage(format!("no journal in {}", dir.display())));
    }
    let bytes = std::fs::read(&path)?;
    let (records, corruption) = read_records(&bytes);
    if let Some(c) = corruption {
        return Err(CliError::Usage(format!(
            "journal corrupt at line {} (last valid sequence {}): {}",
            c.line, c.last_valid_seq, c.message
        )));
    }
    let api = open(cli)?;
    let live = replay_check(api.platform())?;
    if !live.identical {
        return Err(CliError::Usage("replayed state differs from the recovered state".into()));
    }
    let snap = snapshot_path(dir);
    if snap.exists() {
        let snapshot = Snapshot::load(&snap).map_err(ScenarioError::from)?;
        if !snapshot_matches(&bytes, &snapshot)? {
            return Err(CliError::Usage(format!(
                "snapshot at sequence {} differs from the journal replay",
                snapshot.seq
            )));
        }
        println!(
            "replay ok: {} records, snapshot at sequence {} identical",
            records.len(),
            snapshot.seq
        );
    } else {
        println!("replay ok: {} records, no snapshot", records.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Deploy { xml, user } => {
            let api = open(cli)?;
            let bytes = std::fs::read(xml)?;
            print_json(&api.deploy(&caller(&api, user)?, &bytes)?);
        }
        Command::Start {
            definition_id,
            user,
            vars,
        } => {
            let api = open(cli)?;
            let req = StartRequest {
                definition_id: definition_id.clone(),
                variables: values(vars, "--var")?,
            };
            let detail = api.start(&caller(&api, user)?, &req)?;
            api.platform().run_due_jobs();
            print_json(&api.instance(&caller(&api, user)?, detail.overview.instance)?);
        }
        Command::Tasks { user } => {
            let api = open(cli)?;
            for t in api.tasks(&caller(&api, user)?)? {
                println!(
                    "{:>5}  instance {:<4} {:<14} {:<40} {:<15} {}",
                    t.id.0,
                    t.instance.0,
                    serde_json::to_value(t.state).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    t.name,
                    t.candidate_role,
                    t.assignee.as_deref().unwrap_or("-")
                );
            }
        }
        Command::Complete {
            task,
            user,
            fields,
            uploads,
        } => {
            let api = open(cli)?;
            let c = caller(&api, user)?;
            let id = TaskId(*task);
            let mut form = values(fields, "--field")?;
            for u in uploads {
                let (field, source) = assignment(u, "--upload")?;
                let (kind, path) = source
                    .split_once(':')
                    .ok_or_else(|| CliError::Usage(format!("--upload '{u}' is not of the form field=kind:path")))?;
                let bytes = std::fs::read(path)?;
                let meta = BTreeMap::from([("file".to_string(), path.to_string())]);
                let info = api.upload(&c, kind, &bytes, meta)?;
                form.insert(field, Value::String(info.document.0));
            }
            let unassigned = api.tasks(&c)?.iter().any(|t| t.id == id && t.assignee.is_none());
            if unassigned {
                api.claim(&c, id)?;
            }
            let done = api.complete(&c, id, &form)?;
            api.platform().run_due_jobs();
            print_json(&done);
        }
        Command::Simulate {
            days,
            seed,
            overrides,
            scenario,
            json,
            reset,
        } => simulate(cli, *days, *seed, overrides, scenario.as_deref(), *json, *reset)?,
        Command::Monitor { user } => {
            let api = open(cli)?;
            for p in api.monitor(&caller(&api, user)?)? {
                let pending: Vec<String> = p
                    .tasks
                    .iter()
                    .filter(|t| t.completed_by.is_none())
                    .map(|t| t.name.clone())
                    .collect();
                println!(
                    "instance {:<4} {:<18} v{} {:<10} {:>5.1}%  {}{}",
                    p.instance.0,
                    p.definition_id,
                    p.version,
                    serde_json::to_value(p.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    p.progress * 100.0,
                    p.created_at.format("%Y-%m-%d %H:%M"),
                    if pending.is_empty() {
                        String::new()
                    } else {
                        format!("  pending: {}", pending.join(", "))
                    }
                );
            }
        }
        Command::RenderMap {
            instance,
            index,
            output,
            mode,
            user,
        } => {
            let api = open(cli)?;
            let rendered = api.map(&caller(&api, user)?, InstanceId(*instance), index, mode.as_deref())?;
            std::fs::write(output, &rendered.image)?;
            print_json(&rendered.legend);
        }
        Command::ReplayCheck => replay(cli)?,
        Command::Serve { bind } => {
            let api = open(cli)?;
            let bind = bind.clone().unwrap_or_else(|| api.config().bind.clone());
            let worker = Worker::spawn(api.platform().clone(), StdDuration::from_millis(500));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(agriflow_api::serve(api, &bind))?;
            worker.stop();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Api(a) = &e {
                for d in &a.body.details {
                    eprintln!("  {d}");
                }
            }
            ExitCode::FAILURE
        }
    }
}

