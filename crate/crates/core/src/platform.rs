//! The engine, connector registry, document store and clock wired together.
//!
//! One writer lock guards the engine; connector calls made by the job
//! executor happen while it is held, so jobs run one at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration as StdDuration;

use agriflow_geo::{compute_index, BandRaster, IndexKind, Parcel, RenderMode, Rendered};
use chrono::{DateTime, Utc};
use parking_lot::{Mutex, MutexGuard, RwLock};

use crate::connectors::{CallContext, ConnectorError, DocumentStore, Fixture, Registry};
use crate::engine::{
    Actor, DocumentInfo, Engine, EngineError, InstanceId, InstanceStatus, JobKind, TaskId,
};
use crate::journal::{Journal, JournalError, Snapshot};
use crate::model::{parse_definition, ProcessDefinition};
use crate::scheduler::{Clock, ClockError, JobOutcome, RetryPolicy};
use crate::value::{Value, VariableMap};

#[derive(Debug, thiserror::Error)]
pub enum PlatformError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Connector(#[from] ConnectorError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T, E = PlatformError> = std::result::Result<T, E>;

pub struct Platform {
    engine: Mutex<Engine>,
    registry: RwLock<Registry>,
    documents: DocumentStore,
    clock: Clock,
    fixture: Arc<Fixture>,
    data_dir: Option<PathBuf>,
}

/// Paths inside a data directory.
pub fn journal_path(dir: &Path) -> PathBuf {
    dir.join("journal.ndjson")
}

pub fn snapshot_path(dir: &Path) -> PathBuf {
    dir.join("snapshot.json")
}

impl Platform {
    pub fn in_memory(clock: Clock, fixture: Arc<Fixture>) -> Platform {
        Platform {
            engine: Mutex::new(Engine::in_memory()),
            registry: RwLock::new(Registry::simulated(fixture.clone())),
            documents: DocumentStore::in_memory(),
            clock,
            fixture,
            data_dir: None,
        }
    }

    /// Opens (or creates) a data directory holding the journal and the
    /// document store, recovering state by replaying the journal.
    pub fn open(dir: &Path, clock: Clock, fixture: Arc<Fixture>, retry: RetryPolicy) -> Result<Platform> {
        std::fs::create_dir_all(dir).map_err(JournalError::from)?;
        let (journal, replay) = Journal::open(&journal_path(dir), true)?;
        let documents = DocumentStore::dir(dir.join("documents")).map_err(JournalError::from)?;
        Ok(Platform {
            engine: Mutex::new(Engine::new(journal, replay.state, retry)),
            registry: RwLock::new(Registry::simulated(fixture.clone())),
            documents,
            clock,
            fixture,
            data_dir: Some(dir.to_path_buf()),
        })
    }

    pub fn with_registry(self, registry: Registry) -> Platform {
        *self.registry.write() = registry;
        self
    }

    pub fn engine(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock()
    }

    pub fn registry(&self) -> parking_lot::RwLockReadGuard<'_, Registry> {
        self.registry.read()
    }

    pub fn registry_mut(&self) -> parking_lot::RwLockWriteGuard<'_, Registry> {
        self.registry.write()
    }

    pub fn documents(&self) -> &DocumentStore {
        &self.documents
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn fixture(&self) -> &Arc<Fixture> {
        &self.fixture
    }

    pub fn parcels(&self) -> &[Parcel] {
        &self.fixture.parcels
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    /// Writes a snapshot of the current state next to the journal.
    pub fn checkpoint(&self) -> Result<Option<PathBuf>> {
        let Some(dir) = &self.data_dir else {
            return Ok(None);
        };
        let path = snapshot_path(dir);
        Snapshot::capture(self.engine().state()).save(&path)?;
        Ok(Some(path))
    }

    pub fn deploy_xml(&self, xml: &[u8], actor: &Actor) -> Result<Arc<ProcessDefinition>> {
        let def = parse_definition(xml).map_err(EngineError::from)?;
        self.deploy(def, actor)
    }

    pub fn deploy(&self, def: ProcessDefinition, actor: &Actor) -> Result<Arc<ProcessDefinition>> {
        let kinds: Vec<String> = self.registry().kinds().into_iter().map(String::from).collect();
        let kinds: Vec<&str> = kinds.iter().map(String::as_str).collect();
        let now = self.now();
        Ok(self.engine().deploy(def, &kinds, &actor.user, now)?)
    }

    pub fn start(&self, definition_id: &str, variables: VariableMap, actor: &Actor) -> Result<InstanceId> {
        let now = self.now();
        Ok(self.engine().start_instance(definition_id, variables, actor, now)?)
    }

    pub fn claim(&self, task: TaskId, actor: &Actor) -> Result<()> {
        let now = self.now();
        Ok(self.engine().claim_task(task, actor, now)?)
    }

    pub fn complete(&self, task: TaskId, values: VariableMap, actor: &Actor) -> Result<InstanceStatus> {
        let now = self.now();
        Ok(self.engine().complete_task(task, values, actor, now)?)
    }

    pub fn terminate(&self, instance: InstanceId, actor: &Actor) -> Result<()> {
        let now = self.now();
        Ok(self.engine().terminate(instance, actor, now)?)
    }

    /// Stores an uploaded report, extracts its declared fields and journals
    /// the ingestion. Identical bytes yield the same document.
    pub fn ingest_file(
        &self,
        kind: &str,
        bytes: &[u8],
        metadata: BTreeMap<String, String>,
        actor: &Actor,
    ) -> Result<DocumentInfo> {
        let fields = self.registry().parse_upload(kind, bytes)?;
        let document = self
            .documents
            .put(bytes)
            .map_err(|e| ConnectorError::Storage(e.to_string()))?;
        let now = self.now();
        let info = DocumentInfo {
            document,
            kind: kind.to_string(),
            size: bytes.len() as u64,
            fields,
            metadata,
            ingested_at: now,
            ingested_by: actor.user.clone(),
        };
        Ok(self.engine().register_document(info, now)?)
    }

    pub fn next_due(&self) -> Option<DateTime<Utc>> {
        self.engine().next_due()
    }

    /// Executes every job due at the current clock time, including jobs the
    /// executions themselves make due, earliest first.
    pub fn run_due_jobs(&self) -> Vec<JobOutcome> {
        let mut outcomes = Vec::new();
        let registry = self.registry.read();
        let mut engine = self.engine.lock();
        loop {
            let now = self.clock.now();
            let due = engine.due_jobs(now);
            if due.is_empty() {
                break;
            }
            let mut progressed = false;
            for job in due {
                let result = match &job.kind {
                    JobKind::TimerFire { .. } => engine
                        .fire_timer(job.id, now)
                        .map(|instance| JobOutcome::TimerFired { job: job.id, instance }),
                    JobKind::ServiceCall {
                        connector, inputs, ..
                    } => {
                        let attempt = job.attempts + 1;
                        let called = {
                            let ctx = CallContext {
                                now,
                                attempt,
                                history: &*engine,
                                documents: &self.documents,
                            };
                            registry.call(connector, inputs, &ctx)
                        };
                        match called {
                            Ok(r) => {
                                let alerts = r
                                    .alerts
                                    .into_iter()
                                    .map(|a| (a.recipient, a.severity, a.body))
                                    .collect();
                                engine
                                    .complete_job(job.id, r.outputs, alerts, now)
                                    .map(|_| JobOutcome::Succeeded {
                                        job: job.id,
                                        connector: connector.clone(),
                                        attempt,
                                    })
                            }
                            Err(err) => {
                                let error = err.to_string();
                                log::info!("job {} attempt {attempt} failed: {error}", job.id);
                                engine.fail_job(job.id, &error, now).map(|next| match next {
                                    Some(next_due) => JobOutcome::Retrying {
                                        job: job.id,
                                        connector: connector.clone(),
                                        attempt,
                                        next_due,
                                        error,
                                    },
                                    None => JobOutcome::Exhausted {
                                        job: job.id,
                                        connector: connector.clone(),
                                        attempt,
                                        error,
                                    },
                                })
                            }
                        }
                    }
                };
                match result {
                    Ok(o) => {
                        progressed = true;
                        outcomes.push(o);
                    }
                    // Cancelled in the meantime by an earlier job of this batch.
                    Err(EngineError::Conflict(_)) => {}
                    Err(e) => log::error!("job {} could not be executed: {e}", job.id),
                }
            }
            if !progressed {
                break;
            }
        }
        outcomes
    }

    /// Moves the simulated clock to `until`, stopping at every job due time
    /// on the way and running what is due there.
    pub fn advance_to(&self, until: DateTime<Utc>) -> Result<Vec<JobOutcome>> {
        let mut outcomes = self.run_due_jobs();
        while let Some(due) = self.next_due().filter(|d| *d <= until) {
            if due > self.now() {
                self.clock.set(due)?;
            }
            let ran = self.run_due_jobs();
            if ran.is_empty() {
                break;
            }
            outcomes.extend(ran);
        }
        if until > self.now() {
            self.clock.set(until)?;
        }
        Ok(outcomes)
    }

    /// Renders `index` over the latest satellite raster fetched by `instance`.
    pub fn render_map(&self, instance: InstanceId, index: IndexKind, mode: RenderMode) -> Result<Rendered> {
        let doc = {
            let engine = self.engine();
            let inst = engine
                .state()
                .instances
                .get(&instance)
                .ok_or_else(|| PlatformError::NotFound(format!("instance {instance}")))?;
            match inst.variables.get("satellite_raster") {
                Some(Value::Document(d)) => d.clone(),
                _ => {
                    return Err(PlatformError::NotFound(format!(
                        "instance {instance} has no satellite analysis"
                    )))
                }
            }
        };
        let bytes = self
            .documents
            .get(&doc)
            .ok_or_else(|| PlatformError::NotFound(format!("document {doc}")))?;
        let text = String::from_utf8_lossy(&bytes);
        let raster = BandRaster::parse(&text).map_err(|e| ConnectorError::Provider(e.to_string()))?;
        let grid = compute_index(&raster, index).map_err(|e| ConnectorError::Provider(e.to_string()))?;
        Ok(agriflow_geo::render_color_map(index, &grid, self.parcels(), mode))
    }
}

/// Background job executor for real-time operation.
pub struct Worker {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Worker {
    pub fn spawn(platform: Arc<Platform>, poll: StdDuration) -> Worker {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                let ran = platform.run_due_jobs();
                if !ran.is_empty() {
                    log::debug!("executed {} jobs", ran.len());
                }
                std::thread::sleep(poll);
            }
        });
        Worker {
            stop,
            handle: Some(handle),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.shutdown();
    }
}
