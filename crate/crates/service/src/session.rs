use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::json;

use nsp_core::constraints::{evaluate, Report};
use nsp_core::model::{CellRef, CellShift, RequestEdit};
use nsp_core::search::{CellDirectives, Control, Engine, Event, Incumbent, RestartKind, SearchConfig};
use nsp_core::{Instance, Roster};

use crate::error::ApiError;
use crate::events::{EventLog, IncumbentEvent};
use crate::store::{SessionMeta, Store, StoredSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Running,
    Paused,
    Stopped,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Created => "created",
            SessionState::Running => "running",
            SessionState::Paused => "paused",
            SessionState::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Start,
    Pause,
    Resume,
    Stop,
    Soften { flag: bool },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Start => "start",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Stop => "stop",
            Command::Soften { .. } => "soften",
        }
    }
}

/// Directive changes applied together on the next resume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectivePatch {
    /// Pin cells to values. Replaces any other directive on the cell.
    #[serde(default)]
    pub fix: Vec<CellShift>,
    #[serde(default)]
    pub unfix: Vec<CellRef>,
    /// Drop prioritization and fixing; the cells restart from rest.
    #[serde(default)]
    pub clear: Vec<CellRef>,
    #[serde(default)]
    pub set_request: Vec<RequestEdit>,
}

impl DirectivePatch {
    pub fn is_empty(&self) -> bool {
        self.fix.is_empty() && self.unfix.is_empty() && self.clear.is_empty() && self.set_request.is_empty()
    }

    pub fn apply(&self, base: &CellDirectives) -> CellDirectives {
        fn at(c: &CellShift, nurse: &str, day: i32) -> bool {
            c.nurse == nurse && c.day == day
        }
        let mut d = base.clone();
        for f in &self.fix {
            d.fixed.retain(|c| !at(c, &f.nurse, f.day));
            d.prioritized.retain(|c| !at(c, &f.nurse, f.day));
            d.cleared.retain(|c| !(c.nurse == f.nurse && c.day == f.day));
            d.fixed.push(f.clone());
        }
        for u in &self.unfix {
            d.fixed.retain(|c| !at(c, &u.nurse, u.day));
        }
        for c in &self.clear {
            d.fixed.retain(|x| !at(x, &c.nurse, c.day));
            d.prioritized.retain(|x| !at(x, &c.nurse, c.day));
            if !d.cleared.contains(c) {
                d.cleared.push(c.clone());
            }
        }
        d
    }
}

/// Public view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub revision: u64,
    pub config: SearchConfig,
    pub directives: CellDirectives,
    pub incumbents: usize,
    pub latest_sequence: Option<u64>,
}

/// Latest incumbent with its violation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub session_id: String,
    pub state: SessionState,
    pub incumbent: Option<IncumbentEvent>,
}

struct Worker {
    tx: Sender<Control>,
    /// Instance that takes effect at the next manual restart event.
    swap: Arc<Mutex<Option<Arc<Instance>>>>,
    soften: Arc<AtomicBool>,
}

struct Inner {
    state: SessionState,
    config: SearchConfig,
    directives: CellDirectives,
    /// Current instance, including request edits not yet sent to the worker.
    instance: Arc<Instance>,
    pending_edits: Vec<RequestEdit>,
    dirty: bool,
    revision: u64,
    elapsed: f64,
    epoch_base: u64,
    worker: Option<Worker>,
}

pub struct SessionHandle {
    id: String,
    log: Arc<EventLog>,
    inner: Mutex<Inner>,
    store: Option<Arc<Store>>,
}

impl SessionHandle {
    pub fn create(
        id: String,
        instance: Instance,
        config: SearchConfig,
        directives: CellDirectives,
        capacity: usize,
        store: Option<Arc<Store>>,
    ) -> Result<Arc<SessionHandle>, ApiError> {
        config.validate().map_err(|e| ApiError::invalid_search(&e))?;
        directives.resolve(&instance).map_err(|e| ApiError::invalid_search(&e))?;
        let handle = Arc::new(SessionHandle {
            id,
            log: Arc::new(EventLog::new(capacity, Vec::new(), false)),
            inner: Mutex::new(Inner {
                state: SessionState::Created,
                config,
                directives,
                instance: Arc::new(instance),
                pending_edits: Vec::new(),
                dirty: false,
                revision: 0,
                elapsed: 0.0,
                epoch_base: 0,
                worker: None,
            }),
            store,
        });
        if let Some(store) = &handle.store {
            let g = handle.lock();
            store
                .create(&handle.meta(&g), &g.instance)
                .map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
        }
        Ok(handle)
    }

    /// Rebuilds a persisted session. Running sessions come back paused.
    pub fn recover(stored: StoredSession, capacity: usize, store: Option<Arc<Store>>) -> Arc<SessionHandle> {
        let StoredSession { meta, instance, events } = stored;
        let state = match meta.state {
            SessionState::Running | SessionState::Paused => SessionState::Paused,
            s => s,
        };
        let epoch_base = events.last().map_or(meta.epoch_base, |e| e.epoch + 1).max(meta.epoch_base);
        let handle = Arc::new(SessionHandle {
            id: meta.id.clone(),
            log: Arc::new(EventLog::new(capacity, events, state == SessionState::Stopped)),
            inner: Mutex::new(Inner {
                state,
                config: meta.config,
                directives: meta.directives,
                instance: Arc::new(instance),
                pending_edits: Vec::new(),
                dirty: false,
                revision: meta.revision,
                elapsed: meta.elapsed_seconds,
                epoch_base,
                worker: None,
            }),
            store,
        });
        let g = handle.lock();
        handle.persist(&g);
        drop(g);
        handle
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.log
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap()
    }

    pub fn state(&self) -> SessionState {
        self.lock().state
    }

    fn meta(&self, g: &Inner) -> SessionMeta {
        SessionMeta {
            id: self.id.clone(),
            state: g.state,
            config: g.config.clone(),
            directives: g.directives.clone(),
            revision: g.revision,
            elapsed_seconds: g.elapsed,
            epoch_base: g.epoch_base,
        }
    }

    fn persist(&self, g: &Inner) {
        if let Some(store) = &self.store {
            if let Err(e) = store.save_meta(&self.meta(g)) {
                log::error!("session {}: saving metadata: {e}", self.id);
            }
        }
    }

    pub fn view(&self) -> SessionView {
        let g = self.lock();
        SessionView {
            id: self.id.clone(),
            state: g.state,
            revision: g.revision,
            config: g.config.clone(),
            directives: g.directives.clone(),
            incumbents: self.log.len(),
            latest_sequence: self.log.latest().map(|e| e.sequence),
        }
    }

    pub fn solution(&self) -> Solution {
        let state = self.state();
        Solution {
            session_id: self.id.clone(),
            state,
            incumbent: self.log.latest().map(|e| (*e).clone()),
        }
    }

    fn illegal(&self, g: &Inner, command: &str) -> ApiError {
        ApiError::conflict(
            format!("`{command}` is not allowed while the session is {}", g.state.as_str()),
            json!({ "session_id": self.id, "state": g.state, "command": command }),
        )
    }

    /// Applies a control command and returns the new state.
    pub fn control(self: &Arc<Self>, cmd: Command) -> Result<SessionState, ApiError> {
        let mut g = self.lock();
        use SessionState::*;
        match (cmd, g.state) {
            (Command::Start, Created) => self.spawn(&mut g, None)?,
            (Command::Pause, Running) => {
                self.send(&g, Control::Pause);
                g.state = Paused;
            }
            (Command::Resume, Paused) => self.resume(&mut g)?,
            (Command::Stop, Running | Paused) => {
                self.send(&g, Control::Stop);
                g.worker = None;
                g.state = Stopped;
                self.log.close();
            }
            (Command::Soften { flag }, Created) => g.config.soften_hard = flag,
            (Command::Soften { flag }, Running) => {
                g.config.soften_hard = flag;
                if let Some(w) = &g.worker {
                    w.soften.store(flag, Ordering::SeqCst);
                }
                self.send(&g, Control::SetSoften(flag));
            }
            (Command::Soften { flag }, Paused) => {
                g.config.soften_hard = flag;
                if let Some(w) = &g.worker {
                    w.soften.store(flag, Ordering::SeqCst);
                    let _ = w.tx.send(Control::SetSoften(flag));
                }
                self.resume(&mut g)?;
            }
            _ => return Err(self.illegal(&g, cmd.name())),
        }
        self.persist(&g);
        Ok(g.state)
    }

    fn send(&self, g: &Inner, msg: Control) {
        if let Some(w) = &g.worker {
            let _ = w.tx.send(msg);
        }
    }

    fn resume(self: &Arc<Self>, g: &mut Inner) -> Result<(), ApiError> {
        let Some(w) = &g.worker else {
            let warm = self.log.latest().and_then(|e| Roster::from_document(&e.roster, &g.instance).ok());
            return self.spawn(g, warm);
        };
        if g.dirty {
            if !g.pending_edits.is_empty() {
                *w.swap.lock().unwrap() = Some(g.instance.clone());
            }
            let _ = w.tx.send(Control::Reconfigure {
                directives: g.directives.clone(),
                request_edits: std::mem::take(&mut g.pending_edits),
            });
            g.dirty = false;
        }
        let _ = w.tx.send(Control::Resume);
        g.state = SessionState::Running;
        Ok(())
    }

    fn spawn(self: &Arc<Self>, g: &mut Inner, warm: Option<Roster>) -> Result<(), ApiError> {
        let mut cfg = g.config.clone();
        cfg.idle_when_optimal = true;
        let remaining = cfg.time_limit_seconds - g.elapsed;
        if remaining <= 0.0 {
            g.state = SessionState::Stopped;
            self.log.close();
            return Ok(());
        }
        cfg.time_limit_seconds = remaining;
        let mut engine =
            Engine::new(g.instance.clone(), cfg.clone(), &g.directives).map_err(|e| ApiError::invalid_search(&e))?;
        if let Some(r) = warm {
            engine.warm_start(&r).map_err(|e| ApiError::invalid_search(&e))?;
        }
        let (tx, rx) = channel();
        let swap = Arc::new(Mutex::new(None));
        let soften = Arc::new(AtomicBool::new(cfg.soften_hard));
        let mut sink = Sink {
            handle: self.clone(),
            instance: g.instance.clone(),
            swap: swap.clone(),
            soften: soften.clone(),
            epoch_base: g.epoch_base,
            elapsed_base: g.elapsed,
        };
        let me = self.clone();
        let base = g.elapsed;
        std::thread::Builder::new()
            .name(format!("session-{}", self.id))
            .spawn(move || {
                let out = engine.run(Some(&rx), &mut |e| sink.on_event(e));
                me.finished(base + out.elapsed_seconds);
            })
            .map_err(|e| ApiError::internal(format!("starting search worker: {e}")))?;
        g.worker = Some(Worker { tx, swap, soften });
        g.pending_edits.clear();
        g.dirty = false;
        g.state = SessionState::Running;
        Ok(())
    }

    fn finished(&self, elapsed: f64) {
        let mut g = self.lock();
        g.elapsed = elapsed;
        g.worker = None;
        g.state = SessionState::Stopped;
        self.log.close();
        self.persist(&g);
    }

    fn paused_at(&self, elapsed: f64) {
        let mut g = self.lock();
        g.elapsed = elapsed;
        self.persist(&g);
    }

    /// Stages a directive patch. Allowed while created or paused; the whole
    /// patch is validated before anything changes.
    pub fn update_directives(&self, patch: &DirectivePatch) -> Result<u64, ApiError> {
        let mut g = self.lock();
        if !matches!(g.state, SessionState::Created | SessionState::Paused) {
            return Err(self.illegal(&g, "update_directives"));
        }
        let directives = patch.apply(&g.directives);
        let instance = if patch.set_request.is_empty() {
            g.instance.clone()
        } else {
            Arc::new(g.instance.with_request_edits(&patch.set_request).map_err(|e| ApiError::invalid_instance(&e))?)
        };
        directives.resolve(&instance).map_err(|e| ApiError::invalid_search(&e))?;
        if let Some(store) = &self.store {
            if !patch.set_request.is_empty() {
                store
                    .save_instance(&self.id, &instance)
                    .map_err(|e| ApiError::internal(format!("persisting instance: {e}")))?;
            }
        }
        g.directives = directives;
        g.instance = instance;
        if g.worker.is_some() {
            g.pending_edits.extend(patch.set_request.iter().cloned());
            g.dirty = true;
        }
        g.revision += 1;
        self.persist(&g);
        Ok(g.revision)
    }

    pub fn directives(&self) -> CellDirectives {
        self.lock().directives.clone()
    }
}

struct Sink {
    handle: Arc<SessionHandle>,
    instance: Arc<Instance>,
    swap: Arc<Mutex<Option<Arc<Instance>>>>,
    soften: Arc<AtomicBool>,
    epoch_base: u64,
    elapsed_base: f64,
}

impl Sink {
    fn on_event(&mut self, e: &Event) {
        match e {
            Event::Incumbent(inc) => self.incumbent(inc),
            Event::Restart { kind: RestartKind::Manual, .. } => {
                if let Some(inst) = self.swap.lock().unwrap().take() {
                    self.instance = inst;
                }
            }
            Event::Rejected { message } => {
                log::warn!("session {}: restart rejected: {message}", self.handle.id);
                self.swap.lock().unwrap().take();
            }
            Event::Paused { at_seconds } => self.handle.paused_at(self.elapsed_base + at_seconds),
            Event::Restart { .. } | Event::Resumed { .. } => {}
        }
    }

    fn incumbent(&self, inc: &Incumbent) {
        let soften = self.soften.load(Ordering::SeqCst);
        let report = Report::new(&evaluate(&inc.roster, &self.instance, soften), &self.instance);
        let roster = inc.roster.to_document(&self.instance);
        let epoch = self.epoch_base + inc.epoch;
        let pushed = self.handle.log.push(|sequence| {
            let mut record = inc.record("#roster");
            record.sequence = sequence;
            record.wall_time_seconds += self.elapsed_base;
            IncumbentEvent {
                sequence,
                epoch,
                record,
                hard_weight: inc.hard_weight,
                prioritized_count: inc.prioritized_count,
                modification_rate: inc.modification_rate(),
                soften_hard: soften,
                roster,
                report,
            }
        });
        if let (Some(ev), Some(store)) = (pushed, &self.handle.store) {
            if let Err(err) = store.append_event(&self.handle.id, &ev) {
                log::error!("session {}: appending event: {err}", self.handle.id);
            }
        }
    }
}
