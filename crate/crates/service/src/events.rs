use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::{self, error::RecvError};

use nsp_core::constraints::Report;
use nsp_core::model::RosterDocument;
use nsp_core::search::IncumbentRecord;

/// One published incumbent of a session, as stored and streamed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentEvent {
    /// Per-session sequence; `record.sequence` carries the same value.
    pub sequence: u64,
    pub epoch: u64,
    pub record: IncumbentRecord,
    pub hard_weight: u64,
    pub prioritized_count: usize,
    pub modification_rate: Option<f64>,
    pub soften_hard: bool,
    pub roster: RosterDocument,
    pub report: Report,
}

/// What a stream consumer receives.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Incumbent(Arc<IncumbentEvent>),
    /// Events were dropped because the consumer fell behind. The latest
    /// snapshot follows.
    Gap { missed: u64, last_seen: u64 },
    /// The session stopped; nothing follows.
    End,
}

#[derive(Debug, Clone)]
enum Live {
    Event(Arc<IncumbentEvent>),
    Closed,
}

struct LogInner {
    events: Vec<Arc<IncumbentEvent>>,
    next: u64,
    closed: bool,
}

/// Append-only incumbent log with replay and live fan-out.
pub struct EventLog {
    inner: Mutex<LogInner>,
    tx: broadcast::Sender<Live>,
}

impl EventLog {
    pub fn new(capacity: usize, history: Vec<IncumbentEvent>, closed: bool) -> Self {
        let (tx, _) = broadcast::channel(capacity.max(1));
        let next = history.last().map_or(1, |e| e.sequence + 1);
        EventLog {
            inner: Mutex::new(LogInner { events: history.into_iter().map(Arc::new).collect(), next, closed }),
            tx,
        }
    }

    /// Appends the event built for the next sequence number. Returns `None`
    /// once the log is closed.
    pub fn push(&self, build: impl FnOnce(u64) -> IncumbentEvent) -> Option<Arc<IncumbentEvent>> {
        let mut g = self.inner.lock().unwrap();
        if g.closed {
            return None;
        }
        let ev = Arc::new(build(g.next));
        g.next += 1;
        g.events.push(ev.clone());
        let _ = self.tx.send(Live::Event(ev.clone()));
        Some(ev)
    }

    pub fn close(&self) {
        let mut g = self.inner.lock().unwrap();
        if !g.closed {
            g.closed = true;
            let _ = self.tx.send(Live::Closed);
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().unwrap().closed
    }

    pub fn latest(&self) -> Option<Arc<IncumbentEvent>> {
        self.inner.lock().unwrap().events.last().cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<Arc<IncumbentEvent>> {
        self.inner.lock().unwrap().events.clone()
    }

    /// Replays events with `sequence >= from`, then follows the live log.
    pub fn stream(self: &Arc<Self>, from: u64) -> impl Stream<Item = StreamItem> + Send + 'static {
        let (replay, rx, closed) = {
            let g = self.inner.lock().unwrap();
            let replay: VecDeque<StreamItem> = g
                .events
                .iter()
                .filter(|e| e.sequence >= from)
                .map(|e| StreamItem::Incumbent(e.clone()))
                .collect();
            (replay, self.tx.subscribe(), g.closed)
        };
        let state = Follow {
            log: self.clone(),
            queue: replay,
            rx,
            last: from.saturating_sub(1),
            closed,
            done: false,
        };
        stream::unfold(state, |mut s| async move { s.next().await.map(|item| (item, s)) })
    }
}

struct Follow {
    log: Arc<EventLog>,
    queue: VecDeque<StreamItem>,
    rx: broadcast::Receiver<Live>,
    last: u64,
    closed: bool,
    done: bool,
}

impl Follow {
    async fn next(&mut self) -> Option<StreamItem> {
        loop {
            if let Some(item) = self.queue.pop_front() {
                if let StreamItem::Incumbent(e) = &item {
                    self.last = self.last.max(e.sequence);
                }
                return Some(item);
            }
            if self.done {
                return None;
            }
            if self.closed {
                self.done = true;
                return Some(StreamItem::End);
            }
            match self.rx.recv().await {
                Ok(Live::Event(e)) => {
                    if e.sequence > self.last {
                        self.queue.push_back(StreamItem::Incumbent(e));
                    }
                }
                Ok(Live::Closed) | Err(RecvError::Closed) => self.closed = true,
                Err(RecvError::Lagged(missed)) => {
                    // Skip the backlog; events after the snapshot arrive on the new receiver.
                    self.rx = self.rx.resubscribe();
                    self.closed = self.log.is_closed();
                    self.queue.push_back(StreamItem::Gap { missed, last_seen: self.last });
                    if let Some(e) = self.log.latest().filter(|e| e.sequence > self.last) {
                        self.queue.push_back(StreamItem::Incumbent(e));
                    }
                }
            }
        }
    }
}
