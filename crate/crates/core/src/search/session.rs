use std::sync::mpsc::{channel, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::{CellDirectives, Control, Engine, Event, SearchConfig, SearchError, SearchOutcome};
use crate::model::Instance;

/// A search running on its own worker thread. Control messages go through
/// an ordered mailbox; events reach `sink` on the worker thread.
pub struct Session {
    tx: Sender<Control>,
    worker: Option<JoinHandle<SearchOutcome>>,
}

impl Session {
    /// Validates the inputs on the calling thread, then starts the worker.
    pub fn start<F>(
        instance: Arc<Instance>,
        config: SearchConfig,
        directives: &CellDirectives,
        mut sink: F,
    ) -> Result<Session, SearchError>
    where
        F: FnMut(&Event) + Send + 'static,
    {
        let mut engine = Engine::new(instance, config, directives)?;
        let (tx, rx) = channel();
        let worker = std::thread::Builder::new()
            .name("nsp-search".into())
            .spawn(move || engine.run(Some(&rx), &mut sink))
            .expect("spawn search worker");
        Ok(Session { tx, worker: Some(worker) })
    }

    /// Queues a message. Returns false once the worker has finished.
    pub fn send(&self, msg: Control) -> bool {
        self.tx.send(msg).is_ok()
    }

    pub fn is_finished(&self) -> bool {
        self.worker.as_ref().is_none_or(|w| w.is_finished())
    }

    /// Waits for the worker to finish.
    pub fn join(mut self) -> SearchOutcome {
        self.worker
            .take()
            .expect("worker present until joined")
            .join()
            .expect("search worker panicked")
    }

    /// Sends a stop and waits.
    pub fn stop(self) -> SearchOutcome {
        self.send(Control::Stop);
        self.join()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(w) = self.worker.take() {
            let _ = self.tx.send(Control::Stop);
            let _ = w.join();
        }
    }
}
