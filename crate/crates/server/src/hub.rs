//! Live sessions: one tick thread per session, commands in through an
//! ordered channel, snapshots out through a drop-to-latest watch channel.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;

use retarget_core::runtime::{Clock, CommandError, CommandMessage, Session, SessionSetup, WallClock};
use tokio::sync::{broadcast, oneshot, watch};

use crate::protocol::{Lifecycle, ServerMessage, SessionDescriptor, Snapshot};

/// Refresh rate of the max-force gauge, Hz. Each refresh solves one LP per
/// active contact inside the tick.
pub const GAUGE_RATE: f64 = 20.0;

pub(crate) enum Control {
    Command(CommandMessage, oneshot::Sender<Result<(), CommandError>>),
}

struct Status {
    lifecycle: Lifecycle,
    clients: usize,
    authority: Option<u64>,
}

pub struct LiveSession {
    id: String,
    model: String,
    rate: f64,
    broadcast_rate: f64,
    status: Mutex<Status>,
    control: Mutex<mpsc::Sender<Control>>,
    snapshots: watch::Sender<Option<Arc<Snapshot>>>,
    /// Lifecycle changes and other rare notices.
    events: broadcast::Sender<ServerMessage>,
    closing: Arc<AtomicBool>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl LiveSession {
    /// Start the tick thread for `setup`. Snapshots go out every
    /// `rate / broadcast_rate` ticks; the gauge refreshes at [`GAUGE_RATE`] at most.
    pub fn start(id: &str, model: &str, setup: SessionSetup, broadcast_rate: f64) -> Result<Arc<Self>, String> {
        let rate = setup.config.rate;
        if !(broadcast_rate > 0.0 && broadcast_rate <= rate) {
            return Err(format!("broadcast rate must be in (0, {rate}] Hz, got {broadcast_rate}"));
        }
        let every = (rate / broadcast_rate).round().max(1.0) as u64;
        let mut setup = setup;
        setup.config.probe = setup.model.end_effectors.iter().map(|e| e.name.clone()).collect();
        setup.config.probe_interval = every.max((rate / GAUGE_RATE).round() as u64);
        let session = Session::new(setup).map_err(|e| e.to_string())?;

        let (control, rx) = mpsc::channel();
        let live = Arc::new(Self {
            id: id.to_string(),
            model: model.to_string(),
            rate,
            broadcast_rate: rate / every as f64,
            status: Mutex::new(Status { lifecycle: Lifecycle::Created, clients: 0, authority: None }),
            control: Mutex::new(control),
            snapshots: watch::Sender::new(None),
            events: broadcast::Sender::new(16),
            closing: Arc::new(AtomicBool::new(false)),
            thread: Mutex::new(None),
        });
        let worker = Arc::clone(&live);
        let handle = std::thread::Builder::new()
            .name(format!("tick-{id}"))
            .spawn(move || worker.run(session, rx, every))
            .map_err(|e| e.to_string())?;
        *live.thread.lock().unwrap() = Some(handle);
        Ok(live)
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        let s = self.status.lock().unwrap();
        SessionDescriptor {
            id: self.id.clone(),
            model: self.model.clone(),
            rate: self.rate,
            broadcast_rate: self.broadcast_rate,
            clients: s.clients,
            lifecycle: s.lifecycle,
        }
    }

    pub fn subscribe(&self) -> (watch::Receiver<Option<Arc<Snapshot>>>, broadcast::Receiver<ServerMessage>) {
        (self.snapshots.subscribe(), self.events.subscribe())
    }

    pub(crate) fn attach(&self) {
        self.status.lock().unwrap().clients += 1;
    }

    /// Remaining client count.
    pub(crate) fn detach(&self, client: u64) -> usize {
        let mut s = self.status.lock().unwrap();
        s.clients -= 1;
        if s.authority == Some(client) {
            s.authority = None;
        }
        s.clients
    }

    pub(crate) fn client_count(&self) -> usize {
        self.status.lock().unwrap().clients
    }

    /// Grant authority if nobody else holds it.
    pub(crate) fn acquire(&self, client: u64) -> bool {
        let mut s = self.status.lock().unwrap();
        match s.authority {
            Some(holder) => holder == client,
            None => {
                s.authority = Some(client);
                true
            }
        }
    }

    pub(crate) fn release(&self, client: u64) {
        let mut s = self.status.lock().unwrap();
        if s.authority == Some(client) {
            s.authority = None;
        }
    }

    pub(crate) fn holds_authority(&self, client: u64) -> bool {
        self.status.lock().unwrap().authority == Some(client)
    }

    /// Hand a command to the tick thread; resolves after the tick boundary
    /// at which it was applied.
    pub(crate) async fn command(&self, msg: CommandMessage) -> Result<(), CommandError> {
        let (tx, rx) = oneshot::channel();
        let sent = self.control.lock().unwrap().send(Control::Command(msg, tx));
        if sent.is_err() {
            return Err(CommandError::Halted("session closed".into()));
        }
        rx.await.unwrap_or_else(|_| Err(CommandError::Halted("session closed".into())))
    }

    pub fn close(&self) {
        self.closing.store(true, Ordering::SeqCst);
        if let Some(handle) = self.thread.lock().unwrap().take() {
            let _ = handle.join();
        }
        self.set_lifecycle(Lifecycle::Closed, None);
    }

    fn set_lifecycle(&self, lifecycle: Lifecycle, reason: Option<String>) {
        let changed = {
            let mut s = self.status.lock().unwrap();
            std::mem::replace(&mut s.lifecycle, lifecycle) != lifecycle
        };
        if changed {
            let _ = self.events.send(ServerMessage::Lifecycle { lifecycle, reason });
        }
    }

    fn lifecycle(&self) -> Lifecycle {
        self.status.lock().unwrap().lifecycle
    }

    fn run(&self, mut session: Session, control: mpsc::Receiver<Control>, every: u64) {
        let dt = session.config().dt();
        let mut clock = WallClock::default();
        let mut period = 0u64;
        let mut events = Vec::new();
        while !self.closing.load(Ordering::SeqCst) {
            // Commands queued before this tick boundary apply to this tick.
            while let Ok(Control::Command(msg, reply)) = control.try_recv() {
                let result = session.ingest(&msg);
                if result.is_ok() && session.halted().is_none() && self.lifecycle() == Lifecycle::Halted {
                    self.set_lifecycle(Lifecycle::Live, None);
                }
                let _ = reply.send(result);
            }
            if session.halted().is_none() {
                match session.tick() {
                    Ok(record) => {
                        if self.lifecycle() == Lifecycle::Created {
                            self.set_lifecycle(Lifecycle::Live, None);
                        }
                        events.extend(record.events.iter().cloned());
                        if record.tick % every == 0 {
                            let snap = Snapshot::from_record(&record, self.lifecycle(), std::mem::take(&mut events));
                            self.snapshots.send_replace(Some(Arc::new(snap)));
                        }
                    }
                    Err(e) => self.set_lifecycle(Lifecycle::Halted, Some(e.to_string())),
                }
            }
            period += 1;
            clock.wait_until(period as f64 * dt);
        }
    }
}

/// All sessions of one server.
#[derive(Default)]
pub struct Hub {
    sessions: Mutex<HashMap<String, Arc<LiveSession>>>,
}

impl Hub {
    pub fn get(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }

    /// Insert unless `id` is taken.
    pub(crate) fn insert(&self, live: Arc<LiveSession>) -> Result<(), Arc<LiveSession>> {
        let mut map = self.sessions.lock().unwrap();
        if map.contains_key(&live.id) {
            return Err(live);
        }
        map.insert(live.id.clone(), live);
        Ok(())
    }

    /// Close and drop `id` if it still has no clients.
    pub(crate) fn close_if_idle(&self, id: &str) {
        let live = {
            let mut map = self.sessions.lock().unwrap();
            match map.get(id) {
                Some(s) if s.client_count() == 0 => map.remove(id),
                _ => None,
            }
        };
        if let Some(live) = live {
            live.close();
        }
    }

    pub fn close_all(&self) {
        let all: Vec<_> = self.sessions.lock().unwrap().drain().map(|(_, s)| s).collect();
        for s in all {
            s.close();
        }
    }
}
