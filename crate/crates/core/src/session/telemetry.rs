//! Snapshot and transcript fan-out for stream subscribers.

use std::sync::{Arc, Mutex};

use serde::Serialize;
use tokio::sync::broadcast;

use super::{Observer, Update};
use crate::agent::TranscriptEntry;
use crate::geometry::Pose;
use crate::world::{MassClass, Shape, World};

pub const SCHEMA_VERSION: u32 = 1;
const CHANNEL_CAPACITY: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotView {
    pub id: String,
    pub pose: Pose,
    pub footprint: f64,
    pub moving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectView {
    pub id: String,
    pub pose: Pose,
    pub shape: Shape,
    pub mass_class: MassClass,
}

/// Compact world state for clients; trails are accumulated client-side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldView {
    pub clock_ms: f64,
    pub table_size_mm: f64,
    pub grid_n: u32,
    pub robots: Vec<RobotView>,
    pub objects: Vec<ObjectView>,
}

impl WorldView {
    pub fn of(w: &World) -> Self {
        Self {
            clock_ms: w.clock_ms,
            table_size_mm: w.cfg.table_size,
            grid_n: w.cfg.grid_n,
            robots: w
                .robots
                .values()
                .map(|r| RobotView { id: r.id.clone(), pose: r.pose, footprint: r.footprint, moving: !r.is_idle() })
                .collect(),
            objects: w
                .objects
                .values()
                .map(|o| ObjectView { id: o.id.clone(), pose: o.pose, shape: o.shape, mass_class: o.mass_class })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FrameBody {
    Snapshot { world: WorldView },
    /// Periodic repeat of the last snapshot while nothing changes.
    Heartbeat { world: WorldView },
    Transcript { entry: TranscriptEntry },
}

#[derive(Debug, Clone, Serialize)]
pub struct Frame<'a> {
    pub schema_version: u32,
    pub seq: u64,
    pub session: &'a str,
    #[serde(flatten)]
    pub body: FrameBody,
}

struct State {
    seq: u64,
    last: Option<WorldView>,
}

/// Serializes frames once and broadcasts the same text to all subscribers.
pub struct Telemetry {
    session: String,
    tx: broadcast::Sender<Arc<str>>,
    state: Mutex<State>,
}

impl Telemetry {
    pub fn new(session: impl Into<String>) -> Arc<Self> {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Arc::new(Self { session: session.into(), tx, state: Mutex::new(State { seq: 0, last: None }) })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<str>> {
        self.tx.subscribe()
    }

    fn publish(&self, st: &mut State, body: FrameBody) {
        st.seq += 1;
        let frame = Frame { schema_version: SCHEMA_VERSION, seq: st.seq, session: &self.session, body };
        let text: Arc<str> = serde_json::to_string(&frame).expect("frames serialize").into();
        // no receivers is fine
        let _ = self.tx.send(text);
    }

    pub fn snapshot(&self, w: &World) {
        let view = WorldView::of(w);
        let mut st = self.state.lock().expect("telemetry lock");
        st.last = Some(view.clone());
        self.publish(&mut st, FrameBody::Snapshot { world: view });
    }

    pub fn entry(&self, e: &TranscriptEntry) {
        let mut st = self.state.lock().expect("telemetry lock");
        self.publish(&mut st, FrameBody::Transcript { entry: e.clone() });
    }

    pub fn heartbeat(&self) {
        let mut st = self.state.lock().expect("telemetry lock");
        if let Some(view) = st.last.clone() {
            self.publish(&mut st, FrameBody::Heartbeat { world: view });
        }
    }

    pub fn last_view(&self) -> Option<WorldView> {
        self.state.lock().expect("telemetry lock").last.clone()
    }

    pub fn observer(self: &Arc<Self>) -> Observer {
        let t = Arc::clone(self);
        Arc::new(move |u: Update<'_>| match u {
            Update::Tick(w) => t.snapshot(w),
            Update::Entry(e) => t.entry(e),
        })
    }
}
