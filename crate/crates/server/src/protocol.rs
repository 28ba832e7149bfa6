//! JSON message schema spoken over `/session/{id}`.
//!
//! Every message is an object with a `type` field. A client opens with
//! `hello`; the server answers `hello` with the session descriptor if the
//! session exists, after which snapshots stream.

use retarget_core::qp::QpStatus;
use retarget_core::retarget::{Saturation, WeightPatch};
use retarget_core::runtime::{
    CommandMessage, ContactRecord, EffectorRecord, LogRecord, SwitchRecord, TickStatus, TrackingConfig,
};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Created,
    Live,
    Halted,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionDescriptor {
    pub id: String,
    pub model: String,
    /// Hz
    pub rate: f64,
    /// Hz
    pub broadcast_rate: f64,
    pub clients: usize,
    pub lifecycle: Lifecycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorityAction {
    Acquire,
    Release,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ClientMessage {
    Hello {
        version: u32,
    },
    /// Start the session named in the URL. The creator holds command authority.
    Create {
        model: String,
        #[serde(default)]
        weights: Option<WeightPatch>,
        #[serde(default)]
        tracking: Option<TrackingConfig>,
        #[serde(default)]
        rate: Option<f64>,
        #[serde(default)]
        broadcast_rate: Option<f64>,
    },
    Authority {
        action: AuthorityAction,
    },
    Command {
        command: CommandMessage,
    },
}

/// State broadcast at the session's broadcast rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    pub tick: u64,
    pub time: f64,
    pub lifecycle: Lifecycle,
    pub status: TickStatus,
    pub qp_status: Option<QpStatus>,
    /// Joint torques of the desired state.
    pub tau: Vec<f64>,
    pub effectors: Vec<EffectorRecord>,
    /// Wrenches (λ), CoP, friction ratio (η), normal share, switch progress
    /// and the max-force gauge.
    pub contacts: Vec<ContactRecord>,
    pub saturated: Vec<Saturation>,
    pub equilibrium_residual: f64,
    pub contact_residual: f64,
    pub tracking_residual: f64,
    /// Switch events since the previous snapshot.
    pub events: Vec<SwitchRecord>,
}

impl Snapshot {
    pub fn from_record(r: &LogRecord, lifecycle: Lifecycle, events: Vec<SwitchRecord>) -> Self {
        Self {
            tick: r.tick,
            time: r.time,
            lifecycle,
            status: r.status,
            qp_status: r.qp_status,
            tau: r.tau.clone(),
            effectors: r.effectors.clone(),
            contacts: r.contacts.clone(),
            saturated: r.saturated.clone(),
            equilibrium_residual: r.equilibrium_residual,
            contact_residual: r.contact_residual,
            tracking_residual: r.tracking_residual,
            events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ServerMessage {
    Hello {
        version: u32,
        /// `None` until someone creates the session.
        session: Option<SessionDescriptor>,
    },
    Session {
        descriptor: SessionDescriptor,
        authority: bool,
    },
    Authority {
        held: bool,
    },
    /// The command with this sequence number was accepted.
    Ack {
        seq: u64,
    },
    Snapshot(Snapshot),
    Lifecycle {
        lifecycle: Lifecycle,
        #[serde(default)]
        reason: Option<String>,
    },
    Error {
        code: String,
        text: String,
        #[serde(default)]
        seq: Option<u64>,
    },
}

impl ServerMessage {
    pub fn error(code: &str, text: impl Into<String>) -> Self {
        Self::Error { code: code.into(), text: text.into(), seq: None }
    }
}
