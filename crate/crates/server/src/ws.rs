//! One WebSocket connection: a reader applying client messages in order and
//! a writer merging replies with the session's snapshot stream.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket};
use futures_util::stream::{SplitSink, SplitStream};
use futures_util::{SinkExt, StreamExt};
use retarget_core::runtime::SessionSetup;
use tokio::sync::{broadcast, mpsc, watch};

use crate::hub::LiveSession;
use crate::protocol::{AuthorityAction, ClientMessage, ServerMessage, Snapshot, PROTOCOL_VERSION};
use crate::AppState;

static NEXT_CLIENT: AtomicU64 = AtomicU64::new(1);

enum Outgoing {
    Message(ServerMessage),
    Attach(Arc<LiveSession>),
}

pub(crate) async fn handle(socket: WebSocket, app: AppState, id: String) {
    let client = NEXT_CLIENT.fetch_add(1, Ordering::Relaxed);
    let (sink, stream) = socket.split();
    let (out, rx) = mpsc::channel(64);
    let writer = tokio::spawn(write_loop(sink, rx));
    let attached = read_loop(stream, &out, &app, &id, client).await;
    drop(out);
    let _ = writer.await;
    if let Some(live) = attached {
        if live.detach(client) == 0 {
            let hub = Arc::clone(&app.hub);
            let linger = app.config.linger;
            tokio::spawn(async move {
                tokio::time::sleep(linger).await;
                tokio::task::spawn_blocking(move || hub.close_if_idle(&id)).await.ok();
            });
        }
    }
}

async fn send(out: &mpsc::Sender<Outgoing>, msg: ServerMessage) {
    let _ = out.send(Outgoing::Message(msg)).await;
}

/// Returns the session this client was attached to.
async fn read_loop(
    mut stream: SplitStream<WebSocket>,
    out: &mpsc::Sender<Outgoing>,
    app: &AppState,
    id: &str,
    client: u64,
) -> Option<Arc<LiveSession>> {
    let mut greeted = false;
    let mut live: Option<Arc<LiveSession>> = None;
    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            Message::Binary(_) => {
                send(out, ServerMessage::error("malformed", "binary frames are not part of the protocol")).await;
                continue;
            }
            _ => continue,
        };
        let msg: ClientMessage = match serde_json::from_str(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                send(out, ServerMessage::error("malformed", e.to_string())).await;
                continue;
            }
        };
        match msg {
            ClientMessage::Hello { version } => {
                if version != PROTOCOL_VERSION {
                    send(
                        out,
                        ServerMessage::error(
                            "version_mismatch",
                            format!("server speaks version {PROTOCOL_VERSION}, client sent {version}"),
                        ),
                    )
                    .await;
                    continue;
                }
                greeted = true;
                if live.is_none() {
                    if let Some(existing) = app.hub.get(id) {
                        existing.attach();
                        let _ = out.send(Outgoing::Attach(Arc::clone(&existing))).await;
                        live = Some(existing);
                    }
                }
                let session = live.as_ref().map(|s| s.descriptor());
                send(out, ServerMessage::Hello { version: PROTOCOL_VERSION, session }).await;
            }
            _ if !greeted => send(out, ServerMessage::error("handshake_required", "send hello first")).await,
            ClientMessage::Create { model, weights, tracking, rate, broadcast_rate } => {
                if live.is_some() {
                    send(out, ServerMessage::error("session_exists", format!("session `{id}` already exists"))).await;
                    continue;
                }
                let broadcast = broadcast_rate.unwrap_or(app.config.broadcast_rate);
                let started = tokio::task::spawn_blocking({
                    let id = id.to_string();
                    move || create(&id, &model, weights, tracking, rate, broadcast)
                })
                .await
                .unwrap_or_else(|e| Err(e.to_string()));
                let created = match started {
                    Ok(s) => s,
                    Err(text) => {
                        send(out, ServerMessage::error("invalid_session", text)).await;
                        continue;
                    }
                };
                if let Err(loser) = app.hub.insert(Arc::clone(&created)) {
                    tokio::task::spawn_blocking(move || loser.close());
                    send(out, ServerMessage::error("session_exists", format!("session `{id}` already exists"))).await;
                    continue;
                }
                created.attach();
                let authority = created.acquire(client);
                let _ = out.send(Outgoing::Attach(Arc::clone(&created))).await;
                send(out, ServerMessage::Session { descriptor: created.descriptor(), authority }).await;
                live = Some(created);
            }
            ClientMessage::Authority { action } => {
                let Some(s) = &live else {
                    send(out, ServerMessage::error("no_session", format!("session `{id}` does not exist"))).await;
                    continue;
                };
                match action {
                    AuthorityAction::Acquire if s.acquire(client) => {
                        send(out, ServerMessage::Authority { held: true }).await
                    }
                    AuthorityAction::Acquire => {
                        send(out, ServerMessage::error("authority_held", "another client holds command authority"))
                            .await
                    }
                    AuthorityAction::Release => {
                        s.release(client);
                        send(out, ServerMessage::Authority { held: false }).await
                    }
                }
            }
            ClientMessage::Command { command } => {
                let Some(s) = &live else {
                    send(out, ServerMessage::error("no_session", format!("session `{id}` does not exist"))).await;
                    continue;
                };
                let seq = command.seq;
                if !s.holds_authority(client) {
                    let text = "command authority is held by another client or not requested".to_string();
                    send(out, ServerMessage::Error { code: "not_authority".into(), text, seq: Some(seq) }).await;
                    continue;
                }
                let reply = match s.command(command).await {
                    Ok(()) => ServerMessage::Ack { seq },
                    Err(e) => ServerMessage::Error { code: e.code().into(), text: e.to_string(), seq: Some(seq) },
                };
                send(out, reply).await;
            }
        }
    }
    live
}

fn create(
    id: &str,
    model: &str,
    weights: Option<retarget_core::retarget::WeightPatch>,
    tracking: Option<retarget_core::runtime::TrackingConfig>,
    rate: Option<f64>,
    broadcast_rate: f64,
) -> Result<Arc<LiveSession>, String> {
    // Only bundled models: clients never name server-side files.
    let mut setup = SessionSetup::bundled(model).map_err(|e| e.to_string())?;
    if let Some(patch) = weights {
        setup.weights.apply(&patch).map_err(|e| e.to_string())?;
    }
    if let Some(t) = tracking {
        setup.tracking = t;
    }
    if let Some(r) = rate {
        setup.config.rate = r;
    }
    setup.config.validate().map_err(|e| e.to_string())?;
    LiveSession::start(id, model, setup, broadcast_rate)
}

async fn write_loop(mut sink: SplitSink<WebSocket, Message>, mut rx: mpsc::Receiver<Outgoing>) {
    let mut snapshots: Option<watch::Receiver<Option<Arc<Snapshot>>>> = None;
    let mut events: Option<broadcast::Receiver<ServerMessage>> = None;
    let mut last_tick: Option<u64> = None;
    loop {
        let msg = tokio::select! {
            biased;
            item = rx.recv() => match item {
                None => break,
                Some(Outgoing::Message(m)) => m,
                Some(Outgoing::Attach(s)) => {
                    let (snap, ev) = s.subscribe();
                    snapshots = Some(snap);
                    events = Some(ev);
                    continue;
                }
            },
            ev = async { events.as_mut().unwrap().recv().await }, if events.is_some() => match ev {
                Ok(m) => m,
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => {
                    events = None;
                    continue;
                }
            },
            changed = async { snapshots.as_mut().unwrap().changed().await }, if snapshots.is_some() => {
                if changed.is_err() {
                    snapshots = None;
                    continue;
                }
                let latest = snapshots.as_mut().unwrap().borrow_and_update().clone();
                match latest {
                    // Only the newest state is sent; older ones were dropped.
                    Some(s) if last_tick.is_none_or(|t| s.tick > t) => {
                        last_tick = Some(s.tick);
                        ServerMessage::Snapshot(Snapshot::clone(&s))
                    }
                    _ => continue,
                }
            }
        };
        let text = match serde_json::to_string(&msg) {
            Ok(t) => t,
            Err(_) => continue,
        };
        if sink.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
    let _ = sink.close().await;
}

pub(crate) const DEFAULT_LINGER: Duration = Duration::from_secs(30);
