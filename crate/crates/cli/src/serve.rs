//! WebSocket transport for the match loop.
//!
//! The loop runs on its own thread and owns the match. Socket tasks push
//! frames into its inbound queue; states fan out through a bounded broadcast
//! channel, so a slow client skips frames instead of stalling the loop.

use std::collections::HashMap;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde_json::json;
use tokio::sync::{broadcast, mpsc};

use foosball::arena::{
    run_match, ClientId, Inbound, Match, MatchConfig, MatchLogWriter, Outbound, RunOptions,
    SystemClock, PROTOCOL_VERSION,
};

use crate::{describe, CliResult, Failure, ServeArgs};

const BROADCAST_DEPTH: usize = 64;

enum Direct {
    Text(String),
    Close,
}

#[derive(Clone)]
struct Hub {
    inbox: Sender<Inbound>,
    states: broadcast::Sender<Arc<str>>,
    direct: Arc<Mutex<HashMap<ClientId, mpsc::UnboundedSender<Direct>>>>,
    next_id: Arc<AtomicU64>,
    info: Arc<serde_json::Value>,
}

pub fn serve(
    out_dir: &Option<PathBuf>,
    seed: Option<u64>,
    mut cfg: MatchConfig,
    a: &ServeArgs,
) -> CliResult {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    // refuse to start on a bad checkpoint before binding anything
    let mut game = Match::from_config(cfg.clone())?;
    let log_path = a.log.clone().unwrap_or_else(|| match out_dir {
        Some(d) => d.join("match.jsonl"),
        None => PathBuf::from("match.jsonl"),
    });
    if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut log = MatchLogWriter::new(BufWriter::new(std::fs::File::create(&log_path)?));

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind(&a.bind))
        .map_err(|e| Failure::new("io", format!("cannot bind {}: {e}", a.bind)))?;
    let addr = listener.local_addr()?;

    let (inbox_tx, inbox_rx) = std::sync::mpsc::channel();
    let (states, _) = broadcast::channel::<Arc<str>>(BROADCAST_DEPTH);
    let mut info = describe(&cfg);
    info["protocol_version"] = json!(PROTOCOL_VERSION);
    let hub = Hub {
        inbox: inbox_tx,
        states: states.clone(),
        direct: Arc::default(),
        next_id: Arc::new(AtomicU64::new(1)),
        info: Arc::new(info.clone()),
    };
    println!(
        "{}",
        json!({ "event": "listening", "addr": addr.to_string(), "match": info })
    );

    let (done_tx, done_rx) = tokio::sync::oneshot::channel::<()>();
    let app = Router::new()
        .route("/", get(index))
        .route("/ws", get(upgrade))
        .with_state(hub.clone());
    let server = rt.spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = done_rx.await;
            })
            .await
    });

    let opts = RunOptions {
        stop_when_empty: a.exit_when_empty,
    };
    let direct = hub.direct.clone();
    let summary = std::thread::scope(|s| {
        let (game, log, states, direct) = (&mut game, &mut log, &states, &direct);
        s.spawn(move || {
            let mut sink = |o: Outbound| match o {
                Outbound::Broadcast(msg) => {
                    let _ = states.send(Arc::from(msg.encode()));
                }
                Outbound::To(id, msg) => {
                    if let Some(tx) = direct.lock().expect("client map").get(&id) {
                        let _ = tx.send(Direct::Text(msg.encode()));
                    }
                }
                Outbound::Drop(id) => {
                    if let Some(tx) = direct.lock().expect("client map").remove(&id) {
                        let _ = tx.send(Direct::Close);
                    }
                }
            };
            run_match(
                game,
                &mut SystemClock::new(),
                &inbox_rx,
                &mut sink,
                Some(log),
                opts,
            )
        })
        .join()
        .expect("match loop panicked")
    })?;
    log.flush()?;
    drop(log);

    // let sockets drain the final end message before closing
    rt.block_on(async { tokio::time::sleep(std::time::Duration::from_millis(100)).await });
    for (_, tx) in hub.direct.lock().expect("client map").drain() {
        let _ = tx.send(Direct::Close);
    }
    let _ = done_tx.send(());
    rt.block_on(async {
        let _ = tokio::time::timeout(std::time::Duration::from_secs(2), server).await;
    });
    rt.shutdown_timeout(std::time::Duration::from_secs(1));
    crate::print_json(&json!({
        "event": "finished",
        "result": summary.result,
        "ticks": summary.ticks,
        "states_sent": summary.states_sent,
        "log": log_path,
    }))
}

async fn index(State(hub): State<Hub>) -> impl IntoResponse {
    Json((*hub.info).clone())
}

async fn upgrade(ws: WebSocketUpgrade, State(hub): State<Hub>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, hub))
}

async fn client(socket: WebSocket, hub: Hub) {
    let id = hub.next_id.fetch_add(1, Ordering::Relaxed);
    let (direct_tx, mut direct_rx) = mpsc::unbounded_channel();
    hub.direct.lock().expect("client map").insert(id, direct_tx);
    let mut states = hub.states.subscribe();
    if hub.inbox.send(Inbound::Connect(id)).is_err() {
        return;
    }
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            state = states.recv() => match state {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            direct = direct_rx.recv() => match direct {
                Some(Direct::Text(text)) => {
                    if tx.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Some(Direct::Close) | None => {
                    // flush states already queued, such as the end message
                    while let Ok(text) = states.try_recv() {
                        let _ = tx.send(Message::Text(text.as_ref().into())).await;
                    }
                    let _ = tx.send(Message::Close(None)).await;
                    break;
                }
            },
            frame = rx.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    if hub.inbox.send(Inbound::Frame(id, text.to_string())).is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let _ = hub.inbox.send(Inbound::Frame(id, String::new()));
                }
                Some(Ok(_)) => {}
                Some(Err(_)) | None => break,
            },
        }
    }
    hub.direct.lock().expect("client map").remove(&id);
    let _ = hub.inbox.send(Inbound::Disconnect(id));
}
