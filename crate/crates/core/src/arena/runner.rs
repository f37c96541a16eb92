//! Fixed-rate loop owning a [`Match`]. Transports talk to it only through
//! an inbound queue and an outbound sink, and the loop never waits on them.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::mpsc::{Receiver, TryRecvError};
use std::time::Duration;

use super::clock::Clock;
use super::log::MatchLogWriter;
use super::session::Match;
use super::wire::{MatchResult, WireMessage};
use crate::env::CONTROL_HZ;
use crate::error::Result;
use crate::physics::Team;

pub type ClientId = u64;

#[derive(Clone, Debug, PartialEq)]
pub enum Inbound {
    Connect(ClientId),
    Frame(ClientId, String),
    Disconnect(ClientId),
    /// Stop the match at the next tick boundary.
    Shutdown,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outbound {
    Broadcast(WireMessage),
    To(ClientId, WireMessage),
    /// The client broke the protocol; the transport should drop it.
    Drop(ClientId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// End the match once every client that joined has left.
    pub stop_when_empty: bool,
}

#[derive(Clone, Debug, Default)]
struct Client {
    joined: bool,
    side: Option<Team>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub result: MatchResult,
    pub ticks: u64,
    pub states_sent: u64,
}

struct Loop<'a> {
    clients: BTreeMap<ClientId, Client>,
    ever_joined: bool,
    sink: &'a mut dyn FnMut(Outbound),
}

impl Loop<'_> {
    fn frame(&mut self, m: &mut Match, id: ClientId, text: &str) {
        let Some(client) = self.clients.get(&id).cloned() else {
            return;
        };
        let msg = match WireMessage::decode(text) {
            Ok(msg) => msg,
            Err(e) => return self.violation(id, e.to_string()),
        };
        match msg {
            WireMessage::Join { side } => {
                if client.joined {
                    return self.violation(id, "already joined".into());
                }
                if side.is_some_and(|s| s != m.config().human_side) {
                    (self.sink)(Outbound::To(
                        id,
                        WireMessage::error("that side is played by the machine"),
                    ));
                    return;
                }
                self.clients.insert(id, Client { joined: true, side });
                self.ever_joined = true;
                (self.sink)(Outbound::To(
                    id,
                    WireMessage::Joined {
                        side,
                        client: id.to_string(),
                    },
                ));
            }
            WireMessage::Action(action) => {
                let Some(side) = client.side else {
                    (self.sink)(Outbound::To(
                        id,
                        WireMessage::error("join a side before sending actions"),
                    ));
                    return;
                };
                if let Err(e) = m.handle_action(side, &action) {
                    (self.sink)(Outbound::To(id, WireMessage::error(e.to_string())));
                }
            }
            other => {
                let kind = serde_json::to_value(&other)
                    .ok()
                    .and_then(|v| v["type"].as_str().map(str::to_owned));
                self.violation(
                    id,
                    format!("clients may not send {}", kind.unwrap_or_default()),
                );
            }
        }
    }

    fn violation(&mut self, id: ClientId, message: String) {
        (self.sink)(Outbound::To(id, WireMessage::error(message)));
        (self.sink)(Outbound::Drop(id));
        self.clients.remove(&id);
    }
}

/// Runs `m` until a limit is reached or a shutdown arrives, emitting exactly
/// one `state` broadcast per tick and appending one log record per tick.
pub fn run_match<W: Write>(
    m: &mut Match,
    clock: &mut dyn Clock,
    inbox: &Receiver<Inbound>,
    sink: &mut dyn FnMut(Outbound),
    mut log: Option<&mut MatchLogWriter<W>>,
    opts: RunOptions,
) -> Result<RunSummary> {
    let period = 1.0 / CONTROL_HZ;
    let start = clock.now();
    let mut lp = Loop {
        clients: BTreeMap::new(),
        ever_joined: false,
        sink,
    };
    let mut states_sent = 0;
    loop {
        let mut stop = false;
        loop {
            match inbox.try_recv() {
                Ok(Inbound::Connect(id)) => {
                    lp.clients.insert(id, Client::default());
                }
                Ok(Inbound::Frame(id, text)) => lp.frame(m, id, &text),
                Ok(Inbound::Disconnect(id)) => {
                    lp.clients.remove(&id);
                }
                Ok(Inbound::Shutdown) => stop = true,
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
            }
        }
        if opts.stop_when_empty && lp.ever_joined && !lp.clients.values().any(|c| c.joined) {
            stop = true;
        }
        if stop {
            let end = m.abort();
            if let WireMessage::End { result, score } = &end {
                if let Some(log) = log.as_deref_mut() {
                    log.finish(*result, *score)?;
                }
            }
            (lp.sink)(Outbound::Broadcast(end));
            return Ok(RunSummary {
                result: MatchResult::Aborted,
                ticks: m.tick_count(),
                states_sent,
            });
        }

        let out = m.tick()?;
        if let Some(log) = log.as_deref_mut() {
            log.append(&out.record)?;
        }
        (lp.sink)(Outbound::Broadcast(WireMessage::State(out.state)));
        states_sent += 1;
        if let Some(end) = out.end {
            if let WireMessage::End { result, score } = &end {
                if let Some(log) = log.as_deref_mut() {
                    log.finish(*result, *score)?;
                }
            }
            (lp.sink)(Outbound::Broadcast(end));
            return Ok(RunSummary {
                result: m.result().expect("finished"),
                ticks: m.tick_count(),
                states_sent,
            });
        }
        clock.sleep_until(start + Duration::from_secs_f64(m.tick_count() as f64 * period));
    }
}
