//! JSON wire protocol spoken between the match loop and its clients.
//!
//! Every frame is a JSON object carrying `protocol_version` and a `type` tag.
//! Rod targets on the wire are in world coordinates: `+1` drives a joint to
//! the top of its world range whichever side sends it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{StepEvents, TableConfig, Team, WorldState, NUM_RODS};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallWire {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodWire {
    pub p: f64,
    pub p_dot: f64,
    pub theta: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub white: u32,
    pub black: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireEvent {
    /// Goal scored against `against`.
    Goal {
        against: Team,
    },
    BallOut,
    Touch {
        rod: usize,
    },
    /// Ball re-spawned after a goal, dead ball or stalled rally.
    Kickoff,
}

impl WireEvent {
    pub fn from_step(events: &StepEvents) -> Vec<WireEvent> {
        let mut out = Vec::new();
        if let Some(against) = events.goal {
            out.push(WireEvent::Goal { against });
        }
        if events.ball_out {
            out.push(WireEvent::BallOut);
        }
        let mut rods: Vec<usize> = events.contacts.iter().map(|c| c.rod).collect();
        rods.dedup();
        out.extend(rods.into_iter().map(|rod| WireEvent::Touch { rod }));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub tick: u64,
    pub time_s: f64,
    pub ball: BallWire,
    pub rods: Vec<RodWire>,
    pub score: Score,
    pub events: Vec<WireEvent>,
    /// Ticks left before play resumes after a goal; absent during play.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countdown: Option<u32>,
}

impl StateMsg {
    pub fn from_world(
        tick: u64,
        time_s: f64,
        world: &WorldState,
        score: Score,
        events: Vec<WireEvent>,
    ) -> Self {
        let b = &world.ball;
        StateMsg {
            tick,
            time_s,
            ball: BallWire {
                x: b.position.x,
                y: b.position.y,
                vx: b.velocity.x,
                vy: b.velocity.y,
            },
            rods: world
                .rods
                .iter()
                .map(|r| RodWire {
                    p: r.prismatic.position,
                    p_dot: r.prismatic.velocity,
                    theta: r.revolute.position,
                    omega: r.revolute.velocity,
                })
                .collect(),
            score,
            events,
            countdown: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodCommand {
    /// Table rod index, `0..8`.
    pub rod: usize,
    pub prismatic: f64,
    pub revolute: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionMsg {
    #[serde(default)]
    pub client: Option<String>,
    pub targets: Vec<RodCommand>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchResult {
    WhiteWins,
    BlackWins,
    Draw,
    /// A replayed log ended without its closing record.
    Truncated,
    /// The loop was stopped before a limit was reached.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    State(StateMsg),
    Action(ActionMsg),
    /// `side: None` joins as a spectator.
    Join {
        #[serde(default)]
        side: Option<Team>,
    },
    Joined {
        side: Option<Team>,
        client: String,
    },
    End {
        result: MatchResult,
        score: Score,
    },
    Error {
        message: String,
    },
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    protocol_version: u32,
    #[serde(flatten)]
    msg: &'a WireMessage,
}

#[derive(Deserialize)]
struct Envelope {
    protocol_version: u32,
    #[serde(flatten)]
    msg: WireMessage,
}

impl WireMessage {
    pub fn encode(&self) -> String {
        serde_json::to_string(&EnvelopeRef {
            protocol_version: PROTOCOL_VERSION,
            msg: self,
        })
        .expect("wire message serialises")
    }

    /// Parses a frame, rejecting other protocol versions.
    pub fn decode(text: &str) -> Result<WireMessage> {
        let env: Envelope =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("bad frame: {e}")))?;
        if env.protocol_version != PROTOCOL_VERSION {
            return Err(Error::Incompatible(format!(
                "protocol_version {} (expected {PROTOCOL_VERSION})",
                env.protocol_version
            )));
        }
        Ok(env.msg)
    }

    pub fn error(message: impl Into<String>) -> Self {
        WireMessage::Error {
            message: message.into(),
        }
    }
}

/// Rod indices owned by `side`.
pub fn owned_rods(table: &TableConfig, side: Team) -> Vec<usize> {
    (0..NUM_RODS)
        .filter(|&i| table.rods[i].team == side)
        .collect()
}
