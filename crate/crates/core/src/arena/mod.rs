//! Authoritative real-time match runtime: fixed-rate loop, JSON wire
//! protocol, match logs and replay. Network transports live outside this
//! crate and plug into [`run_match`] through queues.

pub mod clock;
pub mod config;
pub mod log;
pub mod runner;
pub mod session;
pub mod wire;

pub use clock::{Clock, MockClock, SystemClock};
pub use config::{MatchConfig, SensingMode};
pub use log::{replay, LogLine, MatchLog, MatchLogWriter};
pub use runner::{run_match, ClientId, Inbound, Outbound, RunOptions, RunSummary};
pub use session::{Match, MatchLogRecord, TickOutput};
pub use wire::{
    owned_rods, ActionMsg, BallWire, MatchResult, RodCommand, RodWire, Score, StateMsg, WireEvent,
    WireMessage, PROTOCOL_VERSION,
};
