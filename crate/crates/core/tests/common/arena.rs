//! Scripted match harness driven by a mock clock.

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::mpsc::{channel, Sender};
use std::time::Duration;

use foosball::arena::*;
use foosball::env::TaskKind;
use foosball::physics::{RodRole, TableConfig, Team};
use foosball::ppo::{NetShape, Policy};

/// Mock clock whose reading is visible to the sink.
pub struct SharedClock(Rc<Cell<Duration>>);

impl Clock for SharedClock {
    fn now(&self) -> Duration {
        self.0.get()
    }
    fn sleep_until(&mut self, t: Duration) {
        if t > self.0.get() {
            self.0.set(t);
        }
    }
}

pub fn base_cfg() -> MatchConfig {
    MatchConfig {
        seed: 11,
        time_limit_s: 20.0,
        score_limit: 0,
        kickoff_pause_s: 0.5,
        ..Default::default()
    }
}

pub fn kvk_policy(seed: u64) -> Policy {
    let spec = foosball::env::TaskSpec::preset(TaskKind::KeeperVsKeeper);
    Policy::new(
        &NetShape::new(spec.obs_dim(), &[32, 32], spec.action_dim(Team::Black)),
        seed,
    )
}

/// Scripted White keeper: lines up behind a resting ball and strikes past
/// the opposing keeper.
pub fn striker(state: &StateMsg, table: &TableConfig) -> RodCommand {
    let k = table.rod_index(Team::White, RodRole::Keeper);
    let rod = &table.rods[k];
    let (bx, by) = (state.ball.x, state.ball.y);
    let gx = table.half_length();
    // beside the centred opposing keeper
    let aim_y = if by >= 0.0 { 0.06 } else { -0.06 };
    let phi = (aim_y - by).atan2(gx - bx);
    let fy = by - (rod.foot_radius + table.ball_radius) * phi.sin();
    let p = rod.prismatic_limits();
    let a = ((fy - rod.figurine_base_y(0) - p.mid()) / p.half_width()).clamp(-1.0, 1.0);
    let aligned = (state.rods[k].p - (fy - rod.figurine_base_y(0))).abs() < 0.002;
    let near = bx > rod.x_position && bx - rod.x_position < 0.07;
    let revolute = if near && aligned {
        1.0 / (4.0 * std::f64::consts::PI)
    } else {
        0.0
    };
    RodCommand {
        rod: k,
        prismatic: a,
        revolute,
    }
}

pub struct MatchOutcome {
    pub states: Vec<StateMsg>,
    pub directed: Vec<(ClientId, WireMessage)>,
    pub dropped: Vec<ClientId>,
    pub end: Option<WireMessage>,
    pub summary: RunSummary,
    pub log: Vec<u8>,
    pub stamps: Vec<Duration>,
}

/// Runs a match where client 1 joins White and plays `script` in reply to
/// every broadcast state.
pub fn run_scripted(
    cfg: MatchConfig,
    machine: Option<Policy>,
    script: impl Fn(&StateMsg) -> Option<String>,
) -> MatchOutcome {
    let mut m = Match::new(cfg, machine).unwrap();
    let (tx, rx) = channel();
    tx.send(Inbound::Connect(1)).unwrap();
    tx.send(Inbound::Frame(
        1,
        WireMessage::Join {
            side: Some(Team::White),
        }
        .encode(),
    ))
    .unwrap();
    let now = Rc::new(Cell::new(Duration::ZERO));
    let mut clock = SharedClock(now.clone());
    let out = RefCell::new((Vec::new(), Vec::new(), Vec::new(), None, Vec::new()));
    let mut log = MatchLogWriter::new(Vec::new());
    let reply: Sender<Inbound> = tx.clone();
    let mut sink = |o: Outbound| {
        let mut g = out.borrow_mut();
        match o {
            Outbound::Broadcast(WireMessage::State(s)) => {
                g.4.push(now.get());
                if let Some(frame) = script(&s) {
                    reply.send(Inbound::Frame(1, frame)).unwrap();
                }
                g.0.push(s);
            }
            Outbound::Broadcast(end @ WireMessage::End { .. }) => g.3 = Some(end),
            Outbound::Broadcast(other) => panic!("unexpected broadcast {other:?}"),
            Outbound::To(id, msg) => g.1.push((id, msg)),
            Outbound::Drop(id) => g.2.push(id),
        }
    };
    let summary = run_match(
        &mut m,
        &mut clock,
        &rx,
        &mut sink,
        Some(&mut log),
        RunOptions::default(),
    )
    .unwrap();
    let (states, directed, dropped, end, stamps) = out.into_inner();
    MatchOutcome {
        states,
        directed,
        dropped,
        end,
        summary,
        log: log.into_inner().unwrap(),
        stamps,
    }
}

pub fn striker_script(s: &StateMsg) -> Option<String> {
    let table = TableConfig::default();
    Some(
        WireMessage::Action(ActionMsg {
            client: None,
            targets: vec![striker(s, &table)],
        })
        .encode(),
    )
}
