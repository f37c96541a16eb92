//! Sparse goal rewards plus potential-difference shaping.

use super::task::{RewardCoeffs, TaskSpec};
use crate::physics::{StepEvents, TableConfig, Team, WorldState};

/// Distance from the ball to the centre of the goal `side` attacks.
pub fn goal_distance(world: &WorldState, side: Team, table: &TableConfig) -> f64 {
    let [gx, gy] = table.goal_center(side.opponent());
    let p = world.ball.position;
    ((p.x - gx).powi(2) + (p.y - gy).powi(2)).sqrt()
}

/// Smallest lateral gap between the ball and a figurine on a rod `side`
/// controls.
pub fn figurine_distance(
    world: &WorldState,
    side: Team,
    spec: &TaskSpec,
    table: &TableConfig,
) -> f64 {
    let mut best = f64::INFINITY;
    for role in spec.own_roles(side) {
        let i = table.rod_index(side, role);
        let rod = &table.rods[i];
        let offset = world.rods[i].prismatic.position;
        for f in 0..rod.figurine_count {
            best = best.min((rod.figurine_base_y(f) + offset - world.ball.position.y).abs());
        }
    }
    best
}

/// Team whose rod touched the ball last during the step, if any.
pub fn last_toucher(events: &StepEvents, table: &TableConfig) -> Option<Team> {
    events.contacts.last().map(|c| table.rods[c.rod].team)
}

/// Sparse part of the reward: goals and out-of-table launches.
pub fn event_reward(
    events: &StepEvents,
    side: Team,
    coeffs: &RewardCoeffs,
    out_blame: Option<Team>,
) -> f64 {
    let mut r = 0.0;
    match events.goal {
        Some(conceding) if conceding == side => r -= coeffs.goal_reward,
        Some(_) => r += coeffs.goal_reward,
        None => {}
    }
    if events.ball_out && out_blame == Some(side) {
        r += coeffs.out_penalty;
    }
    r
}

/// Reward of `side` for the transition `prev -> next` under `action`.
///
/// A ball launched off the table is charged to the side whose figurine
/// touched it last.
pub fn compute_reward(
    prev: &WorldState,
    next: &WorldState,
    events: &StepEvents,
    action: &[f64],
    side: Team,
    spec: &TaskSpec,
    table: &TableConfig,
) -> f64 {
    let c = &spec.reward_coeffs;
    let mut r = event_reward(events, side, c, last_toucher(events, table));
    if c.c_goal_distance != 0.0 {
        r += c.c_goal_distance
            * (goal_distance(prev, side, table) - goal_distance(next, side, table));
    }
    if c.c_figurine_ball != 0.0 {
        r += c.c_figurine_ball
            * (figurine_distance(prev, side, spec, table)
                - figurine_distance(next, side, spec, table));
    }
    if c.c_action_reg != 0.0 {
        r -= c.c_action_reg * action.iter().map(|a| a * a).sum::<f64>();
    }
    r
}
