//! Observation layout and point-symmetric mirroring.
//!
//! Every side observes the table in its own frame: White sees world
//! coordinates, Black sees them rotated by 180 degrees, which negates every
//! coordinate. Layout:
//! `[own positions] [own velocities] [opponent positions] [opponent velocities] [ball x y vx vy]`
//! with each block present only when the corresponding flag is set.

use super::task::{JointKind, JointRef, TaskSpec};
use crate::error::{Error, Result};
use crate::physics::{BallState, JointState, TableConfig, Team, WorldState};

/// Frame sign of a side: world coordinates are multiplied by it.
pub fn side_sign(side: Team) -> f64 {
    match side {
        Team::White => 1.0,
        Team::Black => -1.0,
    }
}

fn joint_of<'a>(
    world: &'a WorldState,
    table: &TableConfig,
    team: Team,
    j: &JointRef,
) -> &'a JointState {
    let rod = &world.rods[table.rod_index(team, j.role)];
    match j.joint {
        JointKind::Prismatic => &rod.prismatic,
        JointKind::Revolute => &rod.revolute,
    }
}

fn push_block(
    out: &mut Vec<f64>,
    world: &WorldState,
    table: &TableConfig,
    team: Team,
    joints: &[JointRef],
    sign: f64,
    spec: &TaskSpec,
) {
    if spec.obs_flags.include_own_pos {
        out.extend(
            joints
                .iter()
                .map(|j| sign * joint_of(world, table, team, j).position),
        );
    }
    if spec.obs_flags.include_own_vel {
        out.extend(
            joints
                .iter()
                .map(|j| sign * joint_of(world, table, team, j).velocity),
        );
    }
}

/// Builds the observation of `side`.
///
/// `filtered_ball` is the estimator's latency-compensated ball state in
/// world coordinates; it is required when the spec asks for filtered ball
/// observations and ignored otherwise.
pub fn build_observation(
    world: &WorldState,
    side: Team,
    spec: &TaskSpec,
    table: &TableConfig,
    filtered_ball: Option<&BallState>,
) -> Result<Vec<f64>> {
    if side == Team::Black && !spec.kind.is_two_sided() {
        return Err(Error::contract("one-sided tasks have no black observation"));
    }
    let ball = if spec.obs_flags.use_filtered_ball {
        filtered_ball.ok_or_else(|| {
            Error::contract("filtered ball observation requested without an estimate")
        })?
    } else {
        &world.ball
    };
    let s = side_sign(side);
    let mut out = Vec::with_capacity(spec.obs_dim());
    push_block(&mut out, world, table, side, spec.joints(side), s, spec);
    push_block(
        &mut out,
        world,
        table,
        side.opponent(),
        &spec.opponent_joints(side),
        s,
        spec,
    );
    out.extend([
        s * ball.position.x,
        s * ball.position.y,
        s * ball.velocity.x,
        s * ball.velocity.y,
    ]);
    debug_assert_eq!(out.len(), spec.obs_dim());
    Ok(out)
}

/// Maps an observation to the one the other side would receive.
///
/// Requires a two-sided task whose opponent block observes the same joints
/// as the own block; otherwise the opposite view is not recoverable from the
/// observation alone and the caller must rebuild it from the world state.
pub fn mirror_observation(obs: &[f64], spec: &TaskSpec) -> Result<Vec<f64>> {
    if !spec.kind.is_two_sided() {
        return Err(Error::contract("mirroring needs a two-sided task"));
    }
    if spec.opponent_joints(Team::White) != spec.white_joints
        || spec.white_joints != spec.black_joints
    {
        return Err(Error::contract(
            "opponent block does not mirror the own block",
        ));
    }
    if obs.len() != spec.obs_dim() {
        return Err(Error::contract(format!(
            "observation has {} entries, expected {}",
            obs.len(),
            spec.obs_dim()
        )));
    }
    let per_side = (obs.len() - 4) / 2;
    let mut out = Vec::with_capacity(obs.len());
    out.extend(obs[per_side..2 * per_side].iter().map(|v| -v));
    out.extend(obs[..per_side].iter().map(|v| -v));
    out.extend(obs[2 * per_side..].iter().map(|v| -v));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::task::TaskKind;
    use crate::physics::{RodMask, Vec2};

    fn full_game_world() -> WorldState {
        let mut w = WorldState::centered(RodMask::ALL);
        for (i, rod) in w.rods.iter_mut().enumerate() {
            rod.prismatic.position = 0.01 * i as f64 - 0.03;
            rod.prismatic.velocity = 0.1 * i as f64;
            rod.revolute.position = 0.3 - 0.07 * i as f64;
            rod.revolute.velocity = -(i as f64);
        }
        w.ball = BallState::new(Vec2::new(0.12, -0.04), Vec2::new(-1.5, 0.25));
        w
    }

    #[test]
    fn full_game_mirror_matches_black_view() {
        let table = TableConfig::default();
        let spec = TaskSpec::preset(TaskKind::FullGame);
        let w = full_game_world();
        let white = build_observation(&w, Team::White, &spec, &table, None).unwrap();
        let black = build_observation(&w, Team::Black, &spec, &table, None).unwrap();
        assert_eq!(white.len(), 36);
        assert_eq!(mirror_observation(&white, &spec).unwrap(), black);
        assert_eq!(mirror_observation(&black, &spec).unwrap(), white);
        // the black view is the white view of the rotated table
        assert_eq!(
            build_observation(&w.rotated(), Team::White, &spec, &table, None).unwrap(),
            black
        );
    }

    #[test]
    fn mirror_is_an_involution_with_zero_fixed_point() {
        let spec = TaskSpec::preset(TaskKind::FullGame);
        let zeros = vec![0.0; 36];
        assert_eq!(mirror_observation(&zeros, &spec).unwrap(), zeros);
        let obs: Vec<f64> = (0..36).map(|i| (i as f64 * 0.37).sin()).collect();
        let twice = mirror_observation(&mirror_observation(&obs, &spec).unwrap(), &spec).unwrap();
        assert_eq!(twice, obs);
    }

    #[test]
    fn mirror_guards() {
        let obs = vec![0.0; 5];
        assert!(matches!(
            mirror_observation(&obs, &TaskSpec::preset(TaskKind::Blocking)),
            Err(Error::ContractViolation(_))
        ));
        // prismatic-only opponent block cannot be swapped with the own block
        let kvk = TaskSpec::preset(TaskKind::KeeperVsKeeper);
        assert!(mirror_observation(&[0.0; 10], &kvk).is_err());
        let mut symmetric = kvk.clone();
        symmetric.obs_flags.opponent_prismatic_only = false;
        assert_eq!(symmetric.obs_dim(), 12);
        assert!(mirror_observation(&[0.0; 12], &symmetric).is_ok());
        assert!(mirror_observation(&[0.0; 11], &symmetric).is_err());
    }

    #[test]
    fn keeper_vs_keeper_layout() {
        let table = TableConfig::default();
        let spec = TaskSpec::preset(TaskKind::KeeperVsKeeper);
        let w = full_game_world();
        let obs = build_observation(&w, Team::White, &spec, &table, None).unwrap();
        let (wk, bk) = (&w.rods[0], &w.rods[7]);
        let expected = vec![
            wk.prismatic.position,
            wk.revolute.position,
            wk.prismatic.velocity,
            wk.revolute.velocity,
            bk.prismatic.position,
            bk.prismatic.velocity,
            0.12,
            -0.04,
            -1.5,
            0.25,
        ];
        assert_eq!(obs, expected);
        let black = build_observation(&w, Team::Black, &spec, &table, None).unwrap();
        assert_eq!(black[0], -bk.prismatic.position);
        assert_eq!(black[4], -wk.prismatic.position);
        assert_eq!(black[6..], [-0.12, 0.04, 1.5, -0.25]);
    }

    #[test]
    fn blocking_layout_and_black_guard() {
        let table = TableConfig::default();
        let spec = TaskSpec::preset(TaskKind::Blocking);
        let w = full_game_world();
        let obs = build_observation(&w, Team::White, &spec, &table, None).unwrap();
        assert_eq!(
            obs,
            vec![w.rods[0].prismatic.position, 0.12, -0.04, -1.5, 0.25]
        );
        assert!(build_observation(&w, Team::Black, &spec, &table, None).is_err());
    }

    #[test]
    fn filtered_ball_replaces_truth() {
        let table = TableConfig::default();
        let spec = TaskSpec::preset(TaskKind::Blocking).with_filtered_ball(true);
        let w = full_game_world();
        assert!(matches!(
            build_observation(&w, Team::White, &spec, &table, None),
            Err(Error::ContractViolation(_))
        ));
        let est = BallState::new(Vec2::new(0.1, 0.2), Vec2::new(0.3, 0.4));
        let obs = build_observation(&w, Team::White, &spec, &table, Some(&est)).unwrap();
        assert_eq!(obs[1..], [0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn obstacles_expose_opponent_offsets() {
        let table = TableConfig::default();
        let spec = TaskSpec::preset(TaskKind::ScoringObstacles);
        let w = full_game_world();
        let obs = build_observation(&w, Team::White, &spec, &table, None).unwrap();
        let bk = table.rod_index(Team::Black, crate::physics::RodRole::Keeper);
        assert_eq!(obs.len(), 9);
        assert_eq!(obs[2], w.rods[bk].prismatic.position);
    }
}
