use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use foosball::env::{
    build_observation, mirror_observation, FoosballEnv, Outcome, RewardCoeffs, TaskKind, TaskSpec,
};
use foosball::physics::{TableConfig, Team};

mod common;
use common::{random_world, world_stream_digest};

fn env(spec: TaskSpec) -> FoosballEnv {
    FoosballEnv::new(Arc::new(spec), Arc::new(TableConfig::default())).unwrap()
}

#[test]
fn observation_and_action_dimensions() {
    let expect = [
        (TaskKind::Blocking, 5, 1, 0),
        (TaskKind::ScoringResting, 6, 2, 0),
        (TaskKind::ScoringIncoming, 6, 2, 0),
        (TaskKind::ScoringObstacles, 9, 2, 0),
        (TaskKind::KeeperVsKeeper, 10, 2, 2),
        (TaskKind::FullGame, 36, 8, 8),
    ];
    for (kind, obs, white, black) in expect {
        let spec = TaskSpec::preset(kind);
        assert_eq!(spec.obs_dim(), obs, "{kind:?}");
        assert_eq!(spec.action_dim(Team::White), white, "{kind:?}");
        assert_eq!(spec.action_dim(Team::Black), black, "{kind:?}");
        let mut e = env(spec);
        let o = e.reset(3).unwrap();
        assert_eq!(o[0].len(), obs);
        assert_eq!(o[1].len(), if black > 0 { obs } else { 0 });
    }
}

/// Black's observation of a world equals White's observation of the same
/// world turned by 180 degrees.
#[test]
fn mirror_audit() {
    let table = TableConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [TaskKind::KeeperVsKeeper, TaskKind::FullGame] {
        let spec = TaskSpec::preset(kind);
        for _ in 0..500 {
            let mut w = random_world(&mut rng, &table, spec.present_rods(&table), 8.0);
            for rod in w.rods.iter_mut() {
                rod.prismatic.velocity = rng.random_range(-2.0..2.0);
                rod.revolute.velocity = rng.random_range(-100.0..100.0);
            }
            let black = build_observation(&w, Team::Black, &spec, &table, None).unwrap();
            let white_rot =
                build_observation(&w.rotated(), Team::White, &spec, &table, None).unwrap();
            assert_eq!(black, white_rot, "{kind:?}");
            if kind == TaskKind::FullGame {
                let white = build_observation(&w, Team::White, &spec, &table, None).unwrap();
                assert_eq!(mirror_observation(&white, &spec).unwrap(), black);
            }
        }
    }
}

/// Swapping the players and rotating the table swaps every output.
#[test]
fn self_play_is_symmetric() {
    for kind in [TaskKind::KeeperVsKeeper, TaskKind::FullGame] {
        let spec = TaskSpec::preset(kind);
        let dim = spec.action_dim(Team::White);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (mut a, mut b) = (env(spec.clone()), env(spec.clone()));
        let mut compared = 0;
        for episode in 0..40 {
            let w0 = {
                a.reset(episode).unwrap();
                a.world().clone()
            };
            let oa = a.reset_to(w0.clone(), episode).unwrap();
            let ob = b.reset_to(w0.rotated(), episode).unwrap();
            assert_eq!(oa[0], ob[1]);
            assert_eq!(oa[1], ob[0]);
            loop {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let sa = a.step(&x, Some(&y)).unwrap();
                let sb = b.step(&y, Some(&x)).unwrap();
                // simultaneous contacts resolve in rod order, which rotation reverses
                if sa.events.contacts.len() > 1 {
                    break;
                }
                assert_eq!(b.world(), &a.world().rotated());
                assert_eq!(sa.reward[0], sb.reward[1]);
                assert_eq!(sa.reward[1], sb.reward[0]);
                assert_eq!(sa.obs[0], sb.obs[1]);
                assert_eq!(sa.done, sb.done);
                compared += 1;
                if sa.done {
                    let (ia, ib) = (sa.info.unwrap(), sb.info.unwrap());
                    let flipped = match ia.outcome {
                        Outcome::Success => Outcome::Failure,
                        Outcome::Failure => Outcome::Success,
                        o => o,
                    };
                    assert_eq!(ib.outcome, flipped);
                    break;
                }
            }
        }
        assert!(compared > 1000, "{kind:?} compared only {compared} steps");
    }
}

#[test]
fn goal_terms_are_zero_sum_in_play() {
    let mut spec = TaskSpec::preset(TaskKind::KeeperVsKeeper);
    spec.reward_coeffs = RewardCoeffs {
        goal_reward: 1000.0,
        ..RewardCoeffs::zero()
    };
    let mut e = env(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut goals = 0;
    let mut episode = 0;
    e.reset(episode).unwrap();
    for _ in 0..50_000 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = e.step(&x, Some(&y)).unwrap();
        assert_eq!(out.reward[0] + out.reward[1], 0.0);
        if let Some(conceding) = out.events.goal {
            goals += 1;
            let w = if conceding == Team::Black {
                1000.0
            } else {
                -1000.0
            };
            assert_eq!(out.reward[0], w);
        }
        if out.done {
            episode += 1;
            e.reset(episode).unwrap();
        }
    }
    assert!(goals > 0);
}

#[test]
fn world_stream_is_reproducible_and_worker_independent() {
    for kind in [TaskKind::KeeperVsKeeper, TaskKind::FullGame] {
        let one = world_stream_digest(kind, 16, 300, 5, 1);
        assert_eq!(one, world_stream_digest(kind, 16, 300, 5, 1));
        assert_eq!(one, world_stream_digest(kind, 16, 300, 5, 8));
        assert_ne!(one, world_stream_digest(kind, 16, 300, 6, 1));
    }
}

#[test]
fn task_spec_json_round_trip() {
    for kind in TaskKind::ALL {
        let spec = TaskSpec::preset(kind).with_filtered_ball(true);
        assert_eq!(TaskSpec::from_json(&spec.to_json()).unwrap(), spec);
    }
    assert!(TaskSpec::from_json("{\"kind\": \"nope\"}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn episodes_terminate_within_cap(seed in any::<u64>(), kind_ix in 0usize..6) {
        let kind = TaskKind::ALL[kind_ix];
        let spec = TaskSpec::preset(kind);
        let cap = spec.episode_cap;
        let (wd, bd) = (spec.action_dim(Team::White), spec.action_dim(Team::Black));
        let mut e = env(spec);
        e.reset(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in 1..=cap {
            let x: Vec<f64> = (0..wd).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y: Vec<f64> = (0..bd).map(|_| rng.random_range(-1.5..1.5)).collect();
            let out = e.step(&x, (bd > 0).then_some(&y[..])).unwrap();
            prop_assert!(out.reward.iter().all(|r| r.is_finite()));
            prop_assert!(out.obs.iter().flatten().all(|v| v.is_finite()));
            if out.done {
                prop_assert_eq!(out.info.unwrap().length, t);
                return Ok(());
            }
        }
        prop_assert!(false, "episode outlived its cap");
    }
}
