//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod arena;
pub mod learning;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use foosball::env::{EnvBatch, TaskKind, TaskSpec};
use foosball::physics::{
    apply_rolling_decel, step_world, JointState, RodMask, RodTargets, TableConfig, Vec2,
    WorldState, DEFAULT_SUBSTEPS, NUM_RODS,
};

pub fn kinetic(w: &WorldState) -> f64 {
    w.ball.velocity.norm_sq()
}

pub fn random_world(
    rng: &mut ChaCha8Rng,
    cfg: &TableConfig,
    present: RodMask,
    max_speed: f64,
) -> WorldState {
    let mut w = WorldState::centered(present);
    let hx = cfg.half_length() - cfg.ball_radius;
    let hy = cfg.half_width() - cfg.ball_radius;
    w.ball.position = Vec2::new(rng.random_range(-hx..hx), rng.random_range(-hy..hy));
    let speed = rng.random_range(0.0..=max_speed);
    let dir = rng.random_range(-PI..PI);
    w.ball.velocity = Vec2::new(speed * dir.cos(), speed * dir.sin());
    for (rod, rc) in w.rods.iter_mut().zip(&cfg.rods) {
        let p = rc.prismatic_limits();
        let r = rc.revolute_limits();
        rod.prismatic = JointState::at_rest(rng.random_range(p.min..=p.max));
        rod.revolute = JointState::at_rest(rng.random_range(r.min..=r.max));
    }
    w
}

pub fn random_targets(rng: &mut ChaCha8Rng, cfg: &TableConfig) -> [RodTargets; NUM_RODS] {
    std::array::from_fn(|i| {
        let p = cfg.rods[i].prismatic_limits();
        let r = cfg.rods[i].revolute_limits();
        // slightly beyond the range so clamping is exercised
        RodTargets {
            prismatic: rng.random_range(1.2 * p.min..=1.2 * p.max),
            revolute: rng.random_range(1.2 * r.min..=1.2 * r.max),
        }
    })
}

pub fn joints_inside(w: &WorldState, cfg: &TableConfig) -> Result<(), String> {
    for (i, (rod, rc)) in w.rods.iter().zip(&cfg.rods).enumerate() {
        for (j, lim) in [
            (rod.prismatic, rc.prismatic_limits()),
            (rod.revolute, rc.revolute_limits()),
        ] {
            if j.position < lim.min || j.position > lim.max || j.velocity.abs() > lim.v_max + 1e-9 {
                return Err(format!("rod {i} joint {j:?} outside {lim:?}"));
            }
        }
    }
    Ok(())
}

#[derive(Default, Debug)]
pub struct Violations {
    pub energy: usize,
    pub joint_box: usize,
    pub exclusivity: usize,
    pub reflection: usize,
    pub quiescence: usize,
}

/// Moving rods, random targets held for a few steps. Energy is checked on
/// steps without figurine contact, where only walls and friction act.
pub fn fuzz_moving(cfg: &TableConfig, seed: u64, steps: usize, v: &mut Violations) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_world(&mut rng, cfg, RodMask::ALL, 10.0);
    let mut targets = random_targets(&mut rng, cfg);
    for s in 0..steps {
        if s % 8 == 0 {
            targets = random_targets(&mut rng, cfg);
        }
        if !w.ball.in_play() {
            w = random_world(&mut rng, cfg, RodMask::ALL, 10.0);
        }
        let (next, ev) = step_world(&w, &targets, cfg, DEFAULT_SUBSTEPS).unwrap();
        if ev.contacts.is_empty() && kinetic(&next) > kinetic(&w) {
            v.energy += 1;
        }
        if joints_inside(&next, cfg).is_err() {
            v.joint_box += 1;
        }
        if ev.goal.is_some() && ev.ball_out {
            v.exclusivity += 1;
        }
        w = next;
    }
}

/// Frozen rods: every collision is against a static disc.
pub fn fuzz_static(cfg: &TableConfig, seed: u64, steps: usize, v: &mut Violations) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_world(&mut rng, cfg, RodMask::ALL, 10.0);
    for _ in 0..steps {
        if !w.ball.in_play() || w.ball.speed() == 0.0 {
            w = random_world(&mut rng, cfg, RodMask::ALL, 10.0);
        }
        let (next, ev) = step_world(&w, &w.targets(), cfg, DEFAULT_SUBSTEPS).unwrap();
        if kinetic(&next) > kinetic(&w) * (1.0 + 1e-12) {
            v.energy += 1;
        }
        if ev.goal.is_some() && ev.ball_out {
            v.exclusivity += 1;
        }
        w = next;
    }
}

/// Single substeps on an empty table, checked against the wall law.
pub fn fuzz_walls(cfg: &TableConfig, seed: u64, steps: usize, v: &mut Violations) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = cfg.wall_restitution;
    let f = cfg.wall_tangential_factor;
    let hy = cfg.half_width() - cfg.ball_radius;
    let hx = cfg.half_length() - cfg.ball_radius;
    let mut w = random_world(&mut rng, cfg, RodMask::NONE, 12.0);
    for _ in 0..steps {
        if !w.ball.in_play() || w.ball.speed() == 0.0 {
            w = random_world(&mut rng, cfg, RodMask::NONE, 12.0);
        }
        let pre = apply_rolling_decel(w.ball.velocity, cfg.rolling_decel, cfg.physics_dt);
        let free = w.ball.position + pre * cfg.physics_dt;
        let (next, _) = step_world(&w, &w.targets(), cfg, 1).unwrap();
        let vel = next.ball.velocity;
        let side = free.y.abs() > hy && free.y * pre.y > 0.0;
        let in_mouth = next.ball.position.y.abs() < 0.5 * cfg.goal_width;
        let end = !in_mouth && free.x.abs() > hx && free.x * pre.x > 0.0;
        let expected = match (side, end) {
            (false, false) => pre,
            (true, false) => Vec2::new(f * pre.x, -e * pre.y),
            (false, true) => Vec2::new(-e * pre.x, f * pre.y),
            (true, true) => Vec2::new(-e * f * pre.x, -e * f * pre.y),
        };
        let tol = 1e-12 * (1.0 + pre.norm());
        if next.ball.in_play()
            && ((vel.x - expected.x).abs() > tol || (vel.y - expected.y).abs() > tol)
        {
            v.reflection += 1;
        }
        w = next;
    }
}

/// Resting ball clear of every foot, rods parked on their setpoints.
pub fn fuzz_quiescence(cfg: &TableConfig, seed: u64, cases: usize, v: &mut Violations) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = cfg.ball_radius + cfg.rods[0].foot_radius;
    let mut done = 0;
    while done < cases {
        let w = random_world(&mut rng, cfg, RodMask::ALL, 0.0);
        let mut w = w;
        w.ball.velocity = Vec2::ZERO;
        let clear = w
            .discs(cfg)
            .iter()
            .all(|d| !d.active || (d.center - w.ball.position).norm() > reach);
        if !clear {
            continue;
        }
        done += 1;
        let (next, ev) = step_world(&w, &w.targets(), cfg, DEFAULT_SUBSTEPS).unwrap();
        let mut expected = w.clone();
        expected.tick += DEFAULT_SUBSTEPS as u64;
        if next != expected || !ev.contacts.is_empty() || ev.goal.is_some() || ev.ball_out {
            v.quiescence += 1;
        }
    }
}

impl Violations {
    pub fn total(&self) -> usize {
        self.energy + self.joint_box + self.exclusivity + self.reflection + self.quiescence
    }
}

/// Runs every fuzz family over `seeds` seeds; returns the violations and the
/// number of control steps exercised.
pub fn physics_property_suite(cfg: &TableConfig, seeds: u64) -> (Violations, usize) {
    let mut v = Violations::default();
    for seed in 0..seeds {
        fuzz_moving(cfg, seed, 4_000, &mut v);
        fuzz_static(cfg, 100 + seed, 2_000, &mut v);
        fuzz_walls(cfg, 200 + seed, 3_000, &mut v);
        fuzz_quiescence(cfg, 300 + seed, 1_000, &mut v);
    }
    (v, seeds as usize * 10_000)
}

/// Deterministic pseudo-random actions in [-1, 1] for step `t`.
pub fn scripted_actions(n: usize, dim: usize, t: usize, salt: usize) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_fn((n, dim), |(i, j)| {
        (((t * 7 + i * 13 + j * 3 + salt) as f64) * 0.618).sin()
    })
}

/// SHA-256 over the serialized world of every instance after every step.
pub fn world_stream_digest(
    kind: TaskKind,
    n: usize,
    steps: usize,
    seed: u64,
    workers: usize,
) -> [u8; 32] {
    let spec = TaskSpec::preset(kind);
    let mut batch = EnvBatch::new(spec.clone(), TableConfig::default(), n, seed).unwrap();
    if workers > 1 {
        batch = batch.with_workers(workers).unwrap();
    }
    let white_dim = spec.action_dim(foosball::Team::White);
    let black_dim = spec.action_dim(foosball::Team::Black);
    let mut h = Sha256::new();
    for t in 0..steps {
        let white = scripted_actions(n, white_dim, t, 0);
        let black = (black_dim > 0).then(|| scripted_actions(n, black_dim, t, 5));
        batch
            .step(white.view(), black.as_ref().map(|b| b.view()))
            .unwrap();
        for i in 0..n {
            h.update(serde_json::to_vec(batch.env(i).world()).unwrap());
        }
    }
    h.finalize().into()
}
