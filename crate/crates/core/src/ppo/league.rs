//! Frozen-opponent pool with win-rate promotion.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchResult {
    Win,
    Loss,
    Draw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeagueConfig {
    /// Sliding window of most recent results.
    pub window: usize,
    /// Results required in the window before promotion is considered.
    pub min_episodes: usize,
    /// Win rate (draws count as games) that triggers a promotion.
    pub threshold: f64,
    /// Sample each update's opponent uniformly from the newest `k` frozen
    /// policies instead of always using the newest.
    pub mix_last: Option<usize>,
}

impl Default for LeagueConfig {
    fn default() -> Self {
        LeagueConfig {
            window: 200,
            min_episodes: 100,
            threshold: 0.20,
            mix_last: None,
        }
    }
}

impl LeagueConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.min_episodes == 0 || self.min_episodes > self.window {
            return Err(Error::invalid("league needs 0 < min_episodes <= window"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "league threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if self.mix_last == Some(0) {
            return Err(Error::invalid("mix_last must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Promotion {
    pub update: u64,
    /// Index of the newly frozen policy in the pool.
    pub pool_index: usize,
    pub win_rate: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug)]
pub struct OpponentPool<T> {
    pub cfg: LeagueConfig,
    pool: Vec<T>,
    active: usize,
    window: VecDeque<MatchResult>,
    log: Vec<Promotion>,
}

impl<T> OpponentPool<T> {
    /// Pool seeded with the protagonist's initial policy.
    pub fn new(cfg: LeagueConfig, initial: T) -> Result<Self> {
        cfg.validate()?;
        Ok(OpponentPool {
            cfg,
            pool: vec![initial],
            active: 0,
            window: VecDeque::new(),
            log: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    pub fn active_index(&self) -> usize {
        self.active
    }

    pub fn active(&self) -> &T {
        &self.pool[self.active]
    }

    pub fn get(&self, i: usize) -> &T {
        &self.pool[i]
    }

    pub fn promotions(&self) -> &[Promotion] {
        &self.log
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn win_rate(&self) -> f64 {
        self.rate(MatchResult::Win)
    }

    pub fn rate(&self, kind: MatchResult) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|&&r| r == kind).count() as f64 / self.window.len() as f64
    }

    /// Pool index of the opponent to face next.
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.cfg.mix_last {
            Some(k) if k > 1 => {
                let lo = self.pool.len().saturating_sub(k);
                rng.random_range(lo..self.pool.len())
            }
            _ => self.active,
        }
    }

    /// Appends a result; freezes `snapshot()` as the new opponent when the
    /// window qualifies.
    pub fn record(
        &mut self,
        result: MatchResult,
        update: u64,
        snapshot: impl FnOnce() -> T,
    ) -> Option<Promotion> {
        self.window.push_back(result);
        while self.window.len() > self.cfg.window {
            self.window.pop_front();
        }
        if self.window.len() < self.cfg.min_episodes {
            return None;
        }
        let win_rate = self.win_rate();
        if win_rate < self.cfg.threshold {
            return None;
        }
        self.pool.push(snapshot());
        self.active = self.pool.len() - 1;
        let promo = Promotion {
            update,
            pool_index: self.active,
            win_rate,
            episodes: self.window.len(),
        };
        self.window.clear();
        self.log.push(promo.clone());
        Some(promo)
    }
}
