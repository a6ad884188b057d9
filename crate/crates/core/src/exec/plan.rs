//! Simulated cluster description, read from TOML:
//!
//! ```toml
//! seed = 7
//! overhead = 0.1        # added to every task duration
//! default_cost = 1.0    # duration of a routine without an entry in [costs]
//! restart_delay = 1.0   # time from a crash until the worker is back
//! policy = "delegate-always"
//!
//! [costs]
//! sum = 0.5
//!
//! [[workers]]
//! speed = 1.0           # durations are divided by this
//! join = 0.0
//! leave = 80.0
//! crashes = [5.0, 40.0]
//!
//! [random_crashes]      # extra crashes drawn from `seed`
//! count = 3
//! horizon = 100.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::pool::{Order, Policy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("cannot read plan {path}: {message}")]
    Io { path: String, message: String },
    #[error("plan syntax: {0}")]
    Syntax(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerSpec {
    #[serde(default = "one")]
    pub speed: f64,
    #[serde(default)]
    pub join: f64,
    #[serde(default)]
    pub leave: Option<f64>,
    #[serde(default)]
    pub crashes: Vec<f64>,
}

impl WorkerSpec {
    pub fn new(speed: f64) -> WorkerSpec {
        WorkerSpec { speed, join: 0.0, leave: None, crashes: Vec::new() }
    }

    fn alive_at(&self, t: f64) -> bool {
        t >= self.join && self.leave.is_none_or(|l| t < l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCrashes {
    pub count: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPlan {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overhead: f64,
    #[serde(default = "one")]
    pub default_cost: f64,
    #[serde(default = "one")]
    pub restart_delay: f64,
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub order: Option<String>,
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
    pub workers: Vec<WorkerSpec>,
    #[serde(default)]
    pub random_crashes: Option<RandomCrashes>,
}

impl SimPlan {
    /// `n` identical always-present workers of speed 1.
    pub fn uniform(n: usize) -> SimPlan {
        SimPlan {
            seed: 0,
            overhead: 0.0,
            default_cost: 1.0,
            restart_delay: 1.0,
            policy: None,
            order: None,
            costs: BTreeMap::new(),
            workers: (0..n).map(|_| WorkerSpec::new(1.0)).collect(),
            random_crashes: None,
        }
    }

    pub fn parse(text: &str) -> Result<SimPlan, PlanError> {
        SimPlan::parse_seeded(text, None)
    }

    /// Parse, replacing the file's seed by `seed` when given. Random
    /// crashes are drawn after the override.
    pub fn parse_seeded(text: &str, seed: Option<u64>) -> Result<SimPlan, PlanError> {
        let mut plan: SimPlan = toml::from_str(text).map_err(|e| PlanError::Syntax(e.to_string()))?;
        if let Some(s) = seed {
            plan.seed = s;
        }
        if let Some(rc) = plan.random_crashes.take() {
            plan = plan.with_random_crashes(rc.count, rc.horizon);
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path, seed: Option<u64>) -> Result<SimPlan, PlanError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlanError::Io { path: path.display().to_string(), message: e.to_string() })?;
        SimPlan::parse_seeded(&text, seed)
    }

    /// Add `count` crashes at times drawn uniformly from `[0, horizon)`
    /// on workers drawn uniformly, using the plan's seed. Draws that land
    /// outside a worker's lifetime are redrawn.
    pub fn with_random_crashes(mut self, count: usize, horizon: f64) -> SimPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < count && attempts < 1000 * (count + 1) && !self.workers.is_empty() {
            attempts += 1;
            let w = rng.gen_range(0..self.workers.len());
            let t = rng.gen_range(0.0..horizon);
            if self.workers[w].alive_at(t) {
                self.workers[w].crashes.push(t);
                placed += 1;
            }
        }
        for w in &mut self.workers {
            w.crashes.sort_by(f64::total_cmp);
        }
        self
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Invalid(m));
        if self.workers.is_empty() {
            return bad("at least one worker is required".into());
        }
        if !(self.overhead >= 0.0 && self.default_cost >= 0.0 && self.restart_delay >= 0.0) {
            return bad("overhead, default_cost and restart_delay must be non-negative".into());
        }
        for (name, c) in &self.costs {
            if c.is_nan() || *c < 0.0 {
                return bad(format!("cost of `{name}` must be non-negative"));
            }
        }
        for (i, w) in self.workers.iter().enumerate() {
            if !(w.speed > 0.0 && w.speed.is_finite()) {
                return bad(format!("worker {i}: speed must be positive"));
            }
            if w.join.is_nan() || w.join < 0.0 {
                return bad(format!("worker {i}: join must be non-negative"));
            }
            if let Some(l) = w.leave {
                if l.is_nan() || l <= w.join {
                    return bad(format!("worker {i}: join must precede leave"));
                }
            }
            if let Some(c) = w.crashes.iter().find(|c| !w.alive_at(**c)) {
                return bad(format!("worker {i}: crash at {c} outside its lifetime"));
            }
        }
        self.policy()?;
        self.order()?;
        Ok(())
    }

    pub fn policy(&self) -> Result<Option<Policy>, PlanError> {
        self.policy.as_deref().map(str::parse).transpose().map_err(|e: crate::pool::ParseError| PlanError::Invalid(e.to_string()))
    }

    pub fn order(&self) -> Result<Option<Order>, PlanError> {
        self.order.as_deref().map(str::parse).transpose().map_err(|e: crate::pool::ParseError| PlanError::Invalid(e.to_string()))
    }

    pub fn cost(&self, routine: &str) -> f64 {
        self.costs.get(routine).copied().unwrap_or(self.default_cost)
    }

    /// Total number of planned crashes.
    pub fn crash_count(&self) -> usize {
        self.workers.iter().map(|w| w.crashes.len()).sum()
    }
}
