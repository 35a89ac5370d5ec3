//! Deterministic continuous-control tasks with closed-form dynamics.
//!
//! | id            | observation                     | action      | steps |
//! |---------------|---------------------------------|-------------|-------|
//! | `pendulum`    | `(cos θ, sin θ, θ̇)`             | `[-2, 2]`   | 200   |
//! | `mountaincar` | `(position, velocity)`          | `[-1, 1]`   | 999   |
//! | `reacher`     | `(pos_x, pos_y, vel_x, vel_y, goal_x, goal_y)` | `[-1, 1]²` | 100 |
//!
//! Actions outside the bounds are clipped, never rejected.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    Pendulum,
    MountainCar,
    Reacher,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::Pendulum, EnvId::MountainCar, EnvId::Reacher];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::Pendulum => "pendulum",
            EnvId::MountainCar => "mountaincar",
            EnvId::Reacher => "reacher",
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvId::Pendulum => EnvSpec {
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-Pendulum::MAX_TORQUE],
                action_high: vec![Pendulum::MAX_TORQUE],
                max_steps: Pendulum::MAX_STEPS,
            },
            EnvId::MountainCar => EnvSpec {
                state_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_steps: MountainCar::MAX_STEPS,
            },
            EnvId::Reacher => EnvSpec {
                state_dim: 6,
                action_dim: 2,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
                max_steps: Reacher::MAX_STEPS,
            },
        }
    }

    pub fn make(self) -> Env {
        match self {
            EnvId::Pendulum => Env::Pendulum(Pendulum::default()),
            EnvId::MountainCar => Env::MountainCar(MountainCar::default()),
            EnvId::Reacher => Env::Reacher(Reacher::default()),
        }
    }
}

impl std::str::FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_owned()))
    }
}

/// Builds an environment from its registry id.
pub fn make_env(id: &str) -> Result<Env> {
    Ok(id.parse::<EnvId>()?.make())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_steps: usize,
}

impl EnvSpec {
    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }

    /// Largest absolute action bound over all dimensions.
    pub fn max_abs_bound(&self) -> f64 {
        self.action_low
            .iter()
            .chain(&self.action_high)
            .fold(0.0, |m, b| m.max(b.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// The episode is over, either at a goal or at the step limit.
    pub done: bool,
    /// `done` was caused only by the step limit; the state itself is not terminal.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub enum Env {
    Pendulum(Pendulum),
    MountainCar(MountainCar),
    Reacher(Reacher),
}

impl Env {
    pub fn id(&self) -> EnvId {
        match self {
            Env::Pendulum(_) => EnvId::Pendulum,
            Env::MountainCar(_) => EnvId::MountainCar,
            Env::Reacher(_) => EnvId::Reacher,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        self.id().spec()
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.reset(seed),
            Env::MountainCar(e) => e.reset(seed),
            Env::Reacher(e) => e.reset(seed),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        ensure_dim("environment action", spec.action_dim, action.len())?;
        ensure_finite("environment action", action)?;
        let a = spec.clip_action(action);
        match self {
            Env::Pendulum(e) => e.step(a[0]),
            Env::MountainCar(e) => e.step(a[0]),
            Env::Reacher(e) => e.step([a[0], a[1]]),
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.observation(),
            Env::MountainCar(e) => e.observation(),
            Env::Reacher(e) => e.observation(),
        }
    }
}

/// Step counter shared by every task.
#[derive(Debug, Clone, Default)]
struct Episode {
    steps: usize,
    finished: bool,
}

impl Episode {
    fn begin_step(&self) -> Result<()> {
        if self.finished {
            Err(Error::EpisodeFinished)
        } else {
            Ok(())
        }
    }

    /// Returns `(done, truncated)`.
    fn end_step(&mut self, terminal: bool, max_steps: usize) -> (bool, bool) {
        self.steps += 1;
        let at_limit = self.steps >= max_steps;
        self.finished = terminal || at_limit;
        (self.finished, at_limit && !terminal)
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Swing-up pendulum; θ = 0 is upright.
#[derive(Debug, Clone, Default)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    episode: Episode,
}

impl Pendulum {
    pub const MAX_TORQUE: f64 = 2.0;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_STEPS: usize = 200;
    const G: f64 = 10.0;
    const M: f64 = 1.0;
    const L: f64 = 1.0;
    const DT: f64 = 0.05;

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        self.theta = rng.random_range(-PI..=PI);
        self.theta_dot = rng.random_range(-1.0..=1.0);
        self.episode = Episode::default();
        self.observation()
    }

    /// Places the pendulum at a given angle and angular velocity with a fresh step count.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.episode = Episode::default();
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_dot(&self) -> f64 {
        self.theta_dot
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn step(&mut self, torque: f64) -> Result<StepResult> {
        self.episode.begin_step()?;
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * torque * torque);
        let acc = 3.0 * Self::G / (2.0 * Self::L) * self.theta.sin()
            + 3.0 / (Self::M * Self::L * Self::L) * torque;
        self.theta_dot = (self.theta_dot + acc * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.theta += self.theta_dot * Self::DT;
        let (done, truncated) = self.episode.end_step(false, Self::MAX_STEPS);
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done,
            truncated,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    episode: Episode,
}

impl MountainCar {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.45;
    pub const GOAL_REWARD: f64 = 100.0;
    pub const MAX_STEPS: usize = 999;
    const POWER: f64 = 0.0015;

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        self.position = rng.random_range(-0.6..=-0.4);
        self.velocity = 0.0;
        self.episode = Episode::default();
        self.observation()
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position.clamp(Self::MIN_POSITION, Self::MAX_POSITION);
        self.velocity = velocity.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.episode = Episode::default();
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn step(&mut self, force: f64) -> Result<StepResult> {
        self.episode.begin_step()?;
        self.velocity = (self.velocity + Self::POWER * force - 0.0025 * (3.0 * self.position).cos())
            .clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.position =
            (self.position + self.velocity).clamp(Self::MIN_POSITION, Self::MAX_POSITION);
        let goal = self.position >= Self::GOAL_POSITION;
        let mut reward = -0.1 * force * force;
        if goal {
            reward += Self::GOAL_REWARD;
        }
        let (done, truncated) = self.episode.end_step(goal, Self::MAX_STEPS);
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done,
            truncated,
        })
    }
}

/// Point mass on the plane that must reach a goal on the unit circle.
#[derive(Debug, Clone, Default)]
pub struct Reacher {
    pos: [f64; 2],
    vel: [f64; 2],
    goal: [f64; 2],
    episode: Episode,
}

impl Reacher {
    pub const MAX_STEPS: usize = 100;
    const DT: f64 = 0.05;
    const MAX_SPEED: f64 = 1.0;

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        let angle: f64 = rng.random_range(-PI..PI);
        self.pos = [0.0; 2];
        self.vel = [0.0; 2];
        self.goal = [angle.cos(), angle.sin()];
        self.episode = Episode::default();
        self.observation()
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.goal[0],
            self.goal[1],
        ]
    }

    fn step(&mut self, a: [f64; 2]) -> Result<StepResult> {
        self.episode.begin_step()?;
        for d in 0..2 {
            self.vel[d] = (self.vel[d] + Self::DT * a[d]).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
            self.pos[d] += Self::DT * self.vel[d];
        }
        let reward = -(self.pos[0] - self.goal[0]).hypot(self.pos[1] - self.goal[1]);
        let (done, truncated) = self.episode.end_step(false, Self::MAX_STEPS);
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done,
            truncated,
        })
    }
}
