//! Experiment orchestration.
//!
//! A run alternates environment steps and training steps and emits one
//! [`EpochRecord`] per `steps_per_epoch` environment steps (2000 by default).
//! An epoch's return is the mean return of the episodes that *ended* inside
//! it. `overall_reward` is the mean of all epoch returns so far and
//! `reward_history_100` the mean of the last (at most) 100.
//!
//! # Config files
//!
//! Flat UTF-8 text, one `key = value` per line, `#` starts a comment. Every
//! key in [`RunConfig::KEYS`] is accepted; unknown keys are errors.
//!
//! # CSV schema
//!
//! `epoch,steps,epoch_return,overall_reward,reward_history_100,eval_return,critic_loss,sigma`
//! with a header row. Optional columns are left empty when absent.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::RngCore;

use crate::agent::{Agent, AgentConfig};
use crate::envs::{EnvId, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::action_distance;
use crate::noise::{AdaptiveParamNoise, NoiseKind, NoiseStrategy};
use crate::replay::{PrioritizedBuffer, Transition, DEFAULT_PRIORITY_EPS};
use crate::seeded_rng;

pub const STEPS_PER_EPOCH: usize = 2000;
pub const REWARD_HISTORY_WINDOW: usize = 100;
/// Cap on visited states used to measure the parameter-noise distance.
pub const MAX_PROBE_STATES: usize = 64;

pub const CSV_HEADER: [&str; 8] = [
    "epoch",
    "steps",
    "epoch_return",
    "overall_reward",
    "reward_history_100",
    "eval_return",
    "critic_loss",
    "sigma",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ddpg,
    Pddpg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Pddpg => "pddpg",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Algorithm::Ddpg),
            "pddpg" => Ok(Algorithm::Pddpg),
            other => Err(Error::Parse(format!("unknown algorithm `{other}` (expected ddpg|pddpg)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Absolute action-noise scale; `None` means 0.1 times the largest action bound.
    pub gaussian_sigma: Option<f64>,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub param_sigma: f64,
    pub param_sigma_min: f64,
    pub param_sigma_max: f64,
    pub param_adapt_factor: f64,
    pub param_target_distance: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Ou,
            gaussian_sigma: None,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            param_sigma: 0.1,
            param_sigma_min: 1e-4,
            param_sigma_max: 1.0,
            param_adapt_factor: 1.01,
            param_target_distance: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn build(&self, spec: &EnvSpec) -> Result<NoiseStrategy> {
        match self.kind {
            NoiseKind::None => Ok(NoiseStrategy::None),
            NoiseKind::Gaussian => NoiseStrategy::gaussian(
                self.gaussian_sigma.unwrap_or(0.1 * spec.max_abs_bound()),
            ),
            NoiseKind::Ou => NoiseStrategy::ou(self.ou_theta, self.ou_sigma, spec.action_dim),
            NoiseKind::AdaptiveParam => Ok(NoiseStrategy::AdaptiveParam(AdaptiveParamNoise::new(
                self.param_sigma,
                self.param_sigma_min,
                self.param_sigma_max,
                self.param_adapt_factor,
                self.param_target_distance,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvId,
    pub algo: Algorithm,
    pub noise: NoiseConfig,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Hyperparameters of the learner. For `ddpg`, `use_is_weights` is forced off.
    pub agent: AgentConfig,
    /// Layer normalization on the actor; `None` enables it exactly when
    /// adaptive parameter noise is selected.
    pub layer_norm: Option<bool>,
    pub buffer_capacity: usize,
    /// Prioritization exponent for `pddpg`; `ddpg` always samples with 0.
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub priority_eps: f64,
    pub eval_episodes: usize,
    /// End the run after the first epoch whose evaluation return reaches this value.
    pub stop_eval_return: Option<f64>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvId::Pendulum,
            algo: Algorithm::Pddpg,
            noise: NoiseConfig::default(),
            epochs: 10,
            steps_per_epoch: STEPS_PER_EPOCH,
            agent: AgentConfig::default(),
            layer_norm: None,
            buffer_capacity: 1_000_000,
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            priority_eps: DEFAULT_PRIORITY_EPS,
            eval_episodes: 10,
            stop_eval_return: None,
            seed: 0,
            out_dir: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "auto" || value == "none" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 31] = [
        "env",
        "algo",
        "noise",
        "epochs",
        "steps_per_epoch",
        "seed",
        "out",
        "gamma",
        "tau",
        "batch_size",
        "actor_lr",
        "critic_lr",
        "hidden",
        "layer_norm",
        "use_is_weights",
        "warmup",
        "buffer_capacity",
        "alpha",
        "beta_start",
        "beta_end",
        "priority_eps",
        "eval_episodes",
        "stop_eval_return",
        "gaussian_sigma",
        "ou_theta",
        "ou_sigma",
        "param_sigma",
        "param_sigma_min",
        "param_sigma_max",
        "param_adapt_factor",
        "param_target_distance",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "env" => self.env = v.parse()?,
            "algo" => self.algo = v.parse()?,
            "noise" => self.noise.kind = v.parse()?,
            "epochs" => self.epochs = parse_value(key, v)?,
            "steps_per_epoch" => self.steps_per_epoch = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "out" => self.out_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "gamma" => self.agent.gamma = parse_value(key, v)?,
            "tau" => self.agent.tau = parse_value(key, v)?,
            "batch_size" => self.agent.batch_size = parse_value(key, v)?,
            "actor_lr" => self.agent.actor_lr = parse_value(key, v)?,
            "critic_lr" => self.agent.critic_lr = parse_value(key, v)?,
            "hidden" => {
                self.agent.hidden = v
                    .split(',')
                    .map(|h| parse_value(key, h.trim()))
                    .collect::<Result<_>>()?
            }
            "layer_norm" => self.layer_norm = parse_optional(key, v)?,
            "use_is_weights" => self.agent.use_is_weights = parse_value(key, v)?,
            "warmup" => self.agent.warmup = parse_value(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse_value(key, v)?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "beta_start" => self.beta_start = parse_value(key, v)?,
            "beta_end" => self.beta_end = parse_value(key, v)?,
            "priority_eps" => self.priority_eps = parse_value(key, v)?,
            "eval_episodes" => self.eval_episodes = parse_value(key, v)?,
            "stop_eval_return" => self.stop_eval_return = parse_optional(key, v)?,
            "gaussian_sigma" => self.noise.gaussian_sigma = parse_optional(key, v)?,
            "ou_theta" => self.noise.ou_theta = parse_value(key, v)?,
            "ou_sigma" => self.noise.ou_sigma = parse_value(key, v)?,
            "param_sigma" => self.noise.param_sigma = parse_value(key, v)?,
            "param_sigma_min" => self.noise.param_sigma_min = parse_value(key, v)?,
            "param_sigma_max" => self.noise.param_sigma_max = parse_value(key, v)?,
            "param_adapt_factor" => self.noise.param_adapt_factor = parse_value(key, v)?,
            "param_target_distance" => self.noise.param_target_distance = parse_value(key, v)?,
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Serializes every key, in [`RunConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_owned(), |x| format!("{x:?}"));
        let a = &self.agent;
        let values: [String; 31] = [
            self.env.name().into(),
            self.algo.name().into(),
            self.noise.kind.name().into(),
            self.epochs.to_string(),
            self.steps_per_epoch.to_string(),
            self.seed.to_string(),
            self.out_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            format!("{:?}", a.gamma),
            format!("{:?}", a.tau),
            a.batch_size.to_string(),
            format!("{:?}", a.actor_lr),
            format!("{:?}", a.critic_lr),
            a.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            self.layer_norm.map_or_else(|| "auto".to_owned(), |b| b.to_string()),
            a.use_is_weights.to_string(),
            a.warmup.to_string(),
            self.buffer_capacity.to_string(),
            format!("{:?}", self.alpha),
            format!("{:?}", self.beta_start),
            format!("{:?}", self.beta_end),
            format!("{:?}", self.priority_eps),
            self.eval_episodes.to_string(),
            opt(self.stop_eval_return),
            opt(self.noise.gaussian_sigma),
            format!("{:?}", self.noise.ou_theta),
            format!("{:?}", self.noise.ou_sigma),
            format!("{:?}", self.noise.param_sigma),
            format!("{:?}", self.noise.param_sigma_min),
            format!("{:?}", self.noise.param_sigma_max),
            format!("{:?}", self.noise.param_adapt_factor),
            format!("{:?}", self.noise.param_target_distance),
        ];
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env.spec();
        if self.steps_per_epoch == 0 {
            return Err(Error::InvalidArgument("steps_per_epoch must be > 0".into()));
        }
        if self.steps_per_epoch < spec.max_steps {
            return Err(Error::InvalidArgument(format!(
                "steps_per_epoch {} is shorter than a `{}` episode ({} steps)",
                self.steps_per_epoch,
                self.env.name(),
                spec.max_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.beta_start) || !(0.0..=1.0).contains(&self.beta_end) {
            return Err(Error::InvalidArgument("beta endpoints must lie in [0, 1]".into()));
        }
        self.effective_agent_config().validate()?;
        self.noise.build(&spec)?;
        Ok(())
    }

    /// Buffer exponent actually used: `ddpg` samples uniformly.
    pub fn effective_alpha(&self) -> f64 {
        match self.algo {
            Algorithm::Ddpg => 0.0,
            Algorithm::Pddpg => self.alpha,
        }
    }

    pub fn effective_agent_config(&self) -> AgentConfig {
        let mut c = self.agent.clone();
        c.layer_norm = self
            .layer_norm
            .unwrap_or(self.noise.kind == NoiseKind::AdaptiveParam);
        if self.algo == Algorithm::Ddpg {
            c.use_is_weights = false;
        }
        c
    }

    /// Importance-sampling exponent after `step` of `total` environment steps.
    pub fn beta_at(&self, step: usize, total: usize) -> f64 {
        let frac = if total == 0 {
            1.0
        } else {
            (step as f64 / total as f64).min(1.0)
        };
        self.beta_start + (self.beta_end - self.beta_start) * frac
    }

    pub fn csv_file_name(&self) -> String {
        format!(
            "{}-{}-{}-seed{}.csv",
            self.env.name(),
            self.algo.name(),
            self.noise.kind.name(),
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub steps: usize,
    pub epoch_return: f64,
    pub overall_reward: f64,
    pub reward_history_100: f64,
    pub eval_return: Option<f64>,
    pub critic_loss: Option<f64>,
    pub sigma: Option<f64>,
}

/// Running means over epoch returns.
#[derive(Debug, Clone, Default)]
pub struct RewardTracker {
    returns: Vec<f64>,
    sum: f64,
}

impl RewardTracker {
    pub fn push(&mut self, epoch_return: f64) {
        self.returns.push(epoch_return);
        self.sum += epoch_return;
    }

    pub fn overall(&self) -> f64 {
        self.sum / self.returns.len() as f64
    }

    pub fn recent(&self, window: usize) -> f64 {
        let tail = &self.returns[self.returns.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean undiscounted return of the live actor without exploration noise.
pub fn evaluate(agent: &Agent, env: EnvId, episodes: usize, seed: u64) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut e = env.make();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = e.reset(rng.next_u64());
        loop {
            let action = agent.greedy_action(&state)?;
            let r = e.step(&action)?;
            total += r.reward;
            if r.done {
                break;
            }
            state = r.next_state;
        }
    }
    Ok(total / episodes as f64)
}

fn probe_states(visited: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if visited.len() <= MAX_PROBE_STATES {
        return visited.to_vec();
    }
    (0..MAX_PROBE_STATES)
        .map(|i| visited[i * visited.len() / MAX_PROBE_STATES].clone())
        .collect()
}

/// Executes one training run. Writes the epoch CSV when `out_dir` is set.
pub fn run(config: &RunConfig) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    let records = run_loop(config)?;
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        write_csv(&dir.join(config.csv_file_name()), &records)?;
    }
    Ok(records)
}

fn run_loop(config: &RunConfig) -> Result<Vec<EpochRecord>> {
    let spec = config.env.spec();
    let mut rng = seeded_rng(config.seed);
    // evaluation draws from its own stream so it never shifts training randomness
    let mut eval_seeds = seeded_rng(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut agent = Agent::new(&spec, config.effective_agent_config(), &mut rng)?;
    let mut buffer = PrioritizedBuffer::with_priority_eps(
        config.buffer_capacity,
        spec.state_dim,
        spec.action_dim,
        config.effective_alpha(),
        config.priority_eps,
    )?;
    let mut noise = config.noise.build(&spec)?;
    let adaptive = noise.kind() == NoiseKind::AdaptiveParam;
    let mut env = config.env.make();

    let total_steps = config.epochs * config.steps_per_epoch;
    let mut records = Vec::with_capacity(config.epochs);
    let mut tracker = RewardTracker::default();
    let mut epoch_episode_returns = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut visited = Vec::new();

    let mut state = env.reset(rng.next_u64());
    noise.on_episode_start(agent.actor(), &mut rng)?;
    let mut episode_return = 0.0;

    for step in 0..total_steps {
        let epoch = step / config.steps_per_epoch + 1;
        let ctx = |e: Error| Error::InEpoch {
            epoch,
            source: Box::new(e),
        };
        let action = agent.select_action(&state, &mut noise, &mut rng).map_err(ctx)?;
        let result = env.step(&action).map_err(ctx)?;
        episode_return += result.reward;
        if adaptive {
            visited.push(state.clone());
        }
        buffer
            .push(Transition {
                state,
                action,
                reward: result.reward,
                next_state: result.next_state.clone(),
                done: result.done && !result.truncated,
            })
            .map_err(ctx)?;
        if buffer.len() >= agent.config.warmup.max(1) {
            let beta = config.beta_at(step, total_steps);
            let report = agent.train_step(&mut buffer, beta, &mut rng).map_err(ctx)?;
            epoch_losses.push(report.critic_loss);
        }
        state = result.next_state;

        if result.done {
            epoch_episode_returns.push(episode_return);
            episode_return = 0.0;
            if adaptive {
                let perturbed = noise.behavior_actor().unwrap_or(agent.actor());
                let d = action_distance(agent.actor(), perturbed, &probe_states(&visited)).map_err(ctx)?;
                noise.adapt(d).map_err(ctx)?;
                visited.clear();
            }
            state = env.reset(rng.next_u64());
            noise.on_episode_start(agent.actor(), &mut rng).map_err(ctx)?;
        }

        if (step + 1) % config.steps_per_epoch == 0 {
            let epoch_return = mean(&epoch_episode_returns).ok_or_else(|| {
                ctx(Error::InvalidArgument("no episode finished within the epoch".into()))
            })?;
            tracker.push(epoch_return);
            let eval_return = if config.eval_episodes > 0 {
                Some(evaluate(&agent, config.env, config.eval_episodes, eval_seeds.next_u64()).map_err(ctx)?)
            } else {
                None
            };
            records.push(EpochRecord {
                epoch,
                steps: step + 1,
                epoch_return,
                overall_reward: tracker.overall(),
                reward_history_100: tracker.recent(REWARD_HISTORY_WINDOW),
                eval_return,
                critic_loss: mean(&epoch_losses),
                sigma: noise.sigma(),
            });
            epoch_episode_returns.clear();
            epoch_losses.clear();
            if let (Some(goal), Some(ev)) = (config.stop_eval_return, eval_return) {
                if ev >= goal {
                    break;
                }
            }
        }
    }
    Ok(records)
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.steps.to_string(),
            r.epoch_return.to_string(),
            r.overall_reward.to_string(),
            r.reward_history_100.to_string(),
            opt_field(r.eval_return),
            opt_field(r.critic_loss),
            opt_field(r.sigma),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_value("csv", s).map(Some)
        }
    };
    r.records()
        .map(|row| {
            let row = row?;
            Ok(EpochRecord {
                epoch: parse_value("epoch", &row[0])?,
                steps: parse_value("steps", &row[1])?,
                epoch_return: parse_value("epoch_return", &row[2])?,
                overall_reward: parse_value("overall_reward", &row[3])?,
                reward_history_100: parse_value("reward_history_100", &row[4])?,
                eval_return: opt(&row[5])?,
                critic_loss: opt(&row[6])?,
                sigma: opt(&row[7])?,
            })
        })
        .collect()
}

/// Largest absolute gap between the stored running means and the means
/// recomputed from the `epoch_return` column.
pub fn metric_inconsistency(records: &[EpochRecord]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..records.len() {
        let returns: Vec<f64> = records[..=k].iter().map(|r| r.epoch_return).collect();
        let overall = returns.iter().sum::<f64>() / returns.len() as f64;
        let tail = &returns[returns.len().saturating_sub(REWARD_HISTORY_WINDOW)..];
        let recent = tail.iter().sum::<f64>() / tail.len() as f64;
        worst = worst
            .max((overall - records[k].overall_reward).abs())
            .max((recent - records[k].reward_history_100).abs());
    }
    worst
}

/// Area under the learning curve: the plain sum of epoch returns.
pub fn aulc(records: &[EpochRecord]) -> f64 {
    records.iter().map(|r| r.epoch_return).sum()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub final_overall_reward: f64,
    pub aulc: f64,
    pub records: Vec<EpochRecord>,
}

impl SeedResult {
    fn from_records(seed: u64, records: Vec<EpochRecord>) -> Self {
        Self {
            seed,
            final_overall_reward: records.last().map_or(f64::NAN, |r| r.overall_reward),
            aulc: aulc(&records),
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub median_a: f64,
    pub median_b: f64,
    /// `median_b - median_a`.
    pub median_diff: f64,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
}

impl MetricSummary {
    fn from_pairs(metric: &'static str, a: &[f64], b: &[f64]) -> Self {
        let (median_a, median_b) = (median(a), median(b));
        let mut s = Self {
            metric,
            median_a,
            median_b,
            median_diff: median_b - median_a,
            wins_a: 0,
            wins_b: 0,
            ties: 0,
        };
        for (x, y) in a.iter().zip(b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Greater => s.wins_a += 1,
                std::cmp::Ordering::Less => s.wins_b += 1,
                std::cmp::Ordering::Equal => s.ties += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: Vec<SeedResult>,
    pub b: Vec<SeedResult>,
    pub final_overall_reward: MetricSummary,
    pub aulc: MetricSummary,
}

/// Runs `base` (config a) and `variant` (config b) over the same seeds and
/// summarizes final `overall_reward` and AULC. Per-seed runs are independent
/// and execute on up to `available_parallelism` threads; results do not
/// depend on scheduling. With `out` set, per-run CSVs go to `out/a` and
/// `out/b`, and `compare_runs.csv` plus `compare_summary.csv` to `out`.
pub fn compare(base: &RunConfig, variant: &RunConfig, seeds: &[u64], out: Option<&Path>) -> Result<Comparison> {
    if base.env != variant.env {
        return Err(Error::InvalidArgument(format!(
            "compared configs use different environments ({} vs {})",
            base.env.name(),
            variant.env.name()
        )));
    }
    if seeds.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "comparison needs at least 3 seeds, got {}",
            seeds.len()
        )));
    }
    base.validate()?;
    variant.validate()?;

    let mut jobs = Vec::with_capacity(2 * seeds.len());
    for (tag, cfg) in [("a", base), ("b", variant)] {
        for &seed in seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            c.out_dir = out.map(|o| o.join(tag));
            jobs.push(c);
        }
    }
    let results = run_parallel(&jobs)?;
    let (ra, rb) = results.split_at(seeds.len());
    let to_results = |rs: &[Vec<EpochRecord>]| -> Vec<SeedResult> {
        seeds
            .iter()
            .zip(rs)
            .map(|(&s, r)| SeedResult::from_records(s, r.clone()))
            .collect()
    };
    let a = to_results(ra);
    let b = to_results(rb);
    let pick = |rs: &[SeedResult], f: fn(&SeedResult) -> f64| rs.iter().map(f).collect::<Vec<_>>();
    let comparison = Comparison {
        final_overall_reward: MetricSummary::from_pairs(
            "final_overall_reward",
            &pick(&a, |r| r.final_overall_reward),
            &pick(&b, |r| r.final_overall_reward),
        ),
        aulc: MetricSummary::from_pairs("aulc", &pick(&a, |r| r.aulc), &pick(&b, |r| r.aulc)),
        a,
        b,
    };
    if let Some(dir) = out {
        write_comparison(dir, &comparison)?;
    }
    Ok(comparison)
}

/// Runs every config; output order matches input order.
pub fn run_parallel(configs: &[RunConfig]) -> Result<Vec<Vec<EpochRecord>>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Vec<EpochRecord>>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = run(&configs[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn write_comparison(dir: &Path, c: &Comparison) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut w = csv::Writer::from_path(dir.join("compare_runs.csv"))?;
    w.write_record(["config", "seed", "final_overall_reward", "aulc"])?;
    for (tag, rows) in [("a", &c.a), ("b", &c.b)] {
        for r in rows {
            w.write_record([
                tag.to_owned(),
                r.seed.to_string(),
                r.final_overall_reward.to_string(),
                r.aulc.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: dir.join("compare_runs.csv"),
        source,
    })?;
    let mut w = csv::Writer::from_path(dir.join("compare_summary.csv"))?;
    w.write_record(["metric", "median_a", "median_b", "median_diff", "wins_a", "wins_b", "ties"])?;
    for m in [&c.final_overall_reward, &c.aulc] {
        w.write_record([
            m.metric.to_owned(),
            m.median_a.to_string(),
            m.median_b.to_string(),
            m.median_diff.to_string(),
            m.wins_a.to_string(),
            m.wins_b.to_string(),
            m.ties.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: dir.join("compare_summary.csv"),
        source,
    })
}
