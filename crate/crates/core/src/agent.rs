//! Actor-critic learner.
//!
//! One [`Agent::train_step`] runs, in order: prioritized sampling, Bellman
//! targets from the target networks, an importance-weighted critic
//! regression step, a deterministic policy-gradient actor step, soft updates
//! of both target networks and a priority refresh for the sampled batch.
//! With `alpha = 0` on the buffer and `use_is_weights = false` this is plain
//! uniform-replay DDPG.

use rand::Rng;

use crate::envs::EnvSpec;
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::nn::{mlp_shapes, Activation, Adam, Gradient, Network};
use crate::noise::NoiseStrategy;
use crate::replay::{PrioritizedBuffer, SampledBatch, Transition};

/// Limit of the uniform init range for the last actor and critic layers.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    /// Layer normalization on the actor's hidden layers.
    pub layer_norm: bool,
    pub use_is_weights: bool,
    /// Minimum number of stored transitions before training.
    pub warmup: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.001,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            hidden: vec![64, 64],
            layer_norm: false,
            use_is_weights: true,
            warmup: 1000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be > 0".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStepReport {
    pub critic_loss: f64,
    /// Mean `Q(s, mu(s))` over the batch before the actor step.
    pub actor_objective: f64,
    pub indices: Vec<usize>,
    /// `y_i - Q(s_i, a_i)` before the critic step.
    pub td_errors: Vec<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    actor: Network,
    critic: Network,
    target_actor: Network,
    target_critic: Network,
    actor_opt: Adam,
    critic_opt: Adam,
    target_actor_opt: Adam,
    target_critic_opt: Adam,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    state_dim: usize,
}

impl Agent {
    /// Fresh agent for an environment. Hidden layers use ReLU, the actor ends in
    /// `tanh` scaled to the action bounds and the critic ends linearly.
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut actor_sizes = vec![spec.state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(spec.action_dim);
        let mut critic_sizes = vec![spec.state_dim + spec.action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Network::random(
            mlp_shapes(&actor_sizes, Activation::Relu, Activation::Tanh, config.layer_norm),
            FINAL_LAYER_INIT,
            rng,
        )?;
        let critic = Network::random(
            mlp_shapes(&critic_sizes, Activation::Relu, Activation::Linear, false),
            FINAL_LAYER_INIT,
            rng,
        )?;
        Self::from_networks(actor, critic, spec.action_low.clone(), spec.action_high.clone(), config)
    }

    /// Agent around given live networks; targets start as exact copies.
    pub fn from_networks(
        actor: Network,
        critic: Network,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        config: AgentConfig,
    ) -> Result<Self> {
        config.validate()?;
        let action_dim = actor.output_dim();
        let state_dim = actor.input_dim();
        ensure_dim("action low bounds", action_dim, action_low.len())?;
        ensure_dim("action high bounds", action_dim, action_high.len())?;
        ensure_dim("critic input", state_dim + action_dim, critic.input_dim())?;
        ensure_dim("critic output", 1, critic.output_dim())?;
        ensure_finite("action bounds", &action_low)?;
        ensure_finite("action bounds", &action_high)?;
        if action_low.iter().zip(&action_high).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument("action low bound above high bound".into()));
        }
        Ok(Self {
            actor_opt: Adam::new(&actor, config.actor_lr)?,
            critic_opt: Adam::new(&critic, config.critic_lr)?,
            target_actor_opt: Adam::new(&actor, config.actor_lr)?,
            target_critic_opt: Adam::new(&critic, config.critic_lr)?,
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
            action_low,
            action_high,
            state_dim,
        })
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn critic(&self) -> &Network {
        &self.critic
    }

    pub fn target_actor(&self) -> &Network {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Network {
        &self.target_critic
    }

    pub fn actor_optimizer(&self) -> &Adam {
        &self.actor_opt
    }

    pub fn critic_optimizer(&self) -> &Adam {
        &self.critic_opt
    }

    /// Optimizer states paired with the target networks. Targets only move by
    /// soft updates, so these never step.
    pub fn target_optimizers(&self) -> (&Adam, &Adam) {
        (&self.target_actor_opt, &self.target_critic_opt)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn action_bounds(&self) -> (&[f64], &[f64]) {
        (&self.action_low, &self.action_high)
    }

    /// Maps an actor output in `[-1, 1]` onto the action box.
    fn scale_action(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&y, (&lo, &hi))| 0.5 * (hi + lo) + 0.5 * (hi - lo) * y)
            .collect()
    }

    fn half_range(&self, j: usize) -> f64 {
        0.5 * (self.action_high[j] - self.action_low[j])
    }

    fn clip(&self, action: &mut [f64]) {
        for (a, (&lo, &hi)) in action.iter_mut().zip(self.action_low.iter().zip(&self.action_high)) {
            *a = a.clamp(lo, hi);
        }
    }

    fn policy_action(&self, actor: &Network, state: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("agent state", self.state_dim, state.len())?;
        ensure_finite("agent state", state)?;
        let raw = actor.forward(state)?;
        Ok(self.scale_action(&raw))
    }

    /// Noise-free clipped action of the live actor.
    pub fn greedy_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.policy_action(&self.actor, state)?;
        self.clip(&mut a);
        Ok(a)
    }

    /// Behavior action: the perturbed actor under parameter noise, otherwise
    /// the live actor plus the strategy's additive term; always clipped.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        noise: &mut NoiseStrategy,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        match noise {
            NoiseStrategy::None => self.greedy_action(state),
            NoiseStrategy::AdaptiveParam(_) => {
                let actor = noise.behavior_actor().unwrap_or(&self.actor);
                let mut a = self.policy_action(actor, state)?;
                self.clip(&mut a);
                Ok(a)
            }
            _ => {
                let mut a = self.policy_action(&self.actor, state)?;
                let term = noise.action_term(a.len(), rng)?;
                for (x, n) in a.iter_mut().zip(term) {
                    *x += n;
                }
                self.clip(&mut a);
                Ok(a)
            }
        }
    }

    fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x
    }

    /// `Q(s, a)` under the live critic.
    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(&Self::critic_input(state, action))?[0])
    }

    /// `y_i = r_i + gamma * (1 - done_i) * Q'(s'_i, mu'(s'_i))`, evaluated with
    /// the target networks only.
    pub fn compute_targets(&self, transitions: &[Transition]) -> Result<Vec<f64>> {
        if transitions.is_empty() {
            return Err(Error::InvalidArgument("cannot compute targets for an empty batch".into()));
        }
        transitions
            .iter()
            .map(|t| {
                if t.done {
                    return Ok(t.reward);
                }
                let next_action = self.policy_action(&self.target_actor, &t.next_state)?;
                let q_next = self
                    .target_critic
                    .forward(&Self::critic_input(&t.next_state, &next_action))?[0];
                Ok(t.reward + self.config.gamma * q_next)
            })
            .collect()
    }

    /// Gradient of `L = (1/N) sum_i c_i (y_i - Q(s_i, a_i))^2` with respect to
    /// the critic, where `c_i` are the given weights (or 1). Returns the
    /// gradient, the TD errors and the loss.
    pub fn critic_gradient(
        &self,
        transitions: &[Transition],
        targets: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<(Gradient, Vec<f64>, f64)> {
        let n = transitions.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty critic batch".into()));
        }
        ensure_dim("critic targets", n, targets.len())?;
        ensure_finite("critic targets", targets)?;
        if let Some(w) = weights {
            ensure_dim("critic weights", n, w.len())?;
        }
        let mut grad = Gradient::zeros_like(&self.critic);
        let mut td = Vec::with_capacity(n);
        let mut loss = 0.0;
        let inv_n = 1.0 / n as f64;
        for (i, (t, &y)) in transitions.iter().zip(targets).enumerate() {
            let trace = self.critic.trace(&Self::critic_input(&t.state, &t.action))?;
            let delta = y - trace.output()[0];
            let c = weights.map_or(1.0, |w| w[i]);
            loss += c * delta * delta * inv_n;
            self.critic
                .backward_trace(&trace, &[-2.0 * c * delta * inv_n], &mut grad)?;
            td.push(delta);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "critic loss {loss} (max |td| {:.3e})",
                td.iter().fold(0.0f64, |m, d| m.max(d.abs()))
            )));
        }
        Ok((grad, td, loss))
    }

    /// One Adam step on the critic. Returns the pre-update TD errors and loss.
    pub fn critic_update(&mut self, batch: &SampledBatch, targets: &[f64]) -> Result<(Vec<f64>, f64)> {
        let weights = self.config.use_is_weights.then_some(batch.is_weights.as_slice());
        let (grad, td, loss) = self.critic_gradient(&batch.transitions, targets, weights)?;
        self.critic_opt.step(&mut self.critic, &grad)?;
        Ok((td, loss))
    }

    /// Gradient of `-J`, `J = (1/N) sum_i Q(s_i, mu(s_i))`, with respect to the
    /// actor, chained through the live critic. Returns the gradient and `J`.
    pub fn actor_gradient(&self, states: &[Vec<f64>]) -> Result<(Gradient, f64)> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty actor batch".into()));
        }
        let inv_n = 1.0 / n as f64;
        let mut grad = Gradient::zeros_like(&self.actor);
        let mut objective = 0.0;
        for s in states {
            ensure_dim("agent state", self.state_dim, s.len())?;
            let actor_trace = self.actor.trace(s)?;
            let action = self.scale_action(actor_trace.output());
            let critic_trace = self.critic.trace(&Self::critic_input(s, &action))?;
            objective += critic_trace.output()[0] * inv_n;
            let d_input = self.critic.input_gradient(&critic_trace, &[-inv_n])?;
            let upstream: Vec<f64> = d_input[self.state_dim..]
                .iter()
                .enumerate()
                .map(|(j, &g)| g * self.half_range(j))
                .collect();
            self.actor.backward_trace(&actor_trace, &upstream, &mut grad)?;
        }
        Ok((grad, objective))
    }

    /// One Adam ascent step on `J`; the critic is untouched.
    pub fn actor_update(&mut self, batch: &SampledBatch) -> Result<f64> {
        let states: Vec<Vec<f64>> = batch.transitions.iter().map(|t| t.state.clone()).collect();
        let (grad, objective) = self.actor_gradient(&states)?;
        self.actor_opt.step(&mut self.actor, &grad)?;
        Ok(objective)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        self.target_actor.soft_update(&self.actor, self.config.tau)?;
        self.target_critic.soft_update(&self.critic, self.config.tau)
    }

    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &mut PrioritizedBuffer,
        beta: f64,
        rng: &mut R,
    ) -> Result<TrainStepReport> {
        let needed = self.config.warmup.max(1);
        if buffer.len() < needed {
            return Err(Error::InvalidArgument(format!(
                "train step needs {needed} stored transitions, buffer holds {}",
                buffer.len()
            )));
        }
        let batch = buffer.sample(self.config.batch_size, beta, rng)?;
        let targets = self.compute_targets(&batch.transitions)?;
        let (td_errors, critic_loss) = self.critic_update(&batch, &targets)?;
        let actor_objective = self.actor_update(&batch)?;
        self.update_targets()?;
        buffer.update_priorities(&batch.indices, &td_errors)?;
        Ok(TrainStepReport {
            critic_loss,
            actor_objective,
            indices: batch.indices,
            td_errors,
            sigma: None,
        })
    }

    /// Text checkpoint: `key = value` header lines, then the four network
    /// snapshots, each preceded by its name on its own line.
    pub fn to_checkpoint(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let c = &self.config;
        let mut out = String::from("agent checkpoint\n");
        out.push_str(&format!("gamma = {:?}\n", c.gamma));
        out.push_str(&format!("tau = {:?}\n", c.tau));
        out.push_str(&format!("batch_size = {}\n", c.batch_size));
        out.push_str(&format!("actor_lr = {:?}\n", c.actor_lr));
        out.push_str(&format!("critic_lr = {:?}\n", c.critic_lr));
        out.push_str(&format!(
            "hidden = {}\n",
            c.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
        ));
        out.push_str(&format!("layer_norm = {}\n", c.layer_norm));
        out.push_str(&format!("use_is_weights = {}\n", c.use_is_weights));
        out.push_str(&format!("warmup = {}\n", c.warmup));
        out.push_str(&format!("action_low = {}\n", join(&self.action_low)));
        out.push_str(&format!("action_high = {}\n", join(&self.action_high)));
        for (name, net) in [
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("target_actor", &self.target_actor),
            ("target_critic", &self.target_critic),
        ] {
            out.push_str(name);
            out.push('\n');
            out.push_str(&net.to_snapshot());
        }
        out
    }

    /// Restores a checkpoint. Optimizer moments start fresh.
    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("agent checkpoint") {
            return Err(Error::Parse("missing `agent checkpoint` header".into()));
        }
        let mut header = Vec::new();
        for _ in 0..11 {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("checkpoint header truncated".into()))?;
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Parse(format!("bad header line `{line}`")))?;
            header.push((k.to_owned(), v.to_owned()));
        }
        let get = |key: &str| -> Result<&str> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse(format!("checkpoint missing `{key}`")))
        };
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
        }
        let list = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                Ok(Vec::new())
            } else {
                s.split(',').map(num).collect()
            }
        };
        let hidden_str = get("hidden")?;
        let hidden = if hidden_str.is_empty() {
            Vec::new()
        } else {
            hidden_str.split(',').map(num).collect::<Result<_>>()?
        };
        let config = AgentConfig {
            gamma: num(get("gamma")?)?,
            tau: num(get("tau")?)?,
            batch_size: num(get("batch_size")?)?,
            actor_lr: num(get("actor_lr")?)?,
            critic_lr: num(get("critic_lr")?)?,
            hidden,
            layer_norm: num(get("layer_norm")?)?,
            use_is_weights: num(get("use_is_weights")?)?,
            warmup: num(get("warmup")?)?,
        };
        let mut nets = Vec::with_capacity(4);
        for name in ["actor", "critic", "target_actor", "target_critic"] {
            if lines.next() != Some(name) {
                return Err(Error::Parse(format!("expected `{name}` section")));
            }
            nets.push(Network::read_snapshot(&mut lines)?);
        }
        let target_critic = nets.pop().expect("four networks");
        let target_actor = nets.pop().expect("four networks");
        let critic = nets.pop().expect("four networks");
        let actor = nets.pop().expect("four networks");
        if !target_actor.same_shape(&actor) || !target_critic.same_shape(&critic) {
            return Err(Error::Parse("target network shape differs from live network".into()));
        }
        let mut agent = Self::from_networks(
            actor,
            critic,
            list(get("action_low")?)?,
            list(get("action_high")?)?,
            config,
        )?;
        agent.target_actor = target_actor;
        agent.target_critic = target_critic;
        Ok(agent)
    }
}
