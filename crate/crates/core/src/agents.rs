//! The learners of the hierarchy: a twin-critic deterministic off-policy
//! learner with delayed actor updates, a clipped-surrogate on-policy learner
//! with categorical or Gaussian heads, a uniform random goal source, and a
//! histogram entropy estimator for emitted goals.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::approx::{
    opt_step, soft_update, Activation, ApproxError, NetParams, OptimState,
    OutputActivation,
};
use crate::types::Transition;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty rollout")]
    EmptyRollout,
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// Bounded FIFO ring with uniform sampling over its current contents.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    inserted: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            items: Vec::new(),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = item;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// How a learner turns `(state, context)` into its network input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    /// Per-component multiplier for the state vector.
    pub state_scale: Vec<f64>,
    /// Multiplier for every context component.
    pub context_scale: f64,
    /// Which transition field is the context.
    pub context: ContextField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextField {
    /// The lower-level goal (next context: `next_goal`).
    Goal,
    /// The task target (unchanged between steps).
    Target,
}

impl InputMap {
    pub fn dim(&self, context_dim: usize) -> usize {
        self.state_scale.len() + context_dim
    }

    pub fn build(&self, state: &[f64], context: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = state
            .iter()
            .zip(&self.state_scale)
            .map(|(s, k)| s * k)
            .collect();
        v.extend(context.iter().map(|c| c * self.context_scale));
        v
    }

    fn current(&self, t: &Transition) -> Vec<f64> {
        match self.context {
            ContextField::Goal => self.build(&t.state, &t.goal),
            ContextField::Target => self.build(&t.state, &t.target_pos),
        }
    }

    fn next(&self, t: &Transition) -> Vec<f64> {
        match self.context {
            ContextField::Goal => self.build(&t.next_state, &t.next_goal),
            ContextField::Target => self.build(&t.next_state, &t.target_pos),
        }
    }
}

/// Deterministic mapping from raw state and context to an output, used by
/// noise-free evaluation.
pub trait DeterministicPolicy {
    fn act(&self, state: &[f64], context: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffPolicyConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Exploration noise standard deviation relative to the output bound.
    pub noise_std: f64,
    /// Target smoothing noise (std, clip), relative to the output bound.
    pub target_smoothing: (f64, f64),
    pub batch_size: usize,
    pub capacity: usize,
    pub reward_scale: f64,
    /// Weight of the mean squared bound-relative action added to the actor
    /// loss.
    pub action_l2: f64,
}

impl Default for OffPolicyConfig {
    fn default() -> Self {
        OffPolicyConfig {
            hidden: vec![64, 64],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            noise_std: 0.2,
            target_smoothing: (0.2, 0.5),
            batch_size: 64,
            capacity: 200_000,
            reward_scale: 1.0,
            action_l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub loss: f64,
    pub loss_final: f64,
    pub entropy: f64,
}

/// Twin-critic deterministic actor-critic with target networks.
#[derive(Debug, Clone)]
pub struct OffPolicyLearner {
    pub cfg: OffPolicyConfig,
    pub input_map: InputMap,
    pub bound: f64,
    pub actor: NetParams,
    pub actor_target: NetParams,
    pub critics: [NetParams; 2],
    pub critic_targets: [NetParams; 2],
    actor_opt: OptimState,
    critic_opts: [OptimState; 2],
    pub replay: ReplayBuffer<Transition>,
    pub updates: u64,
    rng: ChaCha8Rng,
}

impl OffPolicyLearner {
    pub fn new(
        cfg: OffPolicyConfig,
        input_map: InputMap,
        context_dim: usize,
        output_dim: usize,
        bound: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = input_map.dim(context_dim);
        let mut sizes = vec![input_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(output_dim);
        let mut actor = NetParams::new(&sizes, Activation::Relu, OutputActivation::TanhScaled(bound), &mut rng);
        actor.scale_last_layer(0.1);
        let mut csizes = vec![input_dim + output_dim];
        csizes.extend(&cfg.hidden);
        csizes.push(1);
        let q1 = NetParams::new(&csizes, Activation::Relu, OutputActivation::Linear, &mut rng);
        let q2 = NetParams::new(&csizes, Activation::Relu, OutputActivation::Linear, &mut rng);
        OffPolicyLearner {
            actor_opt: OptimState::new(&actor, cfg.actor_lr),
            critic_opts: [
                OptimState::new(&q1, cfg.critic_lr),
                OptimState::new(&q2, cfg.critic_lr),
            ],
            actor_target: actor.clone(),
            critic_targets: [q1.clone(), q2.clone()],
            actor,
            critics: [q1, q2],
            replay: ReplayBuffer::new(cfg.capacity),
            updates: 0,
            input_map,
            bound,
            cfg,
            rng,
        }
    }

    pub fn input(&self, state: &[f64], context: &[f64]) -> Vec<f64> {
        self.input_map.build(state, context)
    }

    /// Actor output for a prepared input; with `explore_noise`, zero-mean
    /// Gaussian noise is added before clamping to the bound.
    pub fn select<R: Rng + ?Sized>(&self, input: &[f64], explore_noise: bool, rng: &mut R) -> Vec<f64> {
        let mut a = self.actor.forward(input).expect("actor input dimension");
        if explore_noise {
            let std = self.cfg.noise_std * self.bound;
            for v in a.iter_mut() {
                let n: f64 = StandardNormal.sample(rng);
                *v += std * n;
            }
        }
        a.iter_mut().for_each(|v| *v = v.clamp(-self.bound, self.bound));
        a
    }

    /// First critic's estimate for a prepared input and action.
    pub fn q_value(&self, input: &[f64], action: &[f64]) -> f64 {
        let mut x = input.to_vec();
        x.extend_from_slice(action);
        self.critics[0].forward(&x).expect("critic input dimension")[0]
    }

    pub fn remember(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// Samples a batch from replay and updates. Returns `None` while the
    /// buffer holds fewer transitions than one batch.
    pub fn train_step(&mut self) -> Result<Option<TrainStats>, AgentError> {
        if self.replay.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let idx: Vec<usize> = (0..self.cfg.batch_size)
            .map(|_| self.rng.random_range(0..self.replay.len()))
            .collect();
        let items = std::mem::take(&mut self.replay.items);
        let refs: Vec<&Transition> = idx.iter().map(|&i| &items[i]).collect();
        let out = self.update(&refs);
        self.replay.items = items;
        out.map(Some)
    }

    /// One critic update toward the smoothed min-of-twin-targets bootstrap;
    /// the actor and the targets move every `policy_delay` critic updates.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<TrainStats, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let n = batch.len();
        let im = &self.input_map;
        let x = stack(batch.iter().map(|t| im.current(t)));
        let xn = stack(batch.iter().map(|t| im.next(t)));
        let a = stack(batch.iter().map(|t| t.action_or_goal.clone()));

        let mut an = self.actor_target.forward_batch(&xn)?;
        let (sstd, sclip) = self.cfg.target_smoothing;
        let (sstd, sclip) = (sstd * self.bound, sclip * self.bound);
        for v in an.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut self.rng);
            *v = (*v + (sstd * e).clamp(-sclip, sclip)).clamp(-self.bound, self.bound);
        }
        let xan = hcat(&xn, &an);
        let qt1 = self.critic_targets[0].forward_batch(&xan)?;
        let qt2 = self.critic_targets[1].forward_batch(&xan)?;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let t = batch[i];
                let boot = if t.done { 0.0 } else { qt1[[i, 0]].min(qt2[[i, 0]]) };
                t.reward * self.cfg.reward_scale + self.cfg.gamma * boot
            })
            .collect();

        let xa = hcat(&x, &a);
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let cache = self.critics[k].forward_cached(xa.clone())?;
            let mut up = Array2::zeros((n, 1));
            for i in 0..n {
                let err = cache.output[[i, 0]] - y[i];
                critic_loss += err * err / n as f64;
                up[[i, 0]] = 2.0 * err / n as f64;
            }
            let (g, _) = self.critics[k].backward_batch(&cache, &up)?;
            opt_step(&mut self.critics[k], &mut self.critic_opts[k], &g)?;
        }
        if !critic_loss.is_finite() {
            return Err(AgentError::NonFiniteLoss(critic_loss));
        }

        self.updates += 1;
        let mut actor_loss = None;
        if self.updates % self.cfg.policy_delay == 0 {
            let acache = self.actor.forward_cached(x.clone())?;
            let xa_pi = hcat(&x, &acache.output);
            let ccache = self.critics[0].forward_cached(xa_pi)?;
            let up = Array2::from_elem((n, 1), -1.0 / n as f64);
            let (_, dinput) = self.critics[0].backward_batch(&ccache, &up)?;
            let in_dim = x.ncols();
            let mut da = dinput.slice(ndarray::s![.., in_dim..]).to_owned();
            let mut penalty = 0.0;
            if self.cfg.action_l2 > 0.0 {
                let k = self.cfg.action_l2 / (n as f64 * self.bound * self.bound);
                da.zip_mut_with(&acache.output, |d, &a| *d += 2.0 * k * a);
                penalty = k * acache.output.iter().map(|a| a * a).sum::<f64>();
            }
            let (g, _) = self.actor.backward_batch(&acache, &da)?;
            opt_step(&mut self.actor, &mut self.actor_opt, &g)?;
            actor_loss = Some(-ccache.output.mean().unwrap_or(0.0) + penalty);
            self.soft_update_targets();
        }
        Ok(TrainStats {
            critic_loss,
            actor_loss,
            loss: critic_loss,
            loss_final: critic_loss,
            entropy: 0.0,
        })
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.cfg.tau;
        soft_update(&mut self.actor_target, &self.actor, tau);
        for k in 0..2 {
            soft_update(&mut self.critic_targets[k], &self.critics[k], tau);
        }
    }

    /// Live networks keyed by checkpoint name.
    pub fn nets(&self, prefix: &str) -> Vec<(String, NetParams)> {
        vec![
            (format!("{prefix}_actor"), self.actor.clone()),
            (format!("{prefix}_critic1"), self.critics[0].clone()),
            (format!("{prefix}_critic2"), self.critics[1].clone()),
        ]
    }
}

impl DeterministicPolicy for OffPolicyLearner {
    fn act(&self, state: &[f64], context: &[f64]) -> Vec<f64> {
        let input = self.input(state, context);
        let mut a = self.actor.forward(&input).expect("actor input dimension");
        a.iter_mut().for_each(|v| *v = v.clamp(-self.bound, self.bound));
        a
    }
}

fn stack(rows: impl Iterator<Item = Vec<f64>>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = rows.collect();
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("ragged rows")
}

fn hcat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("row counts agree")
}

/// Output distribution of an on-policy learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyHead {
    /// Softmax over `n` discrete options.
    Categorical(usize),
    /// Diagonal Gaussian with a state-independent log-std; samples are
    /// clamped to `±bound` after their density is evaluated.
    Gaussian { dim: usize, bound: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnPolicyConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub reward_scale: f64,
    pub normalize_advantages: bool,
    /// Initial std of a Gaussian head relative to its bound.
    pub init_std: f64,
    pub max_grad_norm: f64,
}

impl Default for OnPolicyConfig {
    fn default() -> Self {
        OnPolicyConfig {
            hidden: vec![64, 64],
            lr: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 10,
            entropy_coef: 0.01,
            value_coef: 0.5,
            reward_scale: 1.0,
            normalize_advantages: true,
            init_std: 0.25,
            max_grad_norm: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub input: Vec<f64>,
    /// Categorical: `[index]`. Gaussian: the unclamped sample.
    pub action: Vec<f64>,
    pub logprob: f64,
    pub reward: f64,
    /// Terminal for advantage computation.
    pub done: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    /// Input following the last step, for bootstrapping when it is not done.
    pub bootstrap_input: Option<Vec<f64>>,
}

/// Generalized advantage estimates and returns.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for i in (0..n).rev() {
        let live = if dones[i] { 0.0 } else { 1.0 };
        let delta = rewards[i] + gamma * next_value * live - values[i];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[i] = next_adv;
        next_value = values[i];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Clipped ratio actually used by the surrogate for one sample.
pub fn effective_ratio(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    if ratio * advantage <= clipped * advantage {
        ratio
    } else {
        clipped
    }
}

/// Negated mean clipped surrogate (a loss to minimise).
pub fn clipped_surrogate(ratios: &[f64], advantages: &[f64], clip_eps: f64) -> f64 {
    let n = ratios.len() as f64;
    -ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| effective_ratio(r, a, clip_eps) * a)
        .sum::<f64>()
        / n
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

const LOG_STD_RANGE: (f64, f64) = (-20.0, 2.0);
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Stochastic actor with a separate state-value critic.
#[derive(Debug, Clone)]
pub struct OnPolicyLearner {
    pub cfg: OnPolicyConfig,
    pub head: PolicyHead,
    pub actor: NetParams,
    pub critic: NetParams,
    pub log_std: Vec<f64>,
    actor_opt: OptimState,
    critic_opt: OptimState,
    log_std_opt: (Vec<f64>, Vec<f64>, u64),
    pub rollout: Rollout,
    pub updates: u64,
}

impl OnPolicyLearner {
    pub fn new(cfg: OnPolicyConfig, input_dim: usize, head: PolicyHead, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out_dim, out_act, log_std) = match head {
            PolicyHead::Categorical(n) => (n, OutputActivation::Linear, Vec::new()),
            PolicyHead::Gaussian { dim, bound } => (
                dim,
                OutputActivation::Linear,
                vec![(cfg.init_std * bound).ln(); dim],
            ),
        };
        let mut sizes = vec![input_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(out_dim);
        let mut actor = NetParams::new(&sizes, Activation::Tanh, out_act, &mut rng);
        actor.scale_last_layer(0.01);
        let mut csizes = vec![input_dim];
        csizes.extend(&cfg.hidden);
        csizes.push(1);
        let critic = NetParams::new(&csizes, Activation::Tanh, OutputActivation::Linear, &mut rng);
        let d = log_std.len();
        OnPolicyLearner {
            actor_opt: OptimState::new(&actor, cfg.lr),
            critic_opt: OptimState::new(&critic, cfg.lr),
            log_std_opt: (vec![0.0; d], vec![0.0; d], 0),
            actor,
            critic,
            log_std,
            head,
            cfg,
            rollout: Rollout::default(),
            updates: 0,
        }
    }

    pub fn value(&self, input: &[f64]) -> f64 {
        self.critic.forward(input).expect("critic input dimension")[0]
    }

    /// Probabilities of a categorical head.
    pub fn probabilities(&self, input: &[f64]) -> Vec<f64> {
        softmax(&self.actor.forward(input).expect("actor input dimension"))
    }

    /// Exact log density (Gaussian, before clamping) or log mass
    /// (categorical) of `action`.
    pub fn log_prob(&self, input: &[f64], action: &[f64]) -> f64 {
        let out = self.actor.forward(input).expect("actor input dimension");
        match self.head {
            PolicyHead::Categorical(_) => log_softmax(&out)[action[0] as usize],
            PolicyHead::Gaussian { .. } => gaussian_logp(&out, &self.log_std, action),
        }
    }

    /// Samples `(output, logprob)`. Categorical output is `[index]`;
    /// Gaussian output is clamped after its density is evaluated.
    pub fn select<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let (raw, lp) = self.sample_raw(input, rng);
        (self.clamp_output(&raw), lp)
    }

    /// Like [`select`](Self::select) but returns the unclamped sample too.
    pub fn sample_raw<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let out = self.actor.forward(input).expect("actor input dimension");
        match self.head {
            PolicyHead::Categorical(_) => {
                let p = softmax(&out);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = p.len() - 1;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                (vec![k as f64], p[k].ln())
            }
            PolicyHead::Gaussian { .. } => {
                let a: Vec<f64> = out
                    .iter()
                    .zip(&self.log_std)
                    .map(|(m, ls)| {
                        let e: f64 = StandardNormal.sample(rng);
                        m + ls.exp() * e
                    })
                    .collect();
                let lp = gaussian_logp(&out, &self.log_std, &a);
                (a, lp)
            }
        }
    }

    pub fn clamp_output(&self, raw: &[f64]) -> Vec<f64> {
        match self.head {
            PolicyHead::Categorical(_) => raw.to_vec(),
            PolicyHead::Gaussian { bound, .. } => raw.iter().map(|v| v.clamp(-bound, bound)).collect(),
        }
    }

    pub fn record(&mut self, step: RolloutStep) {
        self.rollout.steps.push(step);
    }

    /// Advantage estimation over the pending rollout followed by `epochs`
    /// clipped-surrogate updates. The combined scalar loss passes through
    /// `loss_transform` before backpropagation; its slope scales every
    /// gradient. The rollout is consumed.
    pub fn update(&mut self, loss_transform: impl Fn(f64) -> f64) -> Result<TrainStats, AgentError> {
        let rollout = std::mem::take(&mut self.rollout);
        if rollout.steps.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        let last_done = rollout.steps.last().map_or(true, |s| s.done);
        let last_value = match (&rollout.bootstrap_input, last_done) {
            (Some(x), false) => self.value(x),
            _ => 0.0,
        };
        let rewards: Vec<f64> = rollout.steps.iter().map(|s| s.reward * self.cfg.reward_scale).collect();
        let values: Vec<f64> = rollout.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = rollout.steps.iter().map(|s| s.done).collect();
        let (mut adv, ret) = gae(&rewards, &values, &dones, last_value, self.cfg.gamma, self.cfg.gae_lambda);
        if self.cfg.normalize_advantages && adv.len() > 1 {
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            adv.iter_mut().for_each(|a| *a = (*a - mean) / (sd + 1e-8));
        }
        self.update_with(&rollout.steps, &adv, &ret, loss_transform)
    }

    /// The epoch loop for precomputed advantages and returns.
    pub fn update_with(
        &mut self,
        steps: &[RolloutStep],
        adv: &[f64],
        ret: &[f64],
        loss_transform: impl Fn(f64) -> f64,
    ) -> Result<TrainStats, AgentError> {
        if steps.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        let n = steps.len();
        let nf = n as f64;
        let x = stack(steps.iter().map(|s| s.input.clone()));
        let mut stats = TrainStats::default();
        for _ in 0..self.cfg.epochs {
            let acache = self.actor.forward_cached(x.clone())?;
            let ccache = self.critic.forward_cached(x.clone())?;
            let mut up_actor = Array2::zeros(acache.output.dim());
            let mut up_logstd = vec![0.0; self.log_std.len()];
            let mut policy_loss = 0.0;
            let mut entropy = 0.0;
            match self.head {
                PolicyHead::Categorical(_) => {
                    for i in 0..n {
                        let z: Vec<f64> = acache.output.row(i).to_vec();
                        let p = softmax(&z);
                        let lp = log_softmax(&z);
                        let k = steps[i].action[0] as usize;
                        let ratio = (lp[k] - steps[i].logprob).exp();
                        let eff = effective_ratio(ratio, adv[i], self.cfg.clip_eps);
                        policy_loss -= eff * adv[i] / nf;
                        let h: f64 = -p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
                        entropy += h / nf;
                        // d(-eff*A)/dz when the unclipped term is active.
                        let active = eff == ratio;
                        for j in 0..z.len() {
                            let onehot = if j == k { 1.0 } else { 0.0 };
                            let mut g = 0.0;
                            if active {
                                g -= ratio * adv[i] * (onehot - p[j]) / nf;
                            }
                            // d(-c*H)/dz_j = c * p_j (log p_j + H)
                            g += self.cfg.entropy_coef * p[j] * (lp[j] + h) / nf;
                            up_actor[[i, j]] = g;
                        }
                    }
                }
                PolicyHead::Gaussian { .. } => {
                    let d = self.log_std.len();
                    let h_per: f64 = self.log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum();
                    entropy = h_per;
                    for i in 0..n {
                        let mean: Vec<f64> = acache.output.row(i).to_vec();
                        let lpn = gaussian_logp(&mean, &self.log_std, &steps[i].action);
                        let ratio = (lpn - steps[i].logprob).exp();
                        let eff = effective_ratio(ratio, adv[i], self.cfg.clip_eps);
                        policy_loss -= eff * adv[i] / nf;
                        if eff == ratio {
                            for j in 0..d {
                                let var = (2.0 * self.log_std[j]).exp();
                                let diff = steps[i].action[j] - mean[j];
                                let c = -ratio * adv[i] / nf;
                                up_actor[[i, j]] = c * diff / var;
                                up_logstd[j] += c * (diff * diff / var - 1.0);
                            }
                        }
                    }
                    for g in up_logstd.iter_mut() {
                        *g -= self.cfg.entropy_coef;
                    }
                }
            }
            let mut value_loss = 0.0;
            let mut up_critic = Array2::zeros((n, 1));
            for i in 0..n {
                let err = ccache.output[[i, 0]] - ret[i];
                value_loss += err * err / nf;
                up_critic[[i, 0]] = self.cfg.value_coef * 2.0 * err / nf;
            }
            let loss = policy_loss + self.cfg.value_coef * value_loss - self.cfg.entropy_coef * entropy;
            if !loss.is_finite() {
                return Err(AgentError::NonFiniteLoss(loss));
            }
            let loss_final = loss_transform(loss);
            let h = 1e-6 * loss.abs().max(1.0);
            let slope = (loss_transform(loss + h) - loss_transform(loss - h)) / (2.0 * h);
            if !loss_final.is_finite() || !slope.is_finite() {
                return Err(AgentError::NonFiniteLoss(loss_final));
            }

            up_actor.mapv_inplace(|v| v * slope);
            up_critic.mapv_inplace(|v| v * slope);
            up_logstd.iter_mut().for_each(|v| *v *= slope);

            if up_actor.iter().any(|&v| v != 0.0) {
                let (mut g, _) = self.actor.backward_batch(&acache, &up_actor)?;
                g.clip_norm(self.cfg.max_grad_norm);
                opt_step(&mut self.actor, &mut self.actor_opt, &g)?;
            }
            let (mut g, _) = self.critic.backward_batch(&ccache, &up_critic)?;
            g.clip_norm(self.cfg.max_grad_norm);
            opt_step(&mut self.critic, &mut self.critic_opt, &g)?;
            if up_logstd.iter().any(|&v| v != 0.0) {
                self.step_log_std(&up_logstd);
            }
            stats = TrainStats {
                critic_loss: value_loss,
                actor_loss: Some(policy_loss),
                loss,
                loss_final,
                entropy,
            };
        }
        self.updates += 1;
        Ok(stats)
    }

    fn step_log_std(&mut self, g: &[f64]) {
        let (m, v, t) = &mut self.log_std_opt;
        *t += 1;
        let (b1, b2): (f64, f64) = (0.9, 0.999);
        let c1 = 1.0 - b1.powi(*t as i32);
        let c2 = 1.0 - b2.powi(*t as i32);
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            self.log_std[j] -= self.cfg.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + 1e-8);
            self.log_std[j] = self.log_std[j].clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1);
        }
    }

    /// Live networks keyed by checkpoint name. A Gaussian head's log-std
    /// is stored as the bias of a single zero-weight layer.
    pub fn nets(&self, prefix: &str) -> Vec<(String, NetParams)> {
        let mut out = vec![
            (format!("{prefix}_actor"), self.actor.clone()),
            (format!("{prefix}_critic"), self.critic.clone()),
        ];
        if !self.log_std.is_empty() {
            let mut ls = NetParams::zeros(&[1, self.log_std.len()], Activation::Relu, OutputActivation::Linear);
            ls.biases[0] = Array1::from_vec(self.log_std.clone());
            out.push((format!("{prefix}_logstd"), ls));
        }
        out
    }
}

fn gaussian_logp(mean: &[f64], log_std: &[f64], a: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(a)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Independent uniform goals within per-dimension bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPolicy {
    pub bounds: Vec<(f64, f64)>,
}

impl RandomPolicy {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        RandomPolicy { bounds }
    }

    pub fn random_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
    }
}

pub const ENTROPY_BINS: usize = 16;
pub const ENTROPY_MIN_SAMPLES: usize = 100;

/// Histogram estimate of the differential entropy (nats) of `goals` over a
/// fixed grid of [`ENTROPY_BINS`] bins per dimension spanning `bounds`.
/// Samples outside the bounds are assigned to the nearest edge bin.
pub fn entropy_estimate(goals: &[Vec<f64>], bounds: &[(f64, f64)]) -> Result<f64, AgentError> {
    if goals.len() < ENTROPY_MIN_SAMPLES {
        return Err(AgentError::TooFewSamples {
            needed: ENTROPY_MIN_SAMPLES,
            got: goals.len(),
        });
    }
    let mut counts = std::collections::BTreeMap::<Vec<usize>, usize>::new();
    for g in goals {
        let key: Vec<usize> = g
            .iter()
            .zip(bounds)
            .map(|(&v, &(lo, hi))| {
                let u = (v - lo) / (hi - lo) * ENTROPY_BINS as f64;
                (u.floor().max(0.0) as usize).min(ENTROPY_BINS - 1)
            })
            .collect();
        *counts.entry(key).or_default() += 1;
    }
    let n = goals.len() as f64;
    let log_bin_volume = entropy_floor(bounds);
    let discrete: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(discrete + log_bin_volume)
}

/// The estimator's minimum: log of one bin's volume.
pub fn entropy_floor(bounds: &[(f64, f64)]) -> f64 {
    bounds
        .iter()
        .map(|&(lo, hi)| ((hi - lo) / ENTROPY_BINS as f64).ln())
        .sum()
}
