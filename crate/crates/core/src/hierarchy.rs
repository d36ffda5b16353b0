//! Three-level orchestration. A categorical top policy picks which middle
//! policy (uniform random, on-policy Gaussian, or the deterministic
//! off-policy learner) emits relative goals for the next top horizon; a
//! goal-conditioned low learner turns goals into actions.
//!
//! The same step loop also drives the two-level comparison agents in
//! [`crate::baselines`]; only the source of the current mode differs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{
    entropy_estimate, AgentError, ContextField, DeterministicPolicy, InputMap, OffPolicyConfig,
    OffPolicyLearner, OnPolicyConfig, OnPolicyLearner, PolicyHead, RandomPolicy, RolloutStep,
};
use crate::approx::NetParams;
use crate::baselines::{ReferenceControl, SwitchTrigger};
use crate::env::{self, judge_success, EnvError, EnvState, TaskSpec};
use crate::harness::{ModeSegment, RunLog, WindowRow};
use crate::types::{
    AgentKind, ConfigError, EvalReport, ModeConfig, ModeId, PerMode, RunConfig,
    TopHorizonStats, Transition,
};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("horizon closed with zero recorded steps")]
    ZeroCount,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    /// Lower levels only; goals are uniform random.
    Pretrain,
    /// Top decisions are forced to Random.
    StartingMode,
    Autonomous,
}

pub fn phase_at(t: u64, mc: &ModeConfig) -> Phase {
    if t < mc.pretrain_steps {
        Phase::Pretrain
    } else if t < mc.pretrain_steps + mc.starting_mode_steps {
        Phase::StartingMode
    } else {
        Phase::Autonomous
    }
}

/// `(1 + alpha) * r_m`, or `r_m` when disabled.
pub fn modify_reward(r_m: f64, alpha: f64, enabled: bool) -> f64 {
    if enabled {
        r_m + alpha * r_m
    } else {
        r_m
    }
}

/// Scales the top loss by the latest evaluation success rate: exploration
/// horizons are penalised by `s_e * loss`, exploit horizons relieved by it.
pub fn modify_loss(loss: f64, s_e: f64, mode: ModeId, enabled: bool) -> f64 {
    if !enabled {
        return loss;
    }
    if mode.is_exploration() {
        loss + s_e * loss
    } else {
        loss - s_e * loss
    }
}

/// Closes a top horizon. Returns `(r_final, done_top, s_o_m)` and resets
/// the accumulators.
pub fn horizon_close(
    stats: &mut TopHorizonStats,
    cfg: &ModeConfig,
    mode: ModeId,
    starting: bool,
    reward_mod: bool,
) -> Result<(f64, bool, f64), HierarchyError> {
    if stats.count_m == 0 {
        return Err(HierarchyError::ZeroCount);
    }
    let s_o_m = stats.done_m as f64 / stats.count_m as f64;
    let r_final = modify_reward(stats.r_m, cfg.alpha[mode], reward_mod);
    let done_top = s_o_m >= cfg.reference_for(mode, starting);
    stats.s_o_m = s_o_m;
    stats.forced_done = done_top;
    stats.reset();
    Ok((r_final, done_top, s_o_m))
}

/// Re-expresses a relative goal after the agent moved: `s + g - s'` on the
/// leading `goal.len()` coordinates.
pub fn goal_transition(state: &[f64], goal: &[f64], next_state: &[f64]) -> Vec<f64> {
    goal.iter()
        .enumerate()
        .map(|(i, g)| state[i] + g - next_state[i])
        .collect()
}

/// Intrinsic low-level reward: negative distance still left to the goal.
pub fn low_reward(state: &[f64], goal: &[f64], next_state: &[f64]) -> f64 {
    -goal_transition(state, goal, next_state)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Noise-free episodes of the exploit middle policy over the low policy.
/// An episode succeeds once any step is judged successful.
pub fn evaluate_exploit<M, L, R>(
    mid: &M,
    low: &L,
    spec: &TaskSpec,
    episodes: u64,
    middle_horizon: u64,
    step: u64,
    rng: &mut R,
) -> EvalReport
where
    M: DeterministicPolicy + ?Sized,
    L: DeterministicPolicy + ?Sized,
    R: Rng + ?Sized,
{
    assert!(episodes >= 1);
    let mut successes = 0;
    for _ in 0..episodes {
        let mut s = env::reset(spec, rng);
        let mut goal = Vec::new();
        for k in 0..spec.episode_len {
            let obs = s.observe();
            if k % middle_horizon == 0 {
                goal = mid.act(&obs, &spec.target_pos);
            }
            let a = low.act(&obs, &goal);
            let next = match env::step(&s, &a, spec) {
                Ok((n, _, _)) => n,
                Err(_) => break,
            };
            if judge_success(&next, &spec.target_pos, spec) {
                successes += 1;
                break;
            }
            goal = goal_transition(&obs, &goal, &next.observe());
            s = next;
        }
    }
    EvalReport::new(successes, episodes, step)
}

/// Starting mode forces Random; otherwise the mode is sampled from `top`.
/// Returns the mode and its log-probability under `top`.
pub fn select_mode<R: Rng + ?Sized>(
    top: &OnPolicyLearner,
    obs: &[f64],
    phase: Phase,
    rng: &mut R,
) -> (ModeId, f64) {
    match phase {
        Phase::Autonomous => {
            let (a, lp) = top.select(obs, rng);
            (ModeId::from_index(a[0] as usize).expect("three-way head"), lp)
        }
        _ => (ModeId::Random, top.log_prob(obs, &[ModeId::Random.index() as f64])),
    }
}

/// Learner hyperparameters. Not part of the config file surface.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub low: OffPolicyConfig,
    pub mid: OffPolicyConfig,
    pub mid_on: OnPolicyConfig,
    pub top: OnPolicyConfig,
    /// Off-policy middle updates per closed middle horizon.
    pub mid_updates_per_decision: u64,
    /// Off-policy low updates per environment step.
    pub low_updates_per_step: u64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            low: OffPolicyConfig {
                gamma: 0.9,
                reward_scale: 0.1,
                noise_std: 0.2,
                hidden: vec![32, 32],
                batch_size: 32,
                ..Default::default()
            },
            mid: OffPolicyConfig {
                gamma: 0.97,
                reward_scale: 0.01,
                noise_std: 0.2,
                target_smoothing: (0.05, 0.125),
                action_l2: 0.1,
                ..Default::default()
            },
            mid_on: OnPolicyConfig {
                gamma: 0.97,
                reward_scale: 0.01,
                normalize_advantages: false,
                ..Default::default()
            },
            top: OnPolicyConfig {
                hidden: vec![32, 32],
                lr: 3e-4,
                gamma: 0.9,
                reward_scale: 0.002,
                entropy_coef: 0.12,
                normalize_advantages: false,
                ..Default::default()
            },
            mid_updates_per_decision: 4,
            low_updates_per_step: 1,
        }
    }
}

const STATE_SCALE: [f64; 6] = [0.1, 0.1, 1.0, 1.0, 0.1, 0.1];
const CONTEXT_SCALE: f64 = 0.1;
const GOAL_SCALE: f64 = 0.5;

pub fn low_input_map() -> InputMap {
    InputMap {
        state_scale: STATE_SCALE.to_vec(),
        context_scale: GOAL_SCALE,
        context: ContextField::Goal,
    }
}

pub fn mid_input_map() -> InputMap {
    InputMap {
        state_scale: STATE_SCALE.to_vec(),
        context_scale: CONTEXT_SCALE,
        context: ContextField::Target,
    }
}

pub const TOP_OBS_DIM: usize = 12;

/// Top observation: scaled state, scaled target, one-hot previous mode and
/// the last horizon success ratio.
pub fn top_observation(state: &[f64], target: &[f64], prev_mode: ModeId, last_s_o: f64) -> Vec<f64> {
    let mut v = mid_input_map().build(state, target);
    v.extend(prev_mode.one_hot());
    v.push(last_s_o);
    v
}

/// Derives an independent seed for stream `k` of a run.
pub(crate) fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k + 1);
    rng.random()
}

pub(crate) fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k + 1000);
    rng
}

#[derive(Debug, Clone)]
struct TopDecision {
    input: Vec<f64>,
    mode: ModeId,
    logprob: f64,
    value: f64,
    autonomous: bool,
}

pub(crate) struct AutoControl {
    top: OnPolicyLearner,
    stats: TopHorizonStats,
    decision: Option<TopDecision>,
    closed_autonomous: u64,
    last_s_o: f64,
}

pub(crate) enum Control {
    Auto(Box<AutoControl>),
    Reference(Box<ReferenceControl>),
    /// Goal noise std relative to the goal bound.
    Monolithic { mid_noise: f64 },
}

struct PendingDecision {
    start_obs: Vec<f64>,
    goal: Vec<f64>,
    /// On-policy record of the goal actually issued (raw sample for the
    /// on-policy mode).
    on_action: Vec<f64>,
    reward: f64,
    steps: u64,
    after_pretrain: bool,
}

const ENTROPY_RING: usize = 500;

pub(crate) struct Runner {
    cfg: RunConfig,
    settings: LearnerSettings,
    spec: TaskSpec,
    low: OffPolicyLearner,
    mid: OffPolicyLearner,
    mid_on: Option<OnPolicyLearner>,
    random: RandomPolicy,
    control: Control,
    rng_env: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    rng_eval: ChaCha8Rng,
    state: EnvState,
    mode: ModeId,
    goal: Vec<f64>,
    pending: Option<PendingDecision>,
    on_since_update: u64,
    log: RunLog,
    window_reward: f64,
    window_success: u64,
    window_counts: PerMode<u64>,
    goal_rings: PerMode<VecDeque<Vec<f64>>>,
}

impl Runner {
    pub(crate) fn new(cfg: RunConfig, settings: LearnerSettings, control: Control) -> Runner {
        let mut spec = TaskSpec::new(cfg.task);
        if cfg.schedule.episode_len > 0 {
            spec = spec.with_episode_len(cfg.schedule.episode_len);
        }
        let seed = cfg.seed;
        let gd = spec.goal_dim();
        let gbound = spec
            .goal_bounds
            .iter()
            .map(|&(lo, hi)| lo.abs().max(hi.abs()))
            .fold(0.0, f64::max);
        let low = OffPolicyLearner::new(
            settings.low.clone(),
            low_input_map(),
            gd,
            spec.action_dim,
            spec.action_bound,
            sub_seed(seed, 1),
        );
        let mid = OffPolicyLearner::new(
            settings.mid.clone(),
            mid_input_map(),
            spec.target_pos.len(),
            gd,
            gbound,
            sub_seed(seed, 2),
        );
        let wants_on = match &control {
            Control::Auto(_) => true,
            Control::Reference(r) => r.explore_mode == ModeId::OnPolicy,
            Control::Monolithic { .. } => false,
        };
        let mid_on = wants_on.then(|| {
            OnPolicyLearner::new(
                settings.mid_on.clone(),
                mid_input_map().dim(spec.target_pos.len()),
                PolicyHead::Gaussian { dim: gd, bound: gbound },
                sub_seed(seed, 3),
            )
        });
        let mut rng_env = stream(seed, 0);
        let state = env::reset(&spec, &mut rng_env);
        let log = RunLog {
            config: cfg.clone(),
            ..RunLog::default()
        };
        Runner {
            random: RandomPolicy::new(spec.goal_bounds.clone()),
            rng_policy: stream(seed, 1),
            rng_eval: stream(seed, 2),
            rng_env,
            state,
            mode: ModeId::Random,
            goal: vec![0.0; gd],
            pending: None,
            on_since_update: 0,
            log,
            window_reward: 0.0,
            window_success: 0,
            window_counts: PerMode::default(),
            goal_rings: PerMode::default(),
            low,
            mid,
            mid_on,
            control,
            spec,
            settings,
            cfg,
        }
    }

    pub(crate) fn auto_control(seed: u64, settings: &LearnerSettings) -> Control {
        Control::Auto(Box::new(AutoControl {
            top: OnPolicyLearner::new(
                settings.top.clone(),
                TOP_OBS_DIM,
                PolicyHead::Categorical(3),
                sub_seed(seed, 4),
            ),
            stats: TopHorizonStats::default(),
            decision: None,
            closed_autonomous: 0,
            last_s_o: 0.0,
        }))
    }

    pub(crate) fn run(mut self) -> Result<RunLog, HierarchyError> {
        for t in 0..self.cfg.total_steps {
            self.step(t)?;
        }
        self.finish()
    }

    fn phase(&self, t: u64) -> Phase {
        phase_at(t, &self.cfg.mode_config)
    }

    fn step(&mut self, t: u64) -> Result<(), HierarchyError> {
        let phase = self.phase(t);
        let obs = self.state.observe();
        let mut force_boundary = false;

        if phase != Phase::Pretrain && t == self.cfg.mode_config.pretrain_steps {
            force_boundary = true;
            self.begin_after_pretrain(&obs);
        }
        if phase != Phase::Pretrain {
            if let Control::Reference(rc) = &mut self.control {
                let v_now = self.mid.q_value(&self.mid.input(&obs, &self.spec.target_pos), &self.goal);
                let (m, started) = rc.begin_step(v_now);
                if started || m != self.mode {
                    force_boundary = true;
                }
                self.mode = m;
            }
        }

        if force_boundary {
            self.close_pending(&obs)?;
        }
        if self.pending.is_none() {
            self.issue_goal(&obs, phase)?;
        }

        // Low level acts with exploration noise.
        let low_in = self.low.input(&obs, &self.goal);
        let action = self.low.select(&low_in, true, &mut self.rng_policy);
        let (next, reward, ep_end) = env::step(&self.state, &action, &self.spec)?;
        let next_obs = next.observe();
        let success = judge_success(&next, &self.spec.target_pos, &self.spec);
        let next_goal = goal_transition(&obs, &self.goal, &next_obs);

        self.low.remember(Transition {
            state: obs.clone(),
            action_or_goal: action,
            reward: low_reward(&obs, &self.goal, &next_obs),
            next_state: next_obs.clone(),
            done: false,
            goal: self.goal.clone(),
            next_goal: next_goal.clone(),
            target_pos: self.spec.target_pos.clone(),
        });
        for _ in 0..self.settings.low_updates_per_step {
            self.low.train_step()?;
        }

        // Accounting.
        let counted_mode = if phase == Phase::Pretrain { ModeId::Random } else { self.mode };
        self.window_counts[counted_mode] += 1;
        self.window_reward += reward;
        if success {
            self.window_success += 1;
        }
        if phase != Phase::Pretrain {
            self.log.counters.total_steps[self.mode] += 1;
            if phase == Phase::Autonomous {
                self.log.counters.autonomous_steps[self.mode] += 1;
            }
            match self.log.mode_trace.last_mut() {
                Some(seg) if seg.mode == self.mode && seg.start + seg.len == t => seg.len += 1,
                _ => self.log.mode_trace.push(ModeSegment {
                    mode: self.mode,
                    start: t,
                    len: 1,
                }),
            }
        }
        if let Control::Auto(ac) = &mut self.control {
            if phase != Phase::Pretrain {
                ac.stats.record(reward, success);
            }
        }
        if let Control::Reference(rc) = &mut self.control {
            if phase != Phase::Pretrain {
                rc.end_step(reward * self.settings.mid.reward_scale);
            }
        }

        if let Some(p) = &mut self.pending {
            p.reward += reward;
            p.steps += 1;
        }
        self.state = next;
        self.goal = next_goal;

        // Boundaries.
        let top_close = match &self.control {
            Control::Auto(ac) => phase != Phase::Pretrain && ac.stats.count_m == self.cfg.top_horizon,
            _ => false,
        };
        let mid_close = top_close
            || ep_end
            || self.pending.as_ref().is_some_and(|p| p.steps >= self.cfg.middle_horizon);
        if mid_close {
            self.close_pending(&next_obs)?;
        }
        if top_close {
            self.close_top(t, &next_obs)?;
        }
        if ep_end {
            self.state = env::reset(&self.spec, &mut self.rng_env);
            if let Control::Reference(rc) = &mut self.control {
                rc.window.clear();
            }
        }

        if (t + 1) % self.cfg.eval_interval == 0 {
            let report = evaluate_exploit(
                &self.mid,
                &self.low,
                &self.spec,
                self.cfg.eval_episodes,
                self.cfg.middle_horizon,
                t + 1,
                &mut self.rng_eval,
            );
            self.log.evals.push(report);
        }
        if (t + 1) % self.cfg.schedule.window == 0 {
            self.close_window(t + 1);
        }
        Ok(())
    }

    fn begin_after_pretrain(&mut self, obs: &[f64]) {
        match &mut self.control {
            Control::Auto(ac) => {
                ac.stats = TopHorizonStats::default();
                let input = top_observation(obs, &self.spec.target_pos, ModeId::Random, 0.0);
                let phase = phase_at(self.cfg.mode_config.pretrain_steps, &self.cfg.mode_config);
                let (mode, logprob) = select_mode(&ac.top, &input, phase, &mut self.rng_policy);
                let value = ac.top.value(&input);
                ac.decision = Some(TopDecision {
                    input,
                    mode,
                    logprob,
                    value,
                    autonomous: phase == Phase::Autonomous,
                });
                self.mode = mode;
            }
            Control::Reference(_) | Control::Monolithic { .. } => self.mode = ModeId::Exploit,
        }
    }

    fn issue_goal(&mut self, obs: &[f64], phase: Phase) -> Result<(), HierarchyError> {
        let mid_in = self.mid.input(obs, &self.spec.target_pos);
        let (goal, on_action) = if phase == Phase::Pretrain {
            let g = self.random.random_goal(&mut self.rng_policy);
            (g.clone(), g)
        } else {
            match self.mode {
                ModeId::Random => {
                    let g = self.random.random_goal(&mut self.rng_policy);
                    (g.clone(), g)
                }
                ModeId::OnPolicy => {
                    let learner = self.mid_on.as_ref().expect("on-policy middle learner");
                    let (raw, _) = learner.sample_raw(&mid_in, &mut self.rng_policy);
                    (learner.clamp_output(&raw), raw)
                }
                ModeId::Exploit => {
                    let noise = match self.control {
                        Control::Monolithic { mid_noise } => mid_noise,
                        _ => self.settings.mid.noise_std,
                    };
                    let g = if noise > 0.0 {
                        let mut g = self.mid.select(&mid_in, false, &mut self.rng_policy);
                        let std = noise * self.mid.bound;
                        for v in g.iter_mut() {
                            let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.rng_policy);
                            *v = (*v + std * e).clamp(-self.mid.bound, self.mid.bound);
                        }
                        g
                    } else {
                        self.mid.select(&mid_in, false, &mut self.rng_policy)
                    };
                    (g.clone(), g)
                }
            }
        };
        if phase != Phase::Pretrain {
            self.log.counters.decisions[self.mode] += 1;
            let ring = &mut self.goal_rings[self.mode];
            ring.push_back(goal.clone());
            if ring.len() > ENTROPY_RING {
                ring.pop_front();
            }
        }
        self.goal = goal.clone();
        self.pending = Some(PendingDecision {
            start_obs: obs.to_vec(),
            goal,
            on_action,
            reward: 0.0,
            steps: 0,
            after_pretrain: phase != Phase::Pretrain,
        });
        Ok(())
    }

    /// Closes the open middle decision, if it covered at least one step.
    fn close_pending(&mut self, end_obs: &[f64]) -> Result<(), HierarchyError> {
        let Some(p) = self.pending.take() else {
            return Ok(());
        };
        if p.steps == 0 {
            return Ok(());
        }
        let target = self.spec.target_pos.clone();
        self.mid.remember(Transition {
            state: p.start_obs.clone(),
            action_or_goal: p.goal.clone(),
            reward: p.reward,
            next_state: end_obs.to_vec(),
            done: false,
            goal: Vec::new(),
            next_goal: Vec::new(),
            target_pos: target.clone(),
        });
        for _ in 0..self.settings.mid_updates_per_decision {
            self.mid.train_step()?;
        }
        if p.after_pretrain {
            if let Some(on) = &mut self.mid_on {
                let input = mid_input_map().build(&p.start_obs, &target);
                let logprob = on.log_prob(&input, &p.on_action);
                let value = on.value(&input);
                on.record(RolloutStep {
                    input,
                    action: p.on_action,
                    logprob,
                    reward: p.reward,
                    done: false,
                    value,
                });
                self.on_since_update += 1;
                if self.on_since_update >= self.cfg.schedule.onpolicy_train_every {
                    on.rollout.bootstrap_input = Some(mid_input_map().build(end_obs, &target));
                    on.update(|l| l)?;
                    self.on_since_update = 0;
                }
            }
        }
        Ok(())
    }

    fn close_top(&mut self, t: u64, next_obs: &[f64]) -> Result<(), HierarchyError> {
        let Control::Auto(ac) = &mut self.control else {
            return Ok(());
        };
        let mc = self.cfg.mode_config;
        let decision = ac.decision.take().expect("open top decision");
        let starting = !decision.autonomous;
        let (r_final, done_top, s_o_m) = horizon_close(
            &mut ac.stats,
            &mc,
            decision.mode,
            starting,
            self.cfg.reward_mod_enabled,
        )?;
        ac.last_s_o = s_o_m;
        self.log.top_closes.push((t + 1, decision.mode, done_top));

        let next_input = top_observation(next_obs, &self.spec.target_pos, decision.mode, s_o_m);
        if decision.autonomous {
            ac.top.record(RolloutStep {
                input: decision.input.clone(),
                action: vec![decision.mode.index() as f64],
                logprob: decision.logprob,
                reward: r_final,
                done: done_top,
                value: decision.value,
            });
            ac.closed_autonomous += 1;
            if ac.closed_autonomous % self.cfg.schedule.top_train_every == 0 {
                let s_e = self.log.evals.last().map_or(0.0, |e| e.s_e);
                let mode = decision.mode;
                let enabled = self.cfg.loss_mod_enabled;
                ac.top.rollout.bootstrap_input = Some(next_input.clone());
                ac.top.update(|l| modify_loss(l, s_e, mode, enabled))?;
            }
        }

        if t + 1 < self.cfg.total_steps {
            let phase = phase_at(t + 1, &mc);
            let (mode, logprob) = select_mode(&ac.top, &next_input, phase, &mut self.rng_policy);
            let value = ac.top.value(&next_input);
            ac.decision = Some(TopDecision {
                input: next_input,
                mode,
                logprob,
                value,
                autonomous: phase == Phase::Autonomous,
            });
            self.mode = mode;
        }
        Ok(())
    }

    fn close_window(&mut self, step: u64) {
        let w = self.cfg.schedule.window as f64;
        let bounds = &self.spec.goal_bounds;
        let mut entropy = PerMode::splat(f64::NAN);
        for m in ModeId::ALL {
            let goals: Vec<Vec<f64>> = self.goal_rings[m].iter().cloned().collect();
            if let Ok(h) = entropy_estimate(&goals, bounds) {
                entropy[m] = h;
            }
        }
        self.log.windows.push(WindowRow {
            step,
            counts: self.window_counts,
            reward_mean: self.window_reward / w,
            success_rate: self.window_success as f64 / w,
            entropy,
        });
        self.log.counters.window_counts.push(self.window_counts);
        self.window_counts = PerMode::default();
        self.window_reward = 0.0;
        self.window_success = 0;
    }

    fn finish(mut self) -> Result<RunLog, HierarchyError> {
        let mut nets: Vec<(String, NetParams)> = Vec::new();
        nets.extend(self.low.nets("low"));
        nets.extend(self.mid.nets("mid_exploit"));
        if let Some(on) = &self.mid_on {
            nets.extend(on.nets("mid_onpolicy"));
        }
        match &self.control {
            Control::Auto(ac) => nets.extend(ac.top.nets("top")),
            Control::Reference(rc) => self.log.bursts = rc.bursts.clone(),
            Control::Monolithic { .. } => {}
        }
        self.log.checkpoints = nets;
        Ok(self.log)
    }
}

/// Runs the three-level agent for `cfg.total_steps` environment steps.
/// The configuration is used as given.
pub fn run_training(cfg: RunConfig) -> Result<RunLog, HierarchyError> {
    run_training_with(cfg, &LearnerSettings::default())
}

pub fn run_training_with(cfg: RunConfig, settings: &LearnerSettings) -> Result<RunLog, HierarchyError> {
    let control = Runner::auto_control(cfg.seed, settings);
    Runner::new(cfg, settings.clone(), control).run()
}

/// Dispatches on `cfg.agent`.
pub fn run_agent(cfg: RunConfig, settings: &LearnerSettings) -> Result<RunLog, HierarchyError> {
    use crate::baselines::{monolithic_run_with, reference_run_with, RefConfig};
    match cfg.agent {
        AgentKind::Auto => run_training_with(cfg, settings),
        AgentKind::Monolithic => monolithic_run_with(cfg, settings, settings.mid.noise_std),
        AgentKind::RefUniform | AgentKind::RefOnPolicy => {
            let rc = RefConfig::for_run(&cfg);
            reference_run_with(cfg, rc, settings, None::<Box<dyn SwitchTrigger>>)
        }
    }
}
