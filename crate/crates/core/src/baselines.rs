//! Comparison agents: a two-level agent whose exploration bursts are
//! triggered by an adaptive threshold over the value promise discrepancy,
//! and a monolithic agent that perturbs both levels with Gaussian noise.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::harness::RunLog;
use crate::hierarchy::{stream, Control, HierarchyError, LearnerSettings, Runner};
use crate::types::{validate_config, AgentKind, ConfigError, ModeId, RunConfig};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("expected {expected} rewards, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// `|v_then - sum_i gamma^i rewards[i] - gamma^k v_now|` with `rewards[0]`
/// the most recent reward.
pub fn value_promise(v_then: f64, rewards: &[f64], v_now: f64, gamma: f64, k: usize) -> Result<f64, BaselineError> {
    if rewards.len() != k {
        return Err(BaselineError::LengthMismatch {
            expected: k,
            got: rewards.len(),
        });
    }
    let mut discounted = 0.0;
    let mut g = 1.0;
    for r in rewards {
        discounted += g * r;
        g *= gamma;
    }
    Ok((v_then - discounted - g * v_now).abs())
}

/// Rolling state for the value promise discrepancy over the last `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePromiseWindow {
    pub k: usize,
    pub gamma: f64,
    rewards: VecDeque<f64>,
    values: VecDeque<f64>,
}

impl ValuePromiseWindow {
    pub fn new(k: usize, gamma: f64) -> Self {
        assert!(k >= 1);
        ValuePromiseWindow {
            k,
            gamma,
            rewards: VecDeque::with_capacity(k),
            values: VecDeque::with_capacity(k),
        }
    }

    /// Records the value of the state a step started from and the reward it
    /// produced.
    pub fn record(&mut self, value: f64, reward: f64) {
        if self.values.len() == self.k {
            self.values.pop_front();
            self.rewards.pop_front();
        }
        self.values.push_back(value);
        self.rewards.push_back(reward);
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.k
    }

    /// Discrepancy between the value `k` steps ago and the realised rewards
    /// plus `v_now`; `None` until `k` steps have been recorded.
    pub fn signal(&self, v_now: f64) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        let recent_first: Vec<f64> = self.rewards.iter().rev().copied().collect();
        value_promise(self.values[0], &recent_first, v_now, self.gamma, self.k).ok()
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.rewards.clear();
    }
}

/// Adaptive threshold turning a non-negative signal into switch events at a
/// target long-run rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomeostasisState {
    pub rho: f64,
    /// Exponential moving average of the signal.
    pub mean: f64,
    pub multiplier: f64,
    pub smoothing: f64,
    /// Log-step of the multiplier adaptation.
    pub adapt_rate: f64,
    pub seen: u64,
}

impl HomeostasisState {
    pub fn new(rho: f64) -> Self {
        HomeostasisState {
            rho,
            mean: 0.0,
            multiplier: 1.0 / rho,
            smoothing: 0.01,
            adapt_rate: 0.05,
            seen: 0,
        }
    }
}

/// One update. The switch probability is `signal / (mean * multiplier)`
/// capped at one; the multiplier grows by `exp(eta (1 - rho))` after a
/// switch and shrinks by `exp(-eta rho)` otherwise, so its log drifts to
/// zero exactly when the switch rate equals `rho`.
pub fn homeostasis_step<R: Rng + ?Sized>(h: HomeostasisState, signal: f64, rng: &mut R) -> (bool, HomeostasisState) {
    debug_assert!(signal >= 0.0);
    let mut h = h;
    h.mean = if h.seen == 0 {
        signal
    } else {
        (1.0 - h.smoothing) * h.mean + h.smoothing * signal
    };
    h.seen += 1;
    let p = if signal > 0.0 && h.mean > 0.0 {
        (signal / (h.mean * h.multiplier)).min(1.0)
    } else {
        0.0
    };
    let switch = p > 0.0 && rng.random::<f64>() < p;
    h.multiplier *= if switch {
        (h.adapt_rate * (1.0 - h.rho)).exp()
    } else {
        (-h.adapt_rate * h.rho).exp()
    };
    (switch, h)
}

/// Decides whether an exploration burst starts on this step.
pub trait SwitchTrigger {
    fn fire(&mut self, signal: Option<f64>) -> bool;
}

pub struct HomeostasisTrigger {
    pub state: HomeostasisState,
    rng: ChaCha8Rng,
}

impl HomeostasisTrigger {
    pub fn new(rho: f64, rng: ChaCha8Rng) -> Self {
        HomeostasisTrigger {
            state: HomeostasisState::new(rho),
            rng,
        }
    }
}

impl SwitchTrigger for HomeostasisTrigger {
    fn fire(&mut self, signal: Option<f64>) -> bool {
        let Some(s) = signal else {
            return false;
        };
        let (switch, h) = homeostasis_step(self.state, s, &mut self.rng);
        self.state = h;
        switch
    }
}

pub struct NeverTrigger;

impl SwitchTrigger for NeverTrigger {
    fn fire(&mut self, _: Option<f64>) -> bool {
        false
    }
}

pub struct AlwaysTrigger;

impl SwitchTrigger for AlwaysTrigger {
    fn fire(&mut self, _: Option<f64>) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefConfig {
    /// `Random` for uniform goals, `OnPolicy` for the on-policy learner.
    pub explore_mode: ModeId,
    pub explore_duration: u64,
    pub rho: f64,
}

impl RefConfig {
    pub fn for_run(cfg: &RunConfig) -> Self {
        RefConfig {
            explore_mode: if cfg.agent == AgentKind::RefOnPolicy {
                ModeId::OnPolicy
            } else {
                ModeId::Random
            },
            explore_duration: cfg.schedule.explore_duration,
            rho: cfg.baseline_rho,
        }
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.explore_mode == ModeId::Exploit {
            return Err(ConfigError::RangeViolation("explore mode must be random or onpolicy".into()));
        }
        if self.explore_duration == 0 {
            return Err(ConfigError::RangeViolation("explore_duration must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError::RangeViolation(format!("rho = {} not in (0,1)", self.rho)));
        }
        Ok(self)
    }
}

/// Burst bookkeeping for the reference agent.
pub struct ReferenceControl {
    pub explore_mode: ModeId,
    pub duration: u64,
    pub trigger: Box<dyn SwitchTrigger>,
    pub window: ValuePromiseWindow,
    /// Completed burst lengths.
    pub bursts: Vec<u64>,
    burst_left: u64,
    burst_len: u64,
    v_now: f64,
}

impl ReferenceControl {
    pub fn new(rc: RefConfig, k: usize, gamma: f64, trigger: Box<dyn SwitchTrigger>) -> Self {
        ReferenceControl {
            explore_mode: rc.explore_mode,
            duration: rc.explore_duration,
            trigger,
            window: ValuePromiseWindow::new(k, gamma),
            bursts: Vec::new(),
            burst_left: 0,
            burst_len: 0,
            v_now: 0.0,
        }
    }

    /// Mode for the coming step and whether a burst starts with it.
    /// Triggers are ignored while a burst is running.
    pub fn begin_step(&mut self, v_now: f64) -> (ModeId, bool) {
        self.v_now = v_now;
        if self.burst_left > 0 {
            return (self.explore_mode, false);
        }
        if self.trigger.fire(self.window.signal(v_now)) {
            self.burst_left = self.duration;
            self.burst_len = 0;
            return (self.explore_mode, true);
        }
        (ModeId::Exploit, false)
    }

    pub fn end_step(&mut self, reward: f64) {
        self.window.record(self.v_now, reward);
        if self.burst_left > 0 {
            self.burst_left -= 1;
            self.burst_len += 1;
            if self.burst_left == 0 {
                self.bursts.push(self.burst_len);
            }
        }
    }
}

/// Two-level agent with homeostasis-triggered exploration bursts.
pub fn reference_run(cfg: RunConfig, rc: RefConfig) -> Result<RunLog, HierarchyError> {
    reference_run_with(cfg, rc, &LearnerSettings::default(), None)
}

/// As [`reference_run`]; `trigger` replaces the homeostasis trigger.
pub fn reference_run_with(
    cfg: RunConfig,
    rc: RefConfig,
    settings: &LearnerSettings,
    trigger: Option<Box<dyn SwitchTrigger>>,
) -> Result<RunLog, HierarchyError> {
    let cfg = validate_config(cfg)?;
    let rc = rc.validate()?;
    let trigger = trigger.unwrap_or_else(|| Box::new(HomeostasisTrigger::new(rc.rho, stream(cfg.seed, 3))));
    let control = ReferenceControl::new(rc, cfg.schedule.promise_k, settings.mid.gamma, trigger);
    Runner::new(cfg, settings.clone(), Control::Reference(Box::new(control))).run()
}

/// Two-level off-policy hierarchy with noise on both levels every step.
pub fn monolithic_run(cfg: RunConfig) -> Result<RunLog, HierarchyError> {
    let settings = LearnerSettings::default();
    let noise = settings.mid.noise_std;
    monolithic_run_with(cfg, &settings, noise)
}

/// `mid_noise` is the goal noise std relative to the goal bound.
pub fn monolithic_run_with(cfg: RunConfig, settings: &LearnerSettings, mid_noise: f64) -> Result<RunLog, HierarchyError> {
    let cfg = validate_config(cfg)?;
    Runner::new(cfg, settings.clone(), Control::Monolithic { mid_noise }).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Task;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn oracle(v_then: f64, rewards: &[f64], v_now: f64, gamma: f64) -> f64 {
        let k = rewards.len() as i32;
        let s: f64 = rewards
            .iter()
            .enumerate()
            .map(|(i, r)| gamma.powi(i as i32) * r)
            .sum();
        (v_then - s - gamma.powi(k) * v_now).abs()
    }

    #[test]
    fn value_promise_examples() {
        assert_eq!(value_promise(5.0, &[1.0, 1.0], 3.0, 1.0, 2).unwrap(), 0.0);
        assert_eq!(value_promise(5.0, &[0.0, 0.0], 0.0, 0.9, 2).unwrap(), 5.0);
        assert_eq!(
            value_promise(5.0, &[0.0], 0.0, 0.9, 2),
            Err(BaselineError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    proptest! {
        #[test]
        fn value_promise_matches_direct_sum(
            v_then in -100.0f64..100.0,
            v_now in -100.0f64..100.0,
            gamma in 0.01f64..1.0,
            rewards in prop::collection::vec(-10.0f64..10.0, 1..20),
        ) {
            let k = rewards.len();
            let got = value_promise(v_then, &rewards, v_now, gamma, k).unwrap();
            let want = oracle(v_then, &rewards, v_now, gamma);
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }

        #[test]
        fn undiscounted_shift_invariance(
            v in -100.0f64..100.0,
            v_now in -100.0f64..100.0,
            c in -50.0f64..50.0,
            rewards in prop::collection::vec(-10.0f64..10.0, 1..10),
        ) {
            let k = rewards.len();
            let a = value_promise(v, &rewards, v_now, 1.0, k).unwrap();
            let b = value_promise(v + c, &rewards, v_now + c, 1.0, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn window_aligns_oldest_value() {
        let mut w = ValuePromiseWindow::new(2, 1.0);
        assert_eq!(w.signal(0.0), None);
        w.record(5.0, 1.0);
        w.record(4.0, 1.0);
        assert_eq!(w.signal(3.0), Some(0.0));
        w.record(9.0, 0.0);
        // values [4, 9], rewards recent-first [0, 1]
        assert_eq!(w.signal(3.0), Some(0.0));
    }

    fn switch_rate(signals: impl Fn(u64) -> f64, rho: f64, steps: u64, seed: u64) -> f64 {
        let mut h = HomeostasisState::new(rho);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = 0;
        for t in 0..steps {
            let (s, h2) = homeostasis_step(h, signals(t), &mut rng);
            h = h2;
            assert!(h.multiplier > 0.0);
            n += s as u64;
        }
        n as f64 / steps as f64
    }

    #[test]
    fn homeostasis_tracks_rate_on_constant_signal() {
        for seed in 0..3 {
            let r = switch_rate(|_| 2.5, 0.01, 100_000, seed);
            assert!((0.005..=0.02).contains(&r), "rate {r}");
        }
    }

    #[test]
    fn homeostasis_silent_on_zero_signal() {
        assert_eq!(switch_rate(|_| 0.0, 0.01, 10_000, 0), 0.0);
    }

    #[test]
    fn homeostasis_scale_adapts() {
        let base = |t: u64| 1.0 + ((t * 7919) % 13) as f64 / 13.0;
        let a = switch_rate(base, 0.01, 100_000, 9);
        let b = switch_rate(|t| 2.0 * base(t), 0.01, 100_000, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn rho_zero_rejected() {
        let mut cfg = RunConfig::new(Task::Push, AgentKind::RefUniform);
        cfg.baseline_rho = 0.0;
        let rc = RefConfig::for_run(&cfg);
        assert!(matches!(reference_run(cfg, rc), Err(HierarchyError::Config(_))));
    }

    fn small(agent: AgentKind, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new(Task::Push, agent);
        cfg.seed = seed;
        cfg.total_steps = 2_000;
        cfg.mode_config.pretrain_steps = 500;
        cfg.eval_interval = 1_000;
        cfg.eval_episodes = 2;
        cfg.schedule.window = 500;
        cfg.schedule.explore_duration = 30;
        cfg
    }

    #[test]
    fn never_trigger_matches_monolithic() {
        let s = LearnerSettings::default();
        let cfg = small(AgentKind::RefUniform, 1);
        let rc = RefConfig::for_run(&cfg);
        let a = reference_run_with(cfg.clone(), rc, &s, Some(Box::new(NeverTrigger))).unwrap();
        let b = monolithic_run_with(cfg, &s, s.mid.noise_std).unwrap();
        assert!(a.same_outcome(&b));
        assert!(a.bursts.is_empty());
    }

    #[test]
    fn always_trigger_saturates_exploration() {
        let s = LearnerSettings::default();
        let cfg = small(AgentKind::RefUniform, 2);
        let rc = RefConfig::for_run(&cfg);
        let log = reference_run_with(cfg.clone(), rc, &s, Some(Box::new(AlwaysTrigger))).unwrap();
        let post = cfg.total_steps - cfg.mode_config.pretrain_steps;
        assert_eq!(log.counters.total_steps.random, post);
        assert_eq!(log.counters.total_steps.exploit, 0);
        assert!(log.bursts.iter().all(|&b| b == cfg.schedule.explore_duration));
        assert_eq!(log.bursts.len() as u64, post / cfg.schedule.explore_duration);
    }

    #[test]
    fn reference_bursts_have_fixed_length() {
        let mut cfg = small(AgentKind::RefOnPolicy, 3);
        cfg.baseline_rho = 0.02;
        let rc = RefConfig::for_run(&cfg);
        let log = reference_run(cfg.clone(), rc).unwrap();
        assert!(log.bursts.iter().all(|&b| b == cfg.schedule.explore_duration));
        let ended = |s: &&crate::harness::ModeSegment| s.start + s.len == cfg.total_steps;
        for seg in log.mode_trace.iter().filter(|s| s.mode == ModeId::OnPolicy && !ended(s)) {
            assert_eq!(seg.len % cfg.schedule.explore_duration, 0);
        }
    }

    #[test]
    fn monolithic_counts_exploit_and_replays() {
        let cfg = small(AgentKind::Monolithic, 4);
        let a = monolithic_run(cfg.clone()).unwrap();
        let b = monolithic_run(cfg.clone()).unwrap();
        assert!(a.same_outcome(&b));
        assert_eq!(a.counters.total_steps.exploit, cfg.total_steps - cfg.mode_config.pretrain_steps);
        assert_eq!(a.counters.total_steps.random + a.counters.total_steps.onpolicy, 0);

        let s = LearnerSettings::default();
        let c = monolithic_run_with(cfg.clone(), &s, 0.0).unwrap();
        let d = monolithic_run_with(cfg, &s, 0.0).unwrap();
        assert!(c.same_outcome(&d));
    }
}
