//! Shared domain types: exploration modes, per-mode configuration, horizon
//! accumulators, counters and the run configuration with its flat
//! `key=value` file format.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use thiserror::Error;

/// The option chosen by the top policy: which middle-level policy emits goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeId {
    /// Uniform random goals.
    Random,
    /// Goals sampled from the on-policy (stochastic) middle learner.
    OnPolicy,
    /// Goals from the off-policy (deterministic) middle learner.
    Exploit,
}

impl ModeId {
    pub const ALL: [ModeId; 3] = [ModeId::Random, ModeId::OnPolicy, ModeId::Exploit];

    pub fn index(self) -> usize {
        match self {
            ModeId::Random => 0,
            ModeId::OnPolicy => 1,
            ModeId::Exploit => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<ModeId> {
        ModeId::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeId::Random => "random",
            ModeId::OnPolicy => "onpolicy",
            ModeId::Exploit => "exploit",
        }
    }

    pub fn is_exploration(self) -> bool {
        self != ModeId::Exploit
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(ModeId::Random),
            "onpolicy" => Ok(ModeId::OnPolicy),
            "exploit" => Ok(ModeId::Exploit),
            other => Err(ConfigError::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// One value per [`ModeId`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerMode<T> {
    pub random: T,
    pub onpolicy: T,
    pub exploit: T,
}

impl<T> PerMode<T> {
    pub fn new(random: T, onpolicy: T, exploit: T) -> Self {
        PerMode {
            random,
            onpolicy,
            exploit,
        }
    }

    pub fn splat(v: T) -> Self
    where
        T: Clone,
    {
        PerMode::new(v.clone(), v.clone(), v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeId, &T)> {
        ModeId::ALL.into_iter().map(move |m| (m, &self[m]))
    }
}

impl<T> Index<ModeId> for PerMode<T> {
    type Output = T;

    fn index(&self, m: ModeId) -> &T {
        match m {
            ModeId::Random => &self.random,
            ModeId::OnPolicy => &self.onpolicy,
            ModeId::Exploit => &self.exploit,
        }
    }
}

impl<T> IndexMut<ModeId> for PerMode<T> {
    fn index_mut(&mut self, m: ModeId) -> &mut T {
        match m {
            ModeId::Random => &mut self.random,
            ModeId::OnPolicy => &mut self.onpolicy,
            ModeId::Exploit => &mut self.exploit,
        }
    }
}

impl PerMode<u64> {
    pub fn sum(&self) -> u64 {
        self.random + self.onpolicy + self.exploit
    }
}

/// Guided-exploration parameters per mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConfig {
    /// Reward-modification coefficient per mode.
    pub alpha: PerMode<f64>,
    /// Success-ratio reference per mode, used after the starting mode.
    pub s_o_ref: PerMode<f64>,
    /// Success-ratio reference used while the starting mode forces Random.
    pub starting_s_o_ref: f64,
    /// Environment steps of forced-Random phase (after pretraining).
    pub starting_mode_steps: u64,
    /// Lower-levels-only warmup steps.
    pub pretrain_steps: u64,
}

impl ModeConfig {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Push => ModeConfig {
                alpha: PerMode::new(0.7, 0.4, 0.0),
                s_o_ref: PerMode::splat(0.6),
                starting_s_o_ref: 0.9,
                starting_mode_steps: 20_000,
                pretrain_steps: 5_000,
            },
            Task::Fall => ModeConfig {
                alpha: PerMode::new(0.7, -0.2, -0.2),
                s_o_ref: PerMode::new(0.9, 0.6, 0.6),
                starting_s_o_ref: 0.9,
                starting_mode_steps: 20_000,
                pretrain_steps: 5_000,
            },
        }
    }

    /// Reference success ratio in force for `mode`, depending on whether the
    /// starting mode is still active.
    pub fn reference_for(&self, mode: ModeId, starting: bool) -> f64 {
        if starting {
            self.starting_s_o_ref
        } else {
            self.s_o_ref[mode]
        }
    }
}

/// Accumulators for one top-level horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TopHorizonStats {
    /// Sum of environment rewards this horizon.
    pub r_m: f64,
    pub count_m: u64,
    /// Number of steps judged successful.
    pub done_m: u64,
    /// Set when the success ratio crossed its reference at horizon close.
    pub forced_done: bool,
    /// Last computed success ratio.
    pub s_o_m: f64,
}

impl TopHorizonStats {
    pub fn record(&mut self, reward: f64, success: bool) {
        self.r_m += reward;
        self.count_m += 1;
        if success {
            self.done_m += 1;
        }
    }

    /// Clears the accumulators (`R_m, Count_m, Done_m <- 0`). The last ratio
    /// and the forced flag survive until the next close.
    pub fn reset(&mut self) {
        self.r_m = 0.0;
        self.count_m = 0;
        self.done_m = 0;
    }
}

/// Result of one noise-free evaluation of the exploit hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub s_e: f64,
    pub episodes: u64,
    pub step_of_eval: u64,
}

impl EvalReport {
    pub fn new(successes: u64, episodes: u64, step_of_eval: u64) -> Self {
        assert!(episodes > 0 && successes <= episodes);
        EvalReport {
            s_e: successes as f64 / episodes as f64,
            episodes,
            step_of_eval,
        }
    }

    pub fn successes(&self) -> u64 {
        (self.s_e * self.episodes as f64).round() as u64
    }
}

/// Per-mode step and decision counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeCounters {
    /// Environment steps executed under each mode after pretraining.
    pub total_steps: PerMode<u64>,
    /// Steps under each mode after the starting mode ended.
    pub autonomous_steps: PerMode<u64>,
    /// Middle-level decisions per mode.
    pub decisions: PerMode<u64>,
    /// Per-window step counts (pretrain steps are attributed to Random,
    /// the goal source during warmup).
    pub window_counts: Vec<PerMode<u64>>,
}

/// One environment step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Low-level action, or the goal for middle-level records.
    pub action_or_goal: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True terminal flag. The provided tasks only truncate, so this stays
    /// false for time-limit ends and bootstrapping continues through them.
    pub done: bool,
    /// Lower-level context at the time of the action.
    pub goal: Vec<f64>,
    /// Lower-level context for the next step.
    pub next_goal: Vec<f64>,
    /// Higher-level context.
    pub target_pos: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Push,
    Fall,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Push => "push",
            Task::Fall => "fall",
        }
    }
}

impl FromStr for Task {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "push" => Ok(Task::Push),
            "fall" => Ok(Task::Fall),
            other => Err(ConfigError::Parse(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Three-level autonomous multi-mode agent.
    Auto,
    /// Homeostasis-triggered reference with uniform random bursts.
    RefUniform,
    /// Homeostasis-triggered reference with on-policy bursts.
    RefOnPolicy,
    /// Noise-based two-level hierarchy.
    Monolithic,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Auto => "auto",
            AgentKind::RefUniform => "ref-uniform",
            AgentKind::RefOnPolicy => "ref-onpolicy",
            AgentKind::Monolithic => "monolithic",
        }
    }
}

impl FromStr for AgentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(AgentKind::Auto),
            "ref-uniform" => Ok(AgentKind::RefUniform),
            "ref-onpolicy" => Ok(AgentKind::RefOnPolicy),
            "monolithic" => Ok(AgentKind::Monolithic),
            other => Err(ConfigError::Parse(format!("unknown agent `{other}`"))),
        }
    }
}

/// Cadences that are not part of the published configuration surface but
/// are still overridable from the config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Completed top horizons between top-policy updates.
    pub top_train_every: u64,
    /// Middle horizons between on-policy middle updates.
    pub onpolicy_train_every: u64,
    /// Window width for per-window logging.
    pub window: u64,
    /// Steps per triggered reference-agent burst.
    pub explore_duration: u64,
    /// Reward window of the value promise discrepancy.
    pub promise_k: usize,
    /// Episode length override; 0 keeps the task default.
    pub episode_len: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            top_train_every: 8,
            onpolicy_train_every: 3,
            window: 1_000,
            explore_duration: 100,
            promise_k: 10,
            episode_len: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub agent: AgentKind,
    pub seed: u64,
    pub total_steps: u64,
    pub top_horizon: u64,
    pub middle_horizon: u64,
    pub eval_interval: u64,
    pub eval_episodes: u64,
    pub reward_mod_enabled: bool,
    pub loss_mod_enabled: bool,
    pub mode_config: ModeConfig,
    /// Target switch rate (switches per step) of the reference agents.
    pub baseline_rho: f64,
    pub schedule: Schedule,
}

impl RunConfig {
    pub fn new(task: Task, agent: AgentKind) -> Self {
        RunConfig {
            task,
            agent,
            seed: 0,
            total_steps: 200_000,
            top_horizon: 50,
            middle_horizon: 10,
            eval_interval: 5_000,
            eval_episodes: 10,
            reward_mod_enabled: true,
            loss_mod_enabled: true,
            mode_config: ModeConfig::for_task(task),
            baseline_rho: 0.01,
            schedule: Schedule::default(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::new(Task::Push, AgentKind::Auto)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("alpha ordering violated: {0}")]
    AlphaOrderViolation(String),
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("value out of range: {0}")]
    RangeViolation(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Returns `cfg` unchanged when every invariant holds, otherwise the first
/// violated invariant.
pub fn validate_config(cfg: RunConfig) -> Result<RunConfig, ConfigError> {
    let mc = &cfg.mode_config;
    for (m, a) in mc.alpha.iter() {
        if !a.is_finite() {
            return Err(ConfigError::RangeViolation(format!("alpha_{m} is not finite")));
        }
    }
    if mc.alpha.random <= mc.alpha.onpolicy {
        return Err(ConfigError::AlphaOrderViolation(format!(
            "alpha_random ({}) must exceed alpha_onpolicy ({})",
            mc.alpha.random, mc.alpha.onpolicy
        )));
    }
    if mc.alpha.onpolicy < mc.alpha.exploit {
        return Err(ConfigError::AlphaOrderViolation(format!(
            "alpha_onpolicy ({}) must be at least alpha_exploit ({})",
            mc.alpha.onpolicy, mc.alpha.exploit
        )));
    }
    for (m, s) in mc.s_o_ref.iter() {
        if !(0.0..=1.0).contains(s) {
            return Err(ConfigError::RangeViolation(format!("so_ref_{m} = {s} not in [0,1]")));
        }
    }
    if !(0.0..=1.0).contains(&mc.starting_s_o_ref) {
        return Err(ConfigError::RangeViolation(format!(
            "so_ref_starting = {} not in [0,1]",
            mc.starting_s_o_ref
        )));
    }
    for (name, v) in [
        ("total_steps", cfg.total_steps),
        ("top_horizon", cfg.top_horizon),
        ("middle_horizon", cfg.middle_horizon),
        ("eval_interval", cfg.eval_interval),
        ("eval_episodes", cfg.eval_episodes),
        ("top_train_every", cfg.schedule.top_train_every),
        ("onpolicy_train_every", cfg.schedule.onpolicy_train_every),
        ("window", cfg.schedule.window),
        ("explore_duration", cfg.schedule.explore_duration),
    ] {
        if v == 0 {
            return Err(ConfigError::RangeViolation(format!("{name} must be positive")));
        }
    }
    if cfg.schedule.promise_k == 0 {
        return Err(ConfigError::RangeViolation("promise_k must be positive".into()));
    }
    if cfg.top_horizon % cfg.middle_horizon != 0 {
        return Err(ConfigError::HorizonMismatch(format!(
            "middle_horizon {} does not divide top_horizon {}",
            cfg.middle_horizon, cfg.top_horizon
        )));
    }
    if !(cfg.baseline_rho > 0.0 && cfg.baseline_rho < 1.0) {
        return Err(ConfigError::RangeViolation(format!(
            "rho = {} not in (0,1)",
            cfg.baseline_rho
        )));
    }
    Ok(cfg)
}

/// Keys written by [`to_config_text`], in order.
pub const CONFIG_KEYS: [&str; 26] = [
    "task",
    "agent",
    "seed",
    "total_steps",
    "top_horizon",
    "middle_horizon",
    "eval_interval",
    "eval_episodes",
    "reward_mod",
    "loss_mod",
    "alpha_random",
    "alpha_onpolicy",
    "alpha_exploit",
    "so_ref_random",
    "so_ref_onpolicy",
    "so_ref_exploit",
    "so_ref_starting",
    "starting_mode_steps",
    "pretrain_steps",
    "rho",
    "top_train_every",
    "onpolicy_train_every",
    "window",
    "explore_duration",
    "promise_k",
    "episode_len",
];

/// Parses `key=value` lines. Blank lines and `#` comments are skipped; a
/// repeated key keeps its last value.
pub fn parse_config_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError::Parse(format!("line {}: expected key=value", lineno + 1))
        })?;
        let k = k.trim();
        if !CONFIG_KEYS.contains(&k) {
            return Err(ConfigError::Parse(format!("line {}: unknown key `{k}`", lineno + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_val<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::Parse(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::Parse(format!("bad boolean `{v}` for `{key}`"))),
    }
}

/// Builds a config from parsed pairs. Task-dependent defaults (alpha and
/// success references) follow the `task` key; all other keys overlay them.
pub fn config_from_pairs(pairs: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    let task = match pairs.get("task") {
        Some(v) => v.parse()?,
        None => Task::Push,
    };
    let agent = match pairs.get("agent") {
        Some(v) => v.parse()?,
        None => AgentKind::Auto,
    };
    let mut cfg = RunConfig::new(task, agent);
    for (k, v) in pairs {
        let v = v.as_str();
        let mc = &mut cfg.mode_config;
        match k.as_str() {
            "task" | "agent" => {}
            "seed" => cfg.seed = parse_val(k, v)?,
            "total_steps" => cfg.total_steps = parse_val(k, v)?,
            "top_horizon" => cfg.top_horizon = parse_val(k, v)?,
            "middle_horizon" => cfg.middle_horizon = parse_val(k, v)?,
            "eval_interval" => cfg.eval_interval = parse_val(k, v)?,
            "eval_episodes" => cfg.eval_episodes = parse_val(k, v)?,
            "reward_mod" => cfg.reward_mod_enabled = parse_bool(k, v)?,
            "loss_mod" => cfg.loss_mod_enabled = parse_bool(k, v)?,
            "alpha_random" => mc.alpha.random = parse_val(k, v)?,
            "alpha_onpolicy" => mc.alpha.onpolicy = parse_val(k, v)?,
            "alpha_exploit" => mc.alpha.exploit = parse_val(k, v)?,
            "so_ref_random" => mc.s_o_ref.random = parse_val(k, v)?,
            "so_ref_onpolicy" => mc.s_o_ref.onpolicy = parse_val(k, v)?,
            "so_ref_exploit" => mc.s_o_ref.exploit = parse_val(k, v)?,
            "so_ref_starting" => mc.starting_s_o_ref = parse_val(k, v)?,
            "starting_mode_steps" => mc.starting_mode_steps = parse_val(k, v)?,
            "pretrain_steps" => mc.pretrain_steps = parse_val(k, v)?,
            "rho" => cfg.baseline_rho = parse_val(k, v)?,
            "top_train_every" => cfg.schedule.top_train_every = parse_val(k, v)?,
            "onpolicy_train_every" => cfg.schedule.onpolicy_train_every = parse_val(k, v)?,
            "window" => cfg.schedule.window = parse_val(k, v)?,
            "explore_duration" => cfg.schedule.explore_duration = parse_val(k, v)?,
            "promise_k" => cfg.schedule.promise_k = parse_val(k, v)?,
            "episode_len" => cfg.schedule.episode_len = parse_val(k, v)?,
            other => return Err(ConfigError::Parse(format!("unknown key `{other}`"))),
        }
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    config_from_pairs(&parse_config_pairs(text)?)
}

/// Serializes every key in [`CONFIG_KEYS`] order. Reals use the shortest
/// representation that parses back to the same value.
pub fn to_config_text(cfg: &RunConfig) -> String {
    let mc = &cfg.mode_config;
    let s = &cfg.schedule;
    let values: [String; 26] = [
        cfg.task.as_str().to_string(),
        cfg.agent.as_str().to_string(),
        cfg.seed.to_string(),
        cfg.total_steps.to_string(),
        cfg.top_horizon.to_string(),
        cfg.middle_horizon.to_string(),
        cfg.eval_interval.to_string(),
        cfg.eval_episodes.to_string(),
        cfg.reward_mod_enabled.to_string(),
        cfg.loss_mod_enabled.to_string(),
        mc.alpha.random.to_string(),
        mc.alpha.onpolicy.to_string(),
        mc.alpha.exploit.to_string(),
        mc.s_o_ref.random.to_string(),
        mc.s_o_ref.onpolicy.to_string(),
        mc.s_o_ref.exploit.to_string(),
        mc.starting_s_o_ref.to_string(),
        mc.starting_mode_steps.to_string(),
        mc.pretrain_steps.to_string(),
        cfg.baseline_rho.to_string(),
        s.top_train_every.to_string(),
        s.onpolicy_train_every.to_string(),
        s.window.to_string(),
        s.explore_duration.to_string(),
        s.promise_k.to_string(),
        s.episode_len.to_string(),
    ];
    let mut out = String::new();
    for (k, v) in CONFIG_KEYS.iter().zip(values.iter()) {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn push_cfg() -> RunConfig {
        RunConfig::new(Task::Push, AgentKind::Auto)
    }

    #[test]
    fn default_alpha_accepted() {
        let mut cfg = push_cfg();
        cfg.mode_config.alpha = PerMode::new(0.7, 0.4, 0.0);
        assert_eq!(validate_config(cfg.clone()), Ok(cfg));
    }

    #[test]
    fn reversed_alpha_rejected() {
        let mut cfg = push_cfg();
        cfg.mode_config.alpha = PerMode::new(0.1, 0.4, 0.0);
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::AlphaOrderViolation(_))
        ));
    }

    #[test]
    fn alpha_equality_only_at_second_comparison() {
        let mut cfg = push_cfg();
        cfg.mode_config.alpha = PerMode::new(0.7, -0.2, -0.2);
        assert!(validate_config(cfg.clone()).is_ok());
        cfg.mode_config.alpha = PerMode::new(0.4, 0.4, 0.0);
        assert!(matches!(
            validate_config(cfg.clone()),
            Err(ConfigError::AlphaOrderViolation(_))
        ));
        cfg.mode_config.alpha = PerMode::new(0.7, 0.0, 0.1);
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::AlphaOrderViolation(_))
        ));
    }

    #[test]
    fn horizon_divisibility() {
        let mut cfg = push_cfg();
        cfg.top_horizon = 50;
        cfg.middle_horizon = 10;
        assert!(validate_config(cfg.clone()).is_ok());
        cfg.middle_horizon = 7;
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::HorizonMismatch(_))
        ));
    }

    #[test]
    fn ranges_checked() {
        let mut cfg = push_cfg();
        cfg.baseline_rho = 0.0;
        assert!(matches!(validate_config(cfg), Err(ConfigError::RangeViolation(_))));
        let mut cfg = push_cfg();
        cfg.mode_config.s_o_ref.exploit = 1.1;
        assert!(matches!(validate_config(cfg), Err(ConfigError::RangeViolation(_))));
        let mut cfg = push_cfg();
        cfg.eval_interval = 0;
        assert!(matches!(validate_config(cfg), Err(ConfigError::RangeViolation(_))));
    }

    #[test]
    fn mode_text_round_trip() {
        for m in ModeId::ALL {
            assert_eq!(m.as_str().parse::<ModeId>().unwrap(), m);
            assert_eq!(ModeId::from_index(m.index()), Some(m));
        }
        assert!("explore".parse::<ModeId>().is_err());
    }

    #[test]
    fn comments_and_task_defaults() {
        let cfg = parse_config("# fall run\ntask = fall  # inline\nseed=3\n\nreward_mod=false\n")
            .unwrap();
        assert_eq!(cfg.task, Task::Fall);
        assert_eq!(cfg.seed, 3);
        assert!(!cfg.reward_mod_enabled);
        assert_eq!(cfg.mode_config.alpha, PerMode::new(0.7, -0.2, -0.2));
        assert_eq!(cfg.mode_config.s_o_ref, PerMode::new(0.9, 0.6, 0.6));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(parse_config("bogus=1"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("seed"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("seed=abc"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn stats_ratio() {
        let mut s = TopHorizonStats::default();
        for i in 0..10 {
            s.record(-1.0, i % 2 == 0);
        }
        assert_eq!(s.count_m, 10);
        assert_eq!(s.done_m, 5);
        assert!(s.done_m <= s.count_m);
        s.reset();
        assert_eq!((s.count_m, s.done_m, s.r_m), (0, 0, 0.0));
    }

    #[test]
    fn eval_report_counts() {
        let r = EvalReport::new(3, 10, 500);
        assert_eq!(r.s_e, 0.3);
        assert_eq!(r.successes(), 3);
    }
}
