//! Run logs, their on-disk layout, multi-seed suites and plot-data
//! aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::approx::NetParams;
use crate::hierarchy::{run_agent, HierarchyError, LearnerSettings};
use crate::types::{parse_config, ConfigError, EvalReport, ModeCounters, ModeId, PerMode, RunConfig};

pub const WINDOWS_HEADER: &str = "step,random_steps,onpolicy_steps,exploit_steps,reward_mean,success_rate";
pub const EVALS_HEADER: &str = "step,success_rate,episodes";
pub const OUT_ENV: &str = "NONMONO_OUT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("step grid of {0} differs from the first run")]
    GridMismatch(PathBuf),
    #[error("task of {0} differs from the first run")]
    TaskMismatch(PathBuf),
    #[error("no run directories given")]
    NoRuns,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] HierarchyError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    /// Global step at the end of the window.
    pub step: u64,
    pub counts: PerMode<u64>,
    pub reward_mean: f64,
    /// Fraction of the window's steps judged successful.
    pub success_rate: f64,
    /// Histogram entropy of each mode's recent goals; NaN when too few.
    pub entropy: PerMode<f64>,
}

/// Maximal run of consecutive post-warmup steps under one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSegment {
    pub mode: ModeId,
    pub start: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub windows: Vec<WindowRow>,
    pub evals: Vec<EvalReport>,
    pub counters: ModeCounters,
    pub config: RunConfig,
    pub mode_trace: Vec<ModeSegment>,
    /// `(step, mode, done_top)` at every closed top horizon.
    pub top_closes: Vec<(u64, ModeId, bool)>,
    /// Completed exploration burst lengths (reference agents).
    pub bursts: Vec<u64>,
    pub checkpoints: Vec<(String, NetParams)>,
}

fn bits(v: f64) -> u64 {
    v.to_bits()
}

impl RunLog {
    /// Bitwise equality of everything but the config echo and checkpoints.
    pub fn same_outcome(&self, other: &RunLog) -> bool {
        let rows_eq = self.windows.len() == other.windows.len()
            && self.windows.iter().zip(&other.windows).all(|(a, b)| {
                a.step == b.step
                    && a.counts == b.counts
                    && bits(a.reward_mean) == bits(b.reward_mean)
                    && bits(a.success_rate) == bits(b.success_rate)
                    && ModeId::ALL.iter().all(|&m| bits(a.entropy[m]) == bits(b.entropy[m]))
            });
        rows_eq
            && self.evals == other.evals
            && self.counters == other.counters
            && self.mode_trace == other.mode_trace
            && self.top_closes == other.top_closes
            && self.bursts == other.bursts
    }

    pub fn final_success(&self) -> f64 {
        self.evals.last().map_or(0.0, |e| e.s_e)
    }

    /// Lengths of exploration stretches that have Exploit on both sides.
    pub fn exploration_dwells(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut seen_exploit = false;
        let mut run = 0;
        let mut last_end = None;
        for seg in &self.mode_trace {
            let contiguous = last_end.is_none_or(|e| e == seg.start);
            if !contiguous {
                run = 0;
                seen_exploit = false;
            }
            if seg.mode == ModeId::Exploit {
                if seen_exploit && run > 0 {
                    out.push(run);
                }
                seen_exploit = true;
                run = 0;
            } else {
                run += seg.len;
            }
            last_end = Some(seg.start + seg.len);
        }
        out
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn windows_csv(log: &RunLog) -> String {
    let mut s = String::from(WINDOWS_HEADER);
    s.push('\n');
    for w in &log.windows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6}",
            w.step, w.counts.random, w.counts.onpolicy, w.counts.exploit, w.reward_mean, w.success_rate
        );
    }
    s
}

pub fn write_windows(log: &RunLog, path: &Path) -> Result<(), HarnessError> {
    write_file(path, &windows_csv(log))
}

/// Rows of a windows file as `(step, counts, reward_mean, success_rate)`.
pub type WindowRecord = (u64, PerMode<u64>, f64, f64);

pub fn read_windows(path: &Path) -> Result<Vec<WindowRecord>, HarnessError> {
    let text = read_file(path)?;
    let bad = |msg: String| HarnessError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next() != Some(WINDOWS_HEADER) {
        return Err(bad("missing header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("row {} has {} fields", i + 1, f.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
        out.push((
            int(f[0])?,
            PerMode::new(int(f[1])?, int(f[2])?, int(f[3])?),
            real(f[4])?,
            real(f[5])?,
        ));
    }
    Ok(out)
}

pub fn evals_csv(log: &RunLog) -> String {
    let mut s = String::from(EVALS_HEADER);
    s.push('\n');
    for e in &log.evals {
        let _ = writeln!(s, "{},{:.6},{}", e.step_of_eval, e.s_e, e.episodes);
    }
    s
}

pub fn read_evals(path: &Path) -> Result<Vec<(u64, f64)>, HarnessError> {
    let text = read_file(path)?;
    let bad = |msg: String| HarnessError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next() != Some(EVALS_HEADER) {
        return Err(bad("missing header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad(format!("`{line}`")));
            }
            let step = f[0].parse().map_err(|_| bad(format!("`{line}`")))?;
            let rate = f[1].parse().map_err(|_| bad(format!("`{line}`")))?;
            Ok((step, rate))
        })
        .collect()
}

fn fmt_entropy(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// Writes the full run directory: windows, evals, config echo, per-mode
/// totals, goal entropy, mode segments and checkpoints.
pub fn write_run_dir(log: &RunLog, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_windows(log, &dir.join("windows.csv"))?;
    write_file(&dir.join("evals.csv"), &evals_csv(log))?;
    write_file(&dir.join("config.echo"), &crate::types::to_config_text(&log.config))?;

    let c = &log.counters;
    let mut s = String::from("mode,total_steps,autonomous_steps,decisions\n");
    for m in ModeId::ALL {
        let _ = writeln!(s, "{m},{},{},{}", c.total_steps[m], c.autonomous_steps[m], c.decisions[m]);
    }
    write_file(&dir.join("counters.csv"), &s)?;

    let mut s = String::from("step,random,onpolicy,exploit\n");
    for w in &log.windows {
        let e = &w.entropy;
        let _ = writeln!(
            s,
            "{},{},{},{}",
            w.step,
            fmt_entropy(e.random),
            fmt_entropy(e.onpolicy),
            fmt_entropy(e.exploit)
        );
    }
    write_file(&dir.join("entropy.csv"), &s)?;

    let mut s = String::from("start,len,mode\n");
    for seg in &log.mode_trace {
        let _ = writeln!(s, "{},{},{}", seg.start, seg.len, seg.mode);
    }
    write_file(&dir.join("segments.csv"), &s)?;

    if !log.bursts.is_empty() {
        let mut s = String::from("burst_len\n");
        for b in &log.bursts {
            let _ = writeln!(s, "{b}");
        }
        write_file(&dir.join("bursts.csv"), &s)?;
    }

    let ck = dir.join("checkpoints");
    fs::create_dir_all(&ck).map_err(io_err(&ck))?;
    for (name, net) in &log.checkpoints {
        let p = ck.join(format!("{name}.net"));
        write_file(&p, &net.to_text())?;
    }
    Ok(())
}

/// Output root: `NONMONO_OUT` when set, otherwise `runs`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

pub fn run_dir_name(cfg: &RunConfig) -> String {
    format!("{}_{}_seed{}", cfg.task.as_str(), cfg.agent.as_str(), cfg.seed)
}

pub fn run_to_dir(cfg: RunConfig, settings: &LearnerSettings, dir: &Path) -> Result<RunLog, HarnessError> {
    let log = run_agent(cfg, settings)?;
    write_run_dir(&log, dir)?;
    Ok(log)
}

/// One isolated directory per seed under `root`. Runs execute on up to
/// `jobs` threads.
pub fn suite(
    base: &RunConfig,
    seeds: &[u64],
    root: &Path,
    jobs: usize,
    settings: &LearnerSettings,
) -> Result<Vec<PathBuf>, HarnessError> {
    let dirs: Vec<PathBuf> = seeds
        .iter()
        .map(|&s| {
            let mut c = base.clone();
            c.seed = s;
            root.join(run_dir_name(&c))
        })
        .collect();
    let jobs = jobs.max(1);
    let results: Vec<Result<(), HarnessError>> = std::thread::scope(|scope| {
        let mut out = Vec::new();
        for chunk in seeds.iter().zip(&dirs).collect::<Vec<_>>().chunks(jobs) {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&(&seed, dir)| {
                    let mut cfg = base.clone();
                    cfg.seed = seed;
                    scope.spawn(move || run_to_dir(cfg, settings, dir).map(|_| ()))
                })
                .collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("run thread panicked")));
        }
        out
    });
    for r in results {
        r?;
    }
    Ok(dirs)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct LoadedRun {
    agent: String,
    windows: Vec<WindowRecord>,
    evals: Vec<(u64, f64)>,
}

const STD_NOTE: &str = "# std is the population standard deviation (divide by n) across seeds";

/// Per-agent mean and std across runs for the count, reward and success
/// panels. Writes `counts.csv`, `reward.csv` and `success.csv` into `out`.
pub fn aggregate_plotdata(dirs: &[PathBuf], out: &Path) -> Result<(), HarnessError> {
    if dirs.is_empty() {
        return Err(HarnessError::NoRuns);
    }
    let mut runs = Vec::new();
    let mut task = None;
    for d in dirs {
        let cfg = parse_config(&read_file(&d.join("config.echo"))?)?;
        match task {
            None => task = Some(cfg.task),
            Some(t) if t != cfg.task => return Err(HarnessError::TaskMismatch(d.clone())),
            _ => {}
        }
        runs.push(LoadedRun {
            agent: cfg.agent.as_str().to_string(),
            windows: read_windows(&d.join("windows.csv"))?,
            evals: read_evals(&d.join("evals.csv"))?,
        });
    }
    let grid: Vec<u64> = runs[0].windows.iter().map(|w| w.0).collect();
    let egrid: Vec<u64> = runs[0].evals.iter().map(|e| e.0).collect();
    for (r, d) in runs.iter().zip(dirs) {
        let g: Vec<u64> = r.windows.iter().map(|w| w.0).collect();
        let eg: Vec<u64> = r.evals.iter().map(|e| e.0).collect();
        if g != grid || eg != egrid {
            return Err(HarnessError::GridMismatch(d.clone()));
        }
    }
    let mut by_agent: BTreeMap<&str, Vec<&LoadedRun>> = BTreeMap::new();
    for r in &runs {
        by_agent.entry(r.agent.as_str()).or_default().push(r);
    }

    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut counts = format!(
        "{STD_NOTE}\nagent,step,random_mean,random_std,onpolicy_mean,onpolicy_std,exploit_mean,exploit_std\n"
    );
    let mut reward = format!("{STD_NOTE}\nagent,step,reward_mean,reward_std,window_success_mean,window_success_std\n");
    let mut success = format!("{STD_NOTE}\nagent,step,success_mean,success_std\n");
    for (agent, rs) in &by_agent {
        for (i, step) in grid.iter().enumerate() {
            let _ = write!(counts, "{agent},{step}");
            for m in ModeId::ALL {
                let xs: Vec<f64> = rs.iter().map(|r| r.windows[i].1[m] as f64).collect();
                let (mu, sd) = mean_std(&xs);
                let _ = write!(counts, ",{mu:.6},{sd:.6}");
            }
            counts.push('\n');
            let (rm, rsd) = mean_std(&rs.iter().map(|r| r.windows[i].2).collect::<Vec<_>>());
            let (sm, ssd) = mean_std(&rs.iter().map(|r| r.windows[i].3).collect::<Vec<_>>());
            let _ = writeln!(reward, "{agent},{step},{rm:.6},{rsd:.6},{sm:.6},{ssd:.6}");
        }
        for (i, step) in egrid.iter().enumerate() {
            let (m, sd) = mean_std(&rs.iter().map(|r| r.evals[i].1).collect::<Vec<_>>());
            let _ = writeln!(success, "{agent},{step},{m:.6},{sd:.6}");
        }
    }
    write_file(&out.join("counts.csv"), &counts)?;
    write_file(&out.join("reward.csv"), &reward)?;
    write_file(&out.join("success.csv"), &success)?;
    Ok(())
}
