//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonmono::approx::{Activation, NetParams, OutputActivation};
use nonmono::baselines::{
    homeostasis_step, monolithic_run, reference_run, value_promise, HomeostasisState, RefConfig,
};
use nonmono::harness::{windows_csv, RunLog};
use nonmono::hierarchy::{goal_transition, horizon_close, modify_loss, modify_reward, run_training};
use nonmono::types::{AgentKind, ModeConfig, ModeId, PerMode, RunConfig, Task, TopHorizonStats};

const EXACT: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-4;
const GRAD_NETS: usize = 50;
const ORACLE_CASES: usize = 10_000;
const RATE_BAND: (f64, f64) = (0.005, 0.02);
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LEARN_STEPS: u64 = 200_000;
const EXPLOIT_SHARE: f64 = 0.6;
const SUCCESS_BAR: f64 = 0.8;
const SUCCESS_SEEDS: usize = 3;
const REF_STEPS: u64 = 60_000;
const DETERMINISM_STEPS: u64 = 30_000;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(id: u32, name: &'static str, passed: bool, detail: String) -> Outcome {
    println!("{} criterion {id} ({name}): {detail}", if passed { "PASS" } else { "FAIL" });
    Outcome {
        id,
        name,
        passed,
        detail,
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXACT
}

fn criterion_equations() -> Outcome {
    let t0 = Instant::now();
    let mut fails = Vec::new();
    let mut expect = |label: &str, ok: bool| {
        if !ok {
            fails.push(label.to_string());
        }
    };
    expect("reward -100,0.7", near(modify_reward(-100.0, 0.7, true), -170.0));
    expect("reward -100,0", near(modify_reward(-100.0, 0.0, true), -100.0));
    expect("reward -40,-0.2", near(modify_reward(-40.0, -0.2, true), -32.0));
    expect("reward disabled", near(modify_reward(-100.0, 0.7, false), -100.0));
    expect("loss random", near(modify_loss(2.0, 0.5, ModeId::Random, true), 3.0));
    expect("loss onpolicy", near(modify_loss(2.0, 0.5, ModeId::OnPolicy, true), 3.0));
    expect("loss exploit", near(modify_loss(2.0, 0.5, ModeId::Exploit, true), 1.0));
    for m in ModeId::ALL {
        expect("loss s_e=0", near(modify_loss(1.5, 0.0, m, true), 1.5));
        expect("loss disabled", near(modify_loss(2.0, 0.5, m, false), 2.0));
    }

    let mut mc = ModeConfig::for_task(Task::Push);
    mc.s_o_ref = PerMode::splat(0.9);
    let mut s = TopHorizonStats {
        r_m: -1.0,
        count_m: 50,
        done_m: 45,
        ..Default::default()
    };
    let r = horizon_close(&mut s, &mc, ModeId::Random, false, true).unwrap();
    expect("close 45/50", near(r.2, 0.9) && r.1);
    expect("close reset", s.count_m == 0 && s.done_m == 0 && s.r_m == 0.0);
    let mut s = TopHorizonStats {
        r_m: -1.0,
        count_m: 50,
        done_m: 0,
        ..Default::default()
    };
    let r = horizon_close(&mut s, &mc, ModeId::Random, false, true).unwrap();
    expect("close 0/50", near(r.2, 0.0) && !r.1);
    let mut s = TopHorizonStats {
        r_m: -60.0,
        count_m: 50,
        done_m: 0,
        ..Default::default()
    };
    let r = horizon_close(&mut s, &mc, ModeId::OnPolicy, false, true).unwrap();
    expect("close r_final", near(r.0, -84.0));
    let mut empty = TopHorizonStats::default();
    expect("close zero count", horizon_close(&mut empty, &mc, ModeId::Exploit, false, true).is_err());

    expect("promise telescoping", value_promise(5.0, &[1.0, 1.0], 3.0, 1.0, 2).is_ok_and(|v| near(v, 0.0)));
    expect("promise zero rewards", value_promise(5.0, &[0.0, 0.0], 0.0, 0.9, 2).is_ok_and(|v| near(v, 5.0)));
    expect("promise length", value_promise(5.0, &[0.0], 0.0, 0.9, 2).is_err());

    let st = [1.0, 2.0, 0.0, 0.0, 5.0, 5.0];
    let g = goal_transition(&st, &[3.0, -1.0], &st);
    expect("goal still", near(g[0], 3.0) && near(g[1], -1.0));
    let nx = [2.5, 1.0, 0.0, 0.0, 5.0, 5.0];
    let g = goal_transition(&st, &[1.5, -1.0], &nx);
    expect("goal reached", near(g[0], 0.0) && near(g[1], 0.0));

    let el = t0.elapsed();
    let passed = fails.is_empty() && el < Duration::from_secs(1);
    report(1, "equation unit suite", passed, format!("{} failures {:?}, {:.3}s < 1s", fails.len(), fails, el.as_secs_f64()))
}

/// Central-difference gradient of `sum_k up_k * f(x)_k` by perturbing one
/// flat parameter at a time.
fn numeric_gradient(net: &NetParams, x: &[f64], up: &[f64], h: f64) -> Vec<f64> {
    let flat = net.to_flat();
    let mut probe = net.clone();
    let mut eval = |v: &[f64]| -> f64 {
        probe.set_flat(v).unwrap();
        probe.forward(x).unwrap().iter().zip(up).map(|(a, b)| a * b).sum()
    };
    (0..flat.len())
        .map(|j| {
            let mut v = flat.clone();
            v[j] += h;
            let fp = eval(&v);
            v[j] -= 2.0 * h;
            let fm = eval(&v);
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn criterion_gradients() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..GRAD_NETS {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..9));
        }
        sizes.push(rng.random_range(1..4));
        let hidden = [Activation::Tanh, Activation::Relu][i % 2];
        let output = if i % 3 == 0 {
            OutputActivation::TanhScaled(1.5)
        } else {
            OutputActivation::Linear
        };
        let net = NetParams::new(&sizes, hidden, output, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
        let up: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic = net.backward(&x, &up).unwrap().to_flat();
        let numeric = numeric_gradient(&net, &x, &up, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    let el = t0.elapsed();
    report(
        2,
        "gradient suite",
        worst < GRAD_TOL && el < Duration::from_secs(10),
        format!("max relative error {worst:.2e} < {GRAD_TOL:.0e} over {GRAD_NETS} nets, {:.2}s < 10s", el.as_secs_f64()),
    )
}

fn brute_promise(v_then: f64, rewards: &[f64], v_now: f64, gamma: f64) -> f64 {
    let mut total = v_then;
    for (i, r) in rewards.iter().enumerate() {
        let mut w = 1.0;
        for _ in 0..i {
            w *= gamma;
        }
        total -= w * r;
    }
    let mut wk = 1.0;
    for _ in 0..rewards.len() {
        wk *= gamma;
    }
    (total - wk * v_now).abs()
}

fn criterion_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_CASES {
        let k = rng.random_range(1..16);
        let rewards: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v_then = rng.random_range(-50.0..50.0);
        let v_now = rng.random_range(-50.0..50.0);
        let gamma = rng.random_range(0.0..=1.0);
        let got = value_promise(v_then, &rewards, v_now, gamma, k).unwrap();
        worst = worst.max((got - brute_promise(v_then, &rewards, v_now, gamma)).abs());

        let s: Vec<f64> = (0..6).map(|_| rng.random_range(-20.0..20.0)).collect();
        let n: Vec<f64> = (0..6).map(|_| rng.random_range(-20.0..20.0)).collect();
        let g: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
        let out = goal_transition(&s, &g, &n);
        for d in 0..2 {
            let want = (s[d] - n[d]) + g[d];
            worst = worst.max((out[d] - want).abs());
        }
    }
    let el = t0.elapsed();
    report(
        3,
        "oracle suite",
        worst <= EXACT && el < Duration::from_secs(5),
        format!("max deviation {worst:.1e} over {ORACLE_CASES} cases, {:.2}s < 5s", el.as_secs_f64()),
    )
}

fn criterion_homeostasis() -> Outcome {
    let t0 = Instant::now();
    let mut rates = Vec::new();
    for seed in SEEDS {
        let mut h = HomeostasisState::new(0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut switches = 0u64;
        for _ in 0..100_000 {
            let (s, next) = homeostasis_step(h, 3.0, &mut rng);
            h = next;
            switches += s as u64;
        }
        rates.push(switches as f64 / 1e5);
    }
    let el = t0.elapsed();
    let ok = rates.iter().all(|r| (RATE_BAND.0..=RATE_BAND.1).contains(r));
    report(
        4,
        "homeostasis rate tracking",
        ok && el < Duration::from_secs(30),
        format!("rates {rates:?} in [{}, {}], {:.2}s < 30s", RATE_BAND.0, RATE_BAND.1, el.as_secs_f64()),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Batch {
    logs: Vec<RunLog>,
    seconds: Vec<f64>,
}

fn push_cfg(agent: AgentKind, seed: u64, reward_mod: bool, loss_mod: bool) -> RunConfig {
    let mut cfg = RunConfig::new(Task::Push, agent);
    cfg.seed = seed;
    cfg.total_steps = LEARN_STEPS;
    cfg.reward_mod_enabled = reward_mod;
    cfg.loss_mod_enabled = loss_mod;
    cfg
}

fn batch(label: &str, make: impl Fn(u64) -> RunConfig, run: impl Fn(RunConfig) -> RunLog) -> Batch {
    let mut logs = Vec::new();
    let mut seconds = Vec::new();
    for seed in SEEDS {
        let t0 = Instant::now();
        let log = run(make(seed));
        let s = t0.elapsed().as_secs_f64();
        let c = &log.counters.total_steps;
        eprintln!(
            "  {label} seed {seed}: {s:.0}s random={} onpolicy={} exploit={} final S_E={:.2}",
            c.random,
            c.onpolicy,
            c.exploit,
            log.final_success()
        );
        logs.push(log);
        seconds.push(s);
    }
    Batch { logs, seconds }
}

fn auto_run(cfg: RunConfig) -> RunLog {
    run_training(cfg).expect("auto run")
}

fn criterion_mode_counts(normal: &Batch) -> Outcome {
    let med = |m: ModeId| median(normal.logs.iter().map(|l| l.counters.total_steps[m] as f64).collect());
    let (r, o, e) = (med(ModeId::Random), med(ModeId::OnPolicy), med(ModeId::Exploit));
    let share = median(
        normal
            .logs
            .iter()
            .map(|l| l.counters.total_steps.exploit as f64 / l.counters.total_steps.sum() as f64)
            .collect(),
    );
    let slowest = normal.seconds.iter().cloned().fold(0.0, f64::max);
    report(
        5,
        "mode-count ordering",
        e > o && o > r && share > EXPLOIT_SHARE && slowest <= 600.0,
        format!(
            "median exploit={e} onpolicy={o} random={r}, exploit share {share:.3} > {EXPLOIT_SHARE}, slowest seed {slowest:.0}s <= 600s"
        ),
    )
}

fn criterion_learning(normal: &Batch, mono: &Batch) -> Outcome {
    let auto_s: Vec<f64> = normal.logs.iter().map(RunLog::final_success).collect();
    let mono_s: Vec<f64> = mono.logs.iter().map(RunLog::final_success).collect();
    let hits = auto_s.iter().filter(|&&s| s >= SUCCESS_BAR).count();
    report(
        6,
        "learning at desk scale",
        hits >= SUCCESS_SEEDS && mean(&mono_s) < mean(&auto_s),
        format!(
            "auto final S_E {auto_s:?} ({hits}/5 >= {SUCCESS_BAR}), monolithic mean {:.3} < auto mean {:.3}",
            mean(&mono_s),
            mean(&auto_s)
        ),
    )
}

fn criterion_ablation(normal: &Batch, no_reward: &Batch, no_loss: &Batch, no_both: &Batch) -> Outcome {
    let explore = |b: &Batch| {
        median(
            b.logs
                .iter()
                .map(|l| (l.counters.total_steps.random + l.counters.total_steps.onpolicy) as f64)
                .collect(),
        )
    };
    let fin = |b: &Batch| mean(&b.logs.iter().map(RunLog::final_success).collect::<Vec<_>>());
    let (en, er) = (explore(normal), explore(no_reward));
    let (sn, sr, sl, sb) = (fin(normal), fin(no_reward), fin(no_loss), fin(no_both));
    let secs: f64 = [normal, no_reward, no_loss, no_both]
        .iter()
        .map(|b| b.seconds.iter().sum::<f64>())
        .sum();
    let lowest = sb < sn && sb < sr && sb < sl;
    report(
        7,
        "ablation direction",
        er > en && lowest && secs <= 3600.0,
        format!(
            "median explore steps no-reward-mod {er} > normal {en}; mean final S_E normal {sn:.3} no-reward {sr:.3} no-loss {sl:.3} no-both {sb:.3}; grid {secs:.0}s <= 3600s"
        ),
    )
}

fn criterion_rigidity(normal: &Batch) -> Outcome {
    let mut burst_ok = true;
    let mut burst_info = Vec::new();
    for agent in [AgentKind::RefUniform, AgentKind::RefOnPolicy] {
        let mut cfg = RunConfig::new(Task::Push, agent);
        cfg.seed = 0;
        cfg.total_steps = REF_STEPS;
        let rc = RefConfig::for_run(&cfg);
        let log = reference_run(cfg.clone(), rc).expect("reference run");
        let all = log.bursts.iter().all(|&b| b == cfg.schedule.explore_duration);
        burst_ok &= all && !log.bursts.is_empty();
        burst_info.push(format!("{}: {} bursts all {}", agent.as_str(), log.bursts.len(), cfg.schedule.explore_duration));
    }
    let distinct: Vec<usize> = normal
        .logs
        .iter()
        .map(|l| {
            let mut d = l.exploration_dwells();
            d.sort_unstable();
            d.dedup();
            d.len()
        })
        .collect();
    report(
        8,
        "structural rigidity contrast",
        burst_ok && distinct.iter().all(|&d| d >= 2),
        format!("{}; auto distinct dwell lengths per seed {distinct:?} (>= 2)", burst_info.join(", ")),
    )
}

fn criterion_determinism() -> Outcome {
    let mut cfg = RunConfig::new(Task::Push, AgentKind::Auto);
    cfg.seed = 5;
    cfg.total_steps = DETERMINISM_STEPS;
    let a = windows_csv(&run_training(cfg.clone()).expect("run"));
    let b = windows_csv(&run_training(cfg).expect("run"));
    let mut m = RunConfig::new(Task::Fall, AgentKind::Monolithic);
    m.seed = 6;
    m.total_steps = DETERMINISM_STEPS / 3;
    let c = windows_csv(&monolithic_run(m.clone()).expect("run"));
    let d = windows_csv(&monolithic_run(m).expect("run"));
    report(
        9,
        "determinism",
        a == b && c == d,
        format!("auto replay identical: {}, monolithic replay identical: {}", a == b, c == d),
    )
}

fn main() {
    let mut results = vec![
        criterion_equations(),
        criterion_gradients(),
        criterion_oracles(),
        criterion_homeostasis(),
    ];

    eprintln!("running learning grid ({} seeds x 5 variants, {LEARN_STEPS} steps)", SEEDS.len());
    let normal = batch("auto", |s| push_cfg(AgentKind::Auto, s, true, true), auto_run);
    let mono = batch(
        "monolithic",
        |s| push_cfg(AgentKind::Monolithic, s, true, true),
        |c| monolithic_run(c).expect("monolithic run"),
    );
    let no_reward = batch("auto no-reward-mod", |s| push_cfg(AgentKind::Auto, s, false, true), auto_run);
    let no_loss = batch("auto no-loss-mod", |s| push_cfg(AgentKind::Auto, s, true, false), auto_run);
    let no_both = batch("auto no-both", |s| push_cfg(AgentKind::Auto, s, false, false), auto_run);

    results.push(criterion_mode_counts(&normal));
    results.push(criterion_learning(&normal, &mono));
    results.push(criterion_ablation(&normal, &no_reward, &no_loss, &no_both));
    results.push(criterion_rigidity(&normal));
    results.push(criterion_determinism());

    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.passed).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    for o in &failed {
        println!("  failed {} ({}): {}", o.id, o.name, o.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
