//! Quick invariant checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx::{Activation, NetParams, OutputActivation};
use crate::baselines::{homeostasis_step, value_promise, HomeostasisState};
use crate::harness::windows_csv;
use crate::hierarchy::{goal_transition, horizon_close, modify_loss, modify_reward, run_training};
use crate::types::{AgentKind, ModeConfig, ModeId, PerMode, RunConfig, Task, TopHorizonStats};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

pub fn equations() -> Check {
    let mut ok = close(modify_reward(-100.0, 0.7, true), -170.0)
        && close(modify_reward(-100.0, 0.0, true), -100.0)
        && close(modify_reward(-40.0, -0.2, true), -32.0)
        && close(modify_loss(2.0, 0.5, ModeId::Random, true), 3.0)
        && close(modify_loss(2.0, 0.5, ModeId::Exploit, true), 1.0)
        && ModeId::ALL.iter().all(|&m| close(modify_loss(1.5, 0.0, m, true), 1.5));
    let mut mc = ModeConfig::for_task(Task::Push);
    mc.s_o_ref = PerMode::splat(0.9);
    let mut s = TopHorizonStats {
        r_m: -60.0,
        count_m: 50,
        done_m: 45,
        ..Default::default()
    };
    match horizon_close(&mut s, &mc, ModeId::OnPolicy, false, true) {
        Ok((r, done, so)) => ok &= close(r, -84.0) && done && close(so, 0.9),
        Err(_) => ok = false,
    }
    ok &= value_promise(5.0, &[1.0, 1.0], 3.0, 1.0, 2).map_or(false, |v| close(v, 0.0));
    ok &= value_promise(5.0, &[0.0, 0.0], 0.0, 0.9, 2).map_or(false, |v| close(v, 5.0));
    let st = [1.0, 2.0];
    ok &= goal_transition(&st, &[3.0, -1.0], &st) == vec![3.0, -1.0];
    check("equations", ok, "reward, loss, horizon, promise, goal transition")
}

/// Largest relative error between analytic and central-difference
/// gradients over `nets` random networks.
pub fn gradient_check(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for i in 0..nets {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(1..5)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..7));
        }
        sizes.push(rng.random_range(1..4));
        let hidden = if i % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let output = if i % 3 == 0 {
            OutputActivation::TanhScaled(2.0)
        } else {
            OutputActivation::Linear
        };
        let net = NetParams::new(&sizes, hidden, output, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |n: &NetParams| -> f64 {
            n.forward(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let analytic = net.backward(&x, &up).unwrap().to_flat();
        let flat = net.to_flat();
        let mut probe = net.clone();
        for (j, &g) in analytic.iter().enumerate() {
            let mut v = flat.clone();
            v[j] += h;
            probe.set_flat(&v).unwrap();
            let lp = loss(&probe);
            v[j] -= 2.0 * h;
            probe.set_flat(&v).unwrap();
            let lm = loss(&probe);
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Switch rate of the adaptive threshold on a constant signal.
pub fn homeostasis_rate(rho: f64, steps: u64, seed: u64) -> f64 {
    let mut h = HomeostasisState::new(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0u64;
    for _ in 0..steps {
        let (s, next) = homeostasis_step(h, 1.0, &mut rng);
        h = next;
        n += s as u64;
    }
    n as f64 / steps as f64
}

pub fn determinism() -> Check {
    let mut cfg = RunConfig::new(Task::Push, AgentKind::Auto);
    cfg.seed = 11;
    cfg.total_steps = 2_000;
    cfg.mode_config.pretrain_steps = 500;
    cfg.mode_config.starting_mode_steps = 500;
    cfg.eval_interval = 1_000;
    cfg.eval_episodes = 1;
    cfg.schedule.window = 500;
    match (run_training(cfg.clone()), run_training(cfg)) {
        (Ok(a), Ok(b)) => check("determinism", windows_csv(&a) == windows_csv(&b), "two replays of a short run"),
        _ => check("determinism", false, "run failed"),
    }
}

pub fn run_all() -> Vec<Check> {
    let g = gradient_check(20, 0);
    let rates: Vec<f64> = (0..3).map(|s| homeostasis_rate(0.01, 100_000, s)).collect();
    vec![
        equations(),
        check("gradients", g < 1e-4, format!("max relative error {g:.2e}")),
        check(
            "homeostasis",
            rates.iter().all(|r| (0.005..=0.02).contains(r)),
            format!("rates {rates:?}"),
        ),
        determinism(),
    ]
}
