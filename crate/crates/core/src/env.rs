//! Desk-scale point-mass analogues of the Push and Fall navigation tasks.
//!
//! The arena is a grid of square cells. The agent is a small square that
//! moves kinematically (`pos += clipped velocity`), one axis at a time, and
//! shoves a cell-sized block when it runs into it. In Push the block sits in
//! the corridor between start and target and jams against the narrow mouth
//! of the target cell when driven straight at it. In Fall the
//! target is across a gap that the agent cannot enter until the block has
//! been pushed into it.

use rand::Rng;
use thiserror::Error;

use crate::types::Task;

pub const CELL: f64 = 4.0;
pub const AGENT_HALF: f64 = 0.25;
pub const BLOCK_HALF: f64 = CELL / 2.0;
const EPS: f64 = 1e-9;
const START_JITTER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Open,
    Wall,
    /// Impassable for the agent until filled by the block.
    Gap,
    /// Open to the agent, too narrow for the block.
    Narrow,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("action component {0} is not finite")]
    NonFiniteAction(usize),
    #[error("action has {got} components, expected {expected}")]
    ActionDim { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: Task,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Middle-level (relative) goal space per dimension.
    pub goal_bounds: Vec<(f64, f64)>,
    pub action_bound: f64,
    pub target_pos: Vec<f64>,
    pub success_radius: f64,
    pub episode_len: u64,
    /// Row-major from the bottom row up; `grid[row][col]`.
    pub grid: Vec<Vec<Cell>>,
    pub start_pos: [f64; 2],
    pub block_start: [f64; 2],
}

fn cell_center(col: usize, row: usize) -> [f64; 2] {
    [(col as f64 + 0.5) * CELL, (row as f64 + 0.5) * CELL]
}

fn parse_grid(rows_top_down: &[&str]) -> Vec<Vec<Cell>> {
    rows_top_down
        .iter()
        .rev()
        .map(|r| {
            r.chars()
                .map(|c| match c {
                    '#' => Cell::Wall,
                    'G' => Cell::Gap,
                    'n' => Cell::Narrow,
                    _ => Cell::Open,
                })
                .collect()
        })
        .collect()
}

impl TaskSpec {
    pub fn new(task: Task) -> Self {
        match task {
            // . open, # wall, n narrow; start above the block, target below it.
            Task::Push => TaskSpec {
                name: task,
                state_dim: 6,
                action_dim: 2,
                goal_bounds: vec![(-10.0, 10.0); 2],
                action_bound: 1.0,
                target_pos: cell_center(3, 1).to_vec(),
                success_radius: 0.5,
                episode_len: 500,
                grid: parse_grid(&["######", "#...##", "#.#.##", "#....#", "###n##", "######"]),
                start_pos: cell_center(3, 3),
                block_start: cell_center(3, 2),
            },
            Task::Fall => TaskSpec {
                name: task,
                state_dim: 6,
                action_dim: 2,
                goal_bounds: vec![(-10.0, 10.0); 2],
                action_bound: 1.0,
                target_pos: cell_center(2, 4).to_vec(),
                success_radius: 0.5,
                episode_len: 500,
                grid: parse_grid(&["####", "#..#", "#GG#", "#..#", "#..#", "####"]),
                start_pos: cell_center(1, 1),
                block_start: cell_center(1, 2),
            },
        }
    }

    pub fn with_episode_len(mut self, len: u64) -> Self {
        if len > 0 {
            self.episode_len = len;
        }
        self
    }

    pub fn goal_dim(&self) -> usize {
        self.goal_bounds.len()
    }

    pub fn arena(&self) -> ([f64; 2], [f64; 2]) {
        let rows = self.grid.len();
        let cols = self.grid.first().map_or(0, |r| r.len());
        ([0.0, 0.0], [cols as f64 * CELL, rows as f64 * CELL])
    }

    fn cell_at(&self, col: i64, row: i64) -> Cell {
        if col < 0 || row < 0 {
            return Cell::Wall;
        }
        self.grid
            .get(row as usize)
            .and_then(|r| r.get(col as usize))
            .copied()
            .unwrap_or(Cell::Wall)
    }

    fn cells(&self) -> impl Iterator<Item = (i64, i64, Cell)> + '_ {
        let rows = self.grid.len() as i64;
        let cols = self.grid.first().map_or(0, |r| r.len()) as i64;
        // One ring of virtual walls around the grid.
        (-1..=rows).flat_map(move |r| (-1..=cols).map(move |c| (c, r, self.cell_at(c, r))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub agent_pos: [f64; 2],
    pub agent_vel: [f64; 2],
    pub block_pos: [f64; 2],
    /// Fall: the block has dropped into the gap and now bridges it.
    pub block_settled: bool,
    pub t_ep: u64,
}

impl EnvState {
    /// Flat observation `[agent_x, agent_y, vel_x, vel_y, block_x, block_y]`.
    pub fn observe(&self) -> Vec<f64> {
        vec![
            self.agent_pos[0],
            self.agent_pos[1],
            self.agent_vel[0],
            self.agent_vel[1],
            self.block_pos[0],
            self.block_pos[1],
        ]
    }
}

pub fn reset<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> EnvState {
    let jx = rng.random_range(-START_JITTER..=START_JITTER);
    let jy = rng.random_range(-START_JITTER..=START_JITTER);
    EnvState {
        agent_pos: [spec.start_pos[0] + jx, spec.start_pos[1] + jy],
        agent_vel: [0.0, 0.0],
        block_pos: spec.block_start,
        block_settled: false,
        t_ep: 0,
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn judge_success(state: &EnvState, target_pos: &[f64], spec: &TaskSpec) -> bool {
    distance(&state.agent_pos, target_pos) <= spec.success_radius
}

/// Largest displacement in `[0, d]` (or `[d, 0]`) along `axis` that keeps an
/// axis-aligned box centred at `c` with half-size `half` out of every cell
/// for which `solid` holds.
fn sweep(
    spec: &TaskSpec,
    c: [f64; 2],
    half: f64,
    axis: usize,
    d: f64,
    solid: impl Fn(i64, i64, Cell) -> bool,
) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let other = 1 - axis;
    let (lo, hi) = (c[other] - half, c[other] + half);
    let mut allowed = d;
    for (col, row, cell) in spec.cells() {
        if !solid(col, row, cell) {
            continue;
        }
        let idx = [col, row];
        let cmin = [idx[0] as f64 * CELL, idx[1] as f64 * CELL];
        let (olo, ohi) = (cmin[other], cmin[other] + CELL);
        if !(olo < hi - EPS && ohi > lo + EPS) {
            continue;
        }
        let (clo, chi) = (cmin[axis], cmin[axis] + CELL);
        if d > 0.0 {
            let edge = c[axis] + half;
            if clo >= edge - EPS {
                allowed = allowed.min((clo - edge).max(0.0));
            }
        } else {
            let edge = c[axis] - half;
            if chi <= edge + EPS {
                allowed = allowed.max((chi - edge).min(0.0));
            }
        }
    }
    allowed
}

fn settled_cell(state: &EnvState) -> Option<(i64, i64)> {
    state.block_settled.then(|| {
        (
            (state.block_pos[0] / CELL).floor() as i64,
            (state.block_pos[1] / CELL).floor() as i64,
        )
    })
}

fn move_axis(spec: &TaskSpec, s: &mut EnvState, axis: usize, d: f64) {
    if d == 0.0 {
        return;
    }
    let filled = settled_cell(s);
    let agent_solid = |c: i64, r: i64, cell: Cell| match cell {
        Cell::Wall => true,
        Cell::Gap => filled != Some((c, r)),
        Cell::Open | Cell::Narrow => false,
    };
    let mut step = sweep(spec, s.agent_pos, AGENT_HALF, axis, d, agent_solid);

    if !s.block_settled {
        let other = 1 - axis;
        let overlap = (s.agent_pos[other] - s.block_pos[other]).abs() < AGENT_HALF + BLOCK_HALF - EPS;
        if overlap {
            let gap = if d > 0.0 {
                (s.block_pos[axis] - BLOCK_HALF) - (s.agent_pos[axis] + AGENT_HALF)
            } else {
                (s.block_pos[axis] + BLOCK_HALF) - (s.agent_pos[axis] - AGENT_HALF)
            };
            let ahead = if d > 0.0 { gap >= -EPS } else { gap <= EPS };
            if ahead && step.abs() > gap.abs() {
                let gap = if gap.abs() < EPS { 0.0 } else { gap };
                let want = step - gap;
                let block_solid = |_: i64, _: i64, cell: Cell| matches!(cell, Cell::Wall | Cell::Narrow);
                let push = sweep(spec, s.block_pos, BLOCK_HALF, axis, want, block_solid);
                s.block_pos[axis] += push;
                step = gap + push;
                settle_block(spec, s);
            }
        }
    }
    s.agent_pos[axis] += step;
}

fn settle_block(spec: &TaskSpec, s: &mut EnvState) {
    let col = (s.block_pos[0] / CELL).floor() as i64;
    let row = (s.block_pos[1] / CELL).floor() as i64;
    if spec.cell_at(col, row) == Cell::Gap {
        let c = cell_center(col as usize, row as usize);
        s.block_pos = c;
        s.block_settled = true;
    }
}

/// Advances one step. Returns `(next_state, reward, done_env)`; the reward is
/// the negative Euclidean distance from the agent to the target.
pub fn step(
    state: &EnvState,
    action: &[f64],
    spec: &TaskSpec,
) -> Result<(EnvState, f64, bool), EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim {
            got: action.len(),
            expected: spec.action_dim,
        });
    }
    if let Some(i) = action.iter().position(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction(i));
    }
    let b = spec.action_bound;
    let vel = [action[0].clamp(-b, b), action[1].clamp(-b, b)];
    let mut s = state.clone();
    s.agent_vel = vel;
    move_axis(spec, &mut s, 0, vel[0]);
    move_axis(spec, &mut s, 1, vel[1]);
    s.t_ep += 1;
    let reward = -distance(&s.agent_pos, &spec.target_pos);
    let done = s.t_ep >= spec.episode_len;
    Ok((s, reward, done))
}
