//! Gridworld builders: a multi-room navigation task and a box-pushing task,
//! each in a small source layout and a larger target layout.
//!
//! Layouts are plain text (`#` wall, `.` open, `D` doorway, `G` goal) shipped
//! as fixture files so they stay inspectable and swappable. Both tasks pay a
//! single +1 on reaching the goal condition and 0 elsewhere.
//!
//! Actions are shared across every layout: 0 = up, 1 = down, 2 = left,
//! 3 = right. Moves into walls are no-ops. In the box task the agent pushes
//! the box by stepping into it; a push whose destination is a wall is a no-op
//! for both agent and box.

use crate::mdp::{Outcome, TabularMdp};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const LAYOUT_MULTIROOM_SOURCE: &str =
    include_str!("../fixtures/layouts/multiroom_source.txt");
pub const LAYOUT_MULTIROOM_TARGET: &str =
    include_str!("../fixtures/layouts/multiroom_target.txt");
pub const LAYOUT_BOXWORLD_SOURCE: &str =
    include_str!("../fixtures/layouts/boxworld_source.txt");
pub const LAYOUT_BOXWORLD_TARGET: &str =
    include_str!("../fixtures/layouts/boxworld_target.txt");

pub const NUM_ACTIONS: usize = 4;
/// Row-major displacement per action id: up, down, left, right.
pub const ACTION_DELTAS: [(i64, i64); NUM_ACTIONS] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Env {
    Multiroom,
    Boxworld,
}

impl std::fmt::Display for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Env::Multiroom => write!(f, "multiroom"),
            Env::Boxworld => write!(f, "boxworld"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Source,
    Target,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Source => write!(f, "source"),
            Variant::Target => write!(f, "target"),
        }
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("layout parse error: {0}")]
    Parse(String),
    #[error("state mapping error: {0}")]
    Mapping(String),
}

/// Parsed layout. Cells are indexed row-major: `cell = y * width + x`.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub open: Vec<bool>,
    pub goal: usize,
    pub doorways: Vec<usize>,
    pub text: String,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<GridSpec, GridError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(GridError::Parse("empty layout".to_string()));
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut open = vec![false; width * height];
        let mut goal = None;
        let mut doorways = Vec::new();
        for (y, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(GridError::Parse(format!(
                    "row {y} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for (x, ch) in line.chars().enumerate() {
                let cell = y * width + x;
                match ch {
                    '#' => {}
                    '.' => open[cell] = true,
                    'D' => {
                        open[cell] = true;
                        doorways.push(cell);
                    }
                    'G' => {
                        open[cell] = true;
                        if goal.replace(cell).is_some() {
                            return Err(GridError::Parse("more than one goal".to_string()));
                        }
                    }
                    other => {
                        return Err(GridError::Parse(format!(
                            "unknown cell '{other}' at ({x}, {y})"
                        )))
                    }
                }
            }
        }
        let goal = goal.ok_or_else(|| GridError::Parse("no goal cell".to_string()))?;
        Ok(GridSpec {
            width,
            height,
            open,
            goal,
            doorways,
            text: text.to_string(),
        })
    }

    pub fn xy(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn is_open(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.open[y as usize * self.width + x as usize]
    }

    /// Hex SHA-256 of the layout text; recorded in run metadata so results
    /// are tied to the exact layout bytes.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Open cell nearest in Manhattan distance to `(x, y)`, excluding
    /// `exclude` if given. Ties break in row-major order.
    pub fn nearest_open(&self, x: i64, y: i64, exclude: Option<usize>) -> Option<usize> {
        let mut best: Option<(i64, usize)> = None;
        for cell in 0..self.open.len() {
            if !self.open[cell] || Some(cell) == exclude {
                continue;
            }
            let (cx, cy) = self.xy(cell);
            let d = (cx as i64 - x).abs() + (cy as i64 - y).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, cell));
            }
        }
        best.map(|(_, cell)| cell)
    }
}

/// Reduction across box positions when rendering a box-task table on the
/// agent grid.
#[derive(Clone, Copy, Debug)]
pub enum Reduce {
    Max,
    /// Slice at a fixed box cell id.
    FixedBox(usize),
}

/// State indexing for a built gridworld.
///
/// Navigation task: state id = index of the agent's cell in `open_cells`.
/// Box task: state id packs (agent, box) over open cells with agent != box,
/// giving exactly `n_open * (n_open - 1)` states.
#[derive(Clone, Debug)]
pub struct GridMeta {
    pub env: Env,
    pub variant: Variant,
    pub spec: GridSpec,
    /// Open cell ids in row-major order.
    pub open_cells: Vec<usize>,
    /// cell id -> index into `open_cells`.
    pub open_index: Vec<Option<usize>>,
    pub num_states: usize,
}

impl GridMeta {
    fn new(env: Env, variant: Variant, spec: GridSpec) -> GridMeta {
        let open_cells: Vec<usize> =
            (0..spec.open.len()).filter(|&c| spec.open[c]).collect();
        let mut open_index = vec![None; spec.open.len()];
        for (i, &c) in open_cells.iter().enumerate() {
            open_index[c] = Some(i);
        }
        let n = open_cells.len();
        let num_states = match env {
            Env::Multiroom => n,
            Env::Boxworld => n * (n - 1),
        };
        GridMeta {
            env,
            variant,
            spec,
            open_cells,
            open_index,
            num_states,
        }
    }

    pub fn n_open(&self) -> usize {
        self.open_cells.len()
    }

    /// Navigation state for an agent cell.
    pub fn nav_state(&self, cell: usize) -> usize {
        self.open_index[cell].expect("cell is a wall")
    }

    /// Box-task state for (agent cell, box cell), agent != box.
    pub fn box_state(&self, agent_cell: usize, box_cell: usize) -> usize {
        let n = self.n_open();
        let a = self.open_index[agent_cell].expect("agent cell is a wall");
        let b = self.open_index[box_cell].expect("box cell is a wall");
        debug_assert_ne!(a, b, "agent and box share a cell");
        a * (n - 1) + if b < a { b } else { b - 1 }
    }

    /// Inverse of `box_state`: (agent cell, box cell).
    pub fn box_cells(&self, state: usize) -> (usize, usize) {
        let n = self.n_open();
        let a = state / (n - 1);
        let r = state % (n - 1);
        let b = if r < a { r } else { r + 1 };
        (self.open_cells[a], self.open_cells[b])
    }

    /// Renders a per-state table onto the layout grid. Walls (and, for a
    /// fixed-box slice, the box's own cell) are NaN.
    pub fn render_values(&self, values: &[f64], reduce: Reduce) -> Vec<Vec<f64>> {
        assert_eq!(values.len(), self.num_states, "table size mismatch");
        let mut grid = vec![vec![f64::NAN; self.spec.width]; self.spec.height];
        for &cell in &self.open_cells {
            let (x, y) = self.spec.xy(cell);
            grid[y][x] = match self.env {
                Env::Multiroom => values[self.nav_state(cell)],
                Env::Boxworld => match reduce {
                    Reduce::Max => {
                        let mut best = f64::NEG_INFINITY;
                        for &box_cell in &self.open_cells {
                            if box_cell != cell {
                                best = best.max(values[self.box_state(cell, box_cell)]);
                            }
                        }
                        best
                    }
                    Reduce::FixedBox(box_cell) => {
                        if box_cell == cell {
                            f64::NAN
                        } else {
                            values[self.box_state(cell, box_cell)]
                        }
                    }
                },
            };
        }
        grid
    }
}

fn layout_for(env: Env, variant: Variant) -> &'static str {
    match (env, variant) {
        (Env::Multiroom, Variant::Source) => LAYOUT_MULTIROOM_SOURCE,
        (Env::Multiroom, Variant::Target) => LAYOUT_MULTIROOM_TARGET,
        (Env::Boxworld, Variant::Source) => LAYOUT_BOXWORLD_SOURCE,
        (Env::Boxworld, Variant::Target) => LAYOUT_BOXWORLD_TARGET,
    }
}

/// Builds the navigation task: the agent walks open cells, reaching the goal
/// pays +1 and terminates. Starts are uniform over open non-goal cells.
pub fn build_multiroom(variant: Variant, gamma: f64) -> (TabularMdp, GridMeta) {
    let spec = GridSpec::parse(layout_for(Env::Multiroom, variant)).expect("bundled layout");
    let meta = GridMeta::new(Env::Multiroom, variant, spec);
    let n = meta.num_states;
    let mut rows = Vec::with_capacity(n);
    let mut terminal = vec![false; n];
    for state in 0..n {
        let cell = meta.open_cells[state];
        if cell == meta.spec.goal {
            terminal[state] = true;
            rows.push(absorbing_row(state));
            continue;
        }
        let (x, y) = meta.spec.xy(cell);
        let mut per_action = Vec::with_capacity(NUM_ACTIONS);
        for (dx, dy) in ACTION_DELTAS {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            let dest = if meta.spec.is_open(nx, ny) {
                meta.spec.cell(nx as usize, ny as usize)
            } else {
                cell
            };
            let reward = if dest == meta.spec.goal { 1.0 } else { 0.0 };
            per_action.push(vec![Outcome {
                next_state: meta.nav_state(dest),
                probability: 1.0,
                reward,
            }]);
        }
        rows.push(per_action);
    }
    let initial = uniform_over(n, |s| !terminal[s]);
    let mdp = TabularMdp {
        num_states: n,
        num_actions: NUM_ACTIONS,
        rows,
        terminal,
        initial,
        discount: gamma,
        episodic_proper: gamma >= 1.0,
    };
    debug_assert!(mdp.validate().is_ok());
    (mdp, meta)
}

/// Builds the box task: the agent pushes a box by walking into it; the box
/// landing on the goal pays +1 and terminates. Starts are uniform over the
/// non-terminal configurations from which the goal is still reachable
/// (pushes toward the lower or left walls can dead-end the box; those
/// configurations get no start mass).
pub fn build_boxworld(variant: Variant, gamma: f64) -> (TabularMdp, GridMeta) {
    let spec = GridSpec::parse(layout_for(Env::Boxworld, variant)).expect("bundled layout");
    let meta = GridMeta::new(Env::Boxworld, variant, spec);
    let n = meta.num_states;
    let mut rows = Vec::with_capacity(n);
    let mut terminal = vec![false; n];
    for state in 0..n {
        let (agent, box_cell) = meta.box_cells(state);
        if box_cell == meta.spec.goal {
            terminal[state] = true;
            rows.push(absorbing_row(state));
            continue;
        }
        let (ax, ay) = meta.spec.xy(agent);
        let mut per_action = Vec::with_capacity(NUM_ACTIONS);
        for (dx, dy) in ACTION_DELTAS {
            let (nx, ny) = (ax as i64 + dx, ay as i64 + dy);
            let (next_agent, next_box) = if !meta.spec.is_open(nx, ny) {
                (agent, box_cell)
            } else {
                let dest = meta.spec.cell(nx as usize, ny as usize);
                if dest == box_cell {
                    let (bx, by) = (nx + dx, ny + dy);
                    if meta.spec.is_open(bx, by) {
                        (dest, meta.spec.cell(bx as usize, by as usize))
                    } else {
                        (agent, box_cell)
                    }
                } else {
                    (dest, box_cell)
                }
            };
            let reward = if next_box == meta.spec.goal { 1.0 } else { 0.0 };
            per_action.push(vec![Outcome {
                next_state: meta.box_state(next_agent, next_box),
                probability: 1.0,
                reward,
            }]);
        }
        rows.push(per_action);
    }
    let solvable = reachable_to_terminal(&rows, &terminal);
    let initial = uniform_over(n, |s| !terminal[s] && solvable[s]);
    let mdp = TabularMdp {
        num_states: n,
        num_actions: NUM_ACTIONS,
        rows,
        terminal,
        initial,
        discount: gamma,
        episodic_proper: gamma >= 1.0,
    };
    debug_assert!(mdp.validate().is_ok());
    (mdp, meta)
}

fn absorbing_row(state: usize) -> Vec<Vec<Outcome>> {
    vec![
        vec![Outcome {
            next_state: state,
            probability: 1.0,
            reward: 0.0,
        }];
        NUM_ACTIONS
    ]
}

fn uniform_over(n: usize, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let kept: Vec<usize> = (0..n).filter(|&s| keep(s)).collect();
    let p = 1.0 / kept.len() as f64;
    let mut initial = vec![0.0; n];
    for s in kept {
        initial[s] = p;
    }
    initial
}

/// States from which some action sequence reaches a terminal state
/// (breadth-first search on the reversed transition graph).
pub fn reachable_to_terminal(rows: &[Vec<Vec<Outcome>>], terminal: &[bool]) -> Vec<bool> {
    let n = rows.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, per_action) in rows.iter().enumerate() {
        if terminal[s] {
            continue;
        }
        for row in per_action {
            for o in row {
                if o.next_state != s {
                    reverse[o.next_state].push(s);
                }
            }
        }
    }
    let mut reach = terminal.to_vec();
    let mut queue: Vec<usize> = (0..n).filter(|&s| terminal[s]).collect();
    while let Some(s) = queue.pop() {
        for &prev in &reverse[s] {
            if !reach[prev] {
                reach[prev] = true;
                queue.push(prev);
            }
        }
    }
    reach
}

/// Maps a target-layout state into the source layout.
///
/// Navigation: the target's row bands fold onto the source rooms (rows below
/// the horizontal dividing wall shift up by one room; cells on the dividing
/// wall clamp to the room row above), columns are shared, and the result
/// snaps to the nearest open source cell.
///
/// Box task: agent and box translate so the goals align, then each snaps to
/// the nearest open source cell (ties in row-major order), the agent avoiding
/// the box's cell. Returns None only if no legal source configuration exists.
pub fn map_target_to_source_state(
    target: &GridMeta,
    source: &GridMeta,
    state: usize,
) -> Option<usize> {
    debug_assert_eq!(target.env, source.env);
    match target.env {
        Env::Multiroom => {
            let cell = target.open_cells[state];
            let (x, y) = target.spec.xy(cell);
            let sy = fold_row(y as i64, source.spec.height as i64);
            let snapped = source.spec.nearest_open(x as i64, sy, None)?;
            Some(source.nav_state(snapped))
        }
        Env::Boxworld => {
            let (agent, box_cell) = target.box_cells(state);
            let (gx_t, gy_t) = target.spec.xy(target.spec.goal);
            let (gx_s, gy_s) = source.spec.xy(source.spec.goal);
            let dx = gx_s as i64 - gx_t as i64;
            let dy = gy_s as i64 - gy_t as i64;
            let (bx, by) = target.spec.xy(box_cell);
            let snapped_box = source.spec.nearest_open(bx as i64 + dx, by as i64 + dy, None)?;
            let (ax, ay) = target.spec.xy(agent);
            let snapped_agent =
                source
                    .spec
                    .nearest_open(ax as i64 + dx, ay as i64 + dy, Some(snapped_box))?;
            Some(source.box_state(snapped_agent, snapped_box))
        }
    }
}

/// Row fold used by the navigation mapping: the source keeps rows
/// `0..source_height`, target rows at or below the dividing wall shift up by
/// one room height (wall row included, clamped to the last source room row).
fn fold_row(y: i64, source_height: i64) -> i64 {
    let last_room_row = source_height - 2;
    if y <= last_room_row {
        y
    } else if y <= source_height - 1 {
        last_room_row
    } else {
        y - (source_height - 1)
    }
}

/// Precomputes the full target -> source state table. Errors if any target
/// state has no legal image.
pub fn state_map(target: &GridMeta, source: &GridMeta) -> Result<Vec<usize>, GridError> {
    (0..target.num_states)
        .map(|s| {
            map_target_to_source_state(target, source, s).ok_or_else(|| {
                GridError::Mapping(format!("target state {s} has no source image"))
            })
        })
        .collect()
}
