//! Renders a run's learned tables back onto the layout as CSV grids, with a
//! companion membership grid (1 = primal region, 0 = learner region) at the
//! run's own threshold.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::{build_task, ExperimentError};
use super::runner::{read_meta, G_FILE, Q_FILE, V_FILE};
use crate::grid::Reduce;
use crate::options::{g_state_value, membership, ThresholdTables};
use crate::tabular::{read_state_values_csv, ActionTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatmapTable {
    /// Success-predictor state values.
    G,
    /// Behavior-policy value estimates.
    V,
    /// Learner state values (max over actions).
    QMax,
}

impl FromStr for HeatmapTable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "g" => Ok(HeatmapTable::G),
            "v" => Ok(HeatmapTable::V),
            "qmax" => Ok(HeatmapTable::QMax),
            other => Err(format!("unknown table '{other}' (expected g, v, or qmax)")),
        }
    }
}

impl std::fmt::Display for HeatmapTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            HeatmapTable::G => "g",
            HeatmapTable::V => "v",
            HeatmapTable::QMax => "qmax",
        };
        write!(f, "{name}")
    }
}

pub struct HeatmapExport {
    pub value_grid: Vec<Vec<f64>>,
    pub value_path: PathBuf,
    /// Written when the run learned a success predictor. On the box task
    /// the grid reduces over box positions, so a cell reads 1 when any box
    /// placement puts it in the primal region.
    pub membership_grid: Option<Vec<Vec<f64>>>,
    pub membership_path: Option<PathBuf>,
}

/// Grid CSV: one row per layout row, walls as empty cells.
pub fn write_grid_csv(grid: &[Vec<f64>], path: &Path) -> Result<(), ExperimentError> {
    let mut out = String::new();
    for row in grid {
        let mut first = true;
        for &value in row {
            if !first {
                out.push(',');
            }
            first = false;
            if !value.is_nan() {
                let _ = write!(out, "{value}");
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a run directory, renders the chosen table onto the layout, and
/// writes `heatmap_<table>.csv` (plus `membership.csv` when a predictor
/// exists) back into the same directory.
pub fn export_heatmap(
    run_dir: &Path,
    table: HeatmapTable,
) -> Result<HeatmapExport, ExperimentError> {
    let meta = read_meta(run_dir)?;
    let setup = build_task(&meta.config)?;
    let (n, na) = (setup.mdp.num_states, setup.mdp.num_actions);
    let missing = |file: &str| {
        ExperimentError::Artifact(format!(
            "run has no {file} (algorithm {})",
            meta.config.algorithm
        ))
    };

    let q = ActionTable::read_csv(&run_dir.join(Q_FILE), n, na)
        .map_err(|e| ExperimentError::Artifact(format!("bad {Q_FILE}: {e}")))?;
    let g_path = run_dir.join(G_FILE);
    let g = if g_path.exists() {
        Some(
            ActionTable::read_csv(&g_path, n, na)
                .map_err(|e| ExperimentError::Artifact(format!("bad {G_FILE}: {e}")))?,
        )
    } else {
        None
    };
    let v_path = run_dir.join(V_FILE);
    let v = if v_path.exists() {
        Some(
            read_state_values_csv(&v_path, n)
                .map_err(|e| ExperimentError::Artifact(format!("bad {V_FILE}: {e}")))?,
        )
    } else {
        None
    };

    let values: Vec<f64> = match table {
        HeatmapTable::G => {
            let g = g.as_ref().ok_or_else(|| missing(G_FILE))?;
            let mu = setup.mu.as_ref().ok_or_else(|| missing("source policy"))?;
            (0..n).map(|s| g_state_value(g, mu, s)).collect()
        }
        HeatmapTable::V => v.clone().ok_or_else(|| missing(V_FILE))?,
        HeatmapTable::QMax => q.max_per_state(),
    };
    let reduce = Reduce::Max;
    let value_grid = setup.meta.render_values(&values, reduce);
    let value_path = run_dir.join(format!("heatmap_{table}.csv"));
    write_grid_csv(&value_grid, &value_path)?;

    let (membership_grid, membership_path) = match (&g, &setup.mu) {
        (Some(g), Some(mu)) => {
            let tables = ThresholdTables {
                recovery_q: Some(&q),
                student_q: Some(&q),
                behavior_v: v.as_deref(),
            };
            let spec = meta.config.threshold_spec();
            let in_l = membership(g, mu, &spec, &tables, n)?;
            let indicator: Vec<f64> =
                in_l.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
            let grid = setup.meta.render_values(&indicator, reduce);
            let path = run_dir.join("membership.csv");
            write_grid_csv(&grid, &path)?;
            (Some(grid), Some(path))
        }
        _ => (None, None),
    };

    Ok(HeatmapExport { value_grid, value_path, membership_grid, membership_path })
}

/// True when the cells holding 1.0 form one orthogonally connected region.
/// Cells off the layout (walls) are NaN and never connect.
pub fn ones_connected(grid: &[Vec<f64>]) -> bool {
    let h = grid.len();
    let w = grid.first().map_or(0, |r| r.len());
    let mut seen = vec![vec![false; w]; h];
    let mut start = None;
    let mut total = 0usize;
    for (y, row) in grid.iter().enumerate() {
        for (x, &value) in row.iter().enumerate() {
            if value == 1.0 {
                total += 1;
                start = start.or(Some((x, y)));
            }
        }
    }
    let Some(first) = start else { return false };
    let mut queue = vec![first];
    seen[first.1][first.0] = true;
    let mut reached = 0usize;
    while let Some((x, y)) = queue.pop() {
        reached += 1;
        for (dx, dy) in [(0i64, -1i64), (0, 1), (-1, 0), (1, 0)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !seen[ny][nx] && grid[ny][nx] == 1.0 {
                seen[ny][nx] = true;
                queue.push((nx, ny));
            }
        }
    }
    reached == total
}
