//! Parameter sweeps: a base run plus per-field value lists, expanded as a
//! Cartesian product. Each point is produced by setting fields on the base
//! config's JSON and reparsing, so a misspelled parameter name fails loudly
//! instead of sweeping nothing.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::config::{ExperimentError, RunConfig};
use super::runner::{execute, run};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// Field name -> values to sweep. Keys are config field names; values
    /// must deserialize into the field's type.
    pub grid: BTreeMap<String, Vec<Value>>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<SweepConfig, ExperimentError> {
        let config: SweepConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<SweepConfig, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ExperimentError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        SweepConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.grid.is_empty() {
            return Err(ExperimentError::Config("sweep grid is empty".to_string()));
        }
        for (key, values) in &self.grid {
            if values.is_empty() {
                return Err(ExperimentError::Config(format!(
                    "sweep axis '{key}' has no values"
                )));
            }
        }
        self.base.validate()
    }

    /// All grid points in lexicographic key order, each as the patched and
    /// revalidated config plus its settings.
    pub fn expand(&self) -> Result<Vec<(BTreeMap<String, Value>, RunConfig)>, ExperimentError> {
        self.validate()?;
        let base = serde_json::to_value(&self.base)?;
        let keys: Vec<&String> = self.grid.keys().collect();
        let mut out = Vec::new();
        let mut indices = vec![0usize; keys.len()];
        loop {
            let mut patched = base.clone();
            let object = patched.as_object_mut().expect("config serializes to an object");
            let mut settings = BTreeMap::new();
            for (k, &i) in keys.iter().zip(&indices) {
                let value = self.grid[*k][i].clone();
                object.insert((*k).clone(), value.clone());
                settings.insert((*k).clone(), value);
            }
            let config: RunConfig = serde_json::from_value(patched).map_err(|e| {
                ExperimentError::Config(format!(
                    "sweep point {} does not form a valid config: {e}",
                    settings_label(&settings)
                ))
            })?;
            config.validate()?;
            out.push((settings, config));

            // Odometer increment over the value lists, last key fastest.
            let mut pos = keys.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.grid[keys[pos]].len() {
                    break;
                }
                indices[pos] = 0;
            }
        }
    }
}

/// Directory-safe label for a grid point: `k=v` pairs joined by commas,
/// keys in lexicographic order.
pub fn settings_label(settings: &BTreeMap<String, Value>) -> String {
    settings
        .iter()
        .map(|(k, v)| {
            let shown = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            format!("{k}={shown}")
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub label: String,
    pub settings: BTreeMap<String, Value>,
    pub final_return: f64,
    pub auc: f64,
}

pub struct SweepOutcome {
    /// Points ranked by final return, then area under the curve.
    pub points: Vec<SweepPoint>,
    pub summary_csv: String,
}

pub const SUMMARY_FILE: &str = "sweep_summary.csv";

/// Runs every grid point. With an output directory, each point lands in
/// `runs/<label>/` and the ranked summary in `sweep_summary.csv`.
pub fn sweep(config: &SweepConfig, out_dir: Option<&Path>) -> Result<SweepOutcome, ExperimentError> {
    let points = config.expand()?;
    let total = points.len();
    let mut results = Vec::with_capacity(total);
    for (i, (settings, run_config)) in points.into_iter().enumerate() {
        let label = settings_label(&settings);
        eprintln!("sweep {}/{total}: {label}", i + 1);
        let curve = match out_dir {
            Some(dir) => run(&run_config, &dir.join("runs").join(&label))?.curve,
            None => execute(&run_config)?.curve,
        };
        let final_return = curve.final_return().unwrap_or(f64::NAN);
        let auc = curve.auc();
        eprintln!("  final {final_return:.4}, auc {auc:.1}");
        results.push(SweepPoint { label, settings, final_return, auc });
    }
    // Rank: best final return first, area under the curve breaking ties,
    // label keeping the order total.
    results.sort_by(|a, b| {
        b.final_return
            .partial_cmp(&a.final_return)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.auc.partial_cmp(&a.auc).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.label.cmp(&b.label))
    });
    let summary_csv = summary_csv(config, &results);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SUMMARY_FILE), &summary_csv)?;
    }
    Ok(SweepOutcome { points: results, summary_csv })
}

fn summary_csv(config: &SweepConfig, points: &[SweepPoint]) -> String {
    let keys: Vec<&String> = config.grid.keys().collect();
    let mut out = String::from("rank");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push_str(",final_return,auc\n");
    for (rank, p) in points.iter().enumerate() {
        out.push_str(&(rank + 1).to_string());
        for k in &keys {
            out.push(',');
            let shown = match &p.settings[*k] {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&shown);
        }
        out.push_str(&format!(",{},{}\n", p.final_return, p.auc));
    }
    out
}
