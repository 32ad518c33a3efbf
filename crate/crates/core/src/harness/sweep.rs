//! Cartesian sweeps over arms, seeds and aux weights.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::stats::{aggregate, write_aggregate, AggregateRow};
use super::summary::{run, write_rows, RunSummary, SummaryRow};
use super::{Arm, RunConfig, Seeds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
    /// Aux weights; empty keeps the template's weight. The `off` arm runs once per seed.
    pub weights: Vec<f64>,
}

impl SweepAxes {
    /// Expands the template into one config per run, in `(arm, weight, seed)` order.
    pub fn configs(&self, template: &RunConfig) -> Result<Vec<RunConfig>> {
        if self.arms.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sweep needs at least one arm and one seed"));
        }
        let weights: Vec<Option<f64>> = if self.weights.is_empty() {
            vec![None]
        } else {
            self.weights.iter().map(|&w| Some(w)).collect()
        };
        let mut out = Vec::new();
        for &arm in &self.arms {
            let ws: &[Option<f64>] = if arm == Arm::Off { &[None] } else { &weights };
            for &w in ws {
                for &seed in &self.seeds {
                    let mut cfg = template.clone();
                    cfg.arm = arm;
                    cfg.seeds = Seeds::all(seed);
                    if w.is_some() {
                        cfg.aux.weight = w;
                    }
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub summaries: Vec<RunSummary>,
    pub aggregate: Vec<AggregateRow>,
    pub rows_csv: PathBuf,
    pub aggregate_csv: PathBuf,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.summaries.iter().map(|s| s.metrics.clone()).collect()
    }
}

/// Runs every configuration, then writes `sweep_runs.csv` and
/// `sweep_aggregate.csv` next to the per-run files. Failed runs are kept in the
/// rows and counted in the aggregate.
pub fn sweep(template: &RunConfig, axes: &SweepAxes) -> Result<SweepResult> {
    let configs = axes.configs(template)?;
    let mut summaries = Vec::with_capacity(configs.len());
    for cfg in &configs {
        summaries.push(run(cfg)?.0);
    }
    let rows: Vec<SummaryRow> = summaries.iter().map(|s| s.metrics.clone()).collect();
    let agg = aggregate(&rows);
    let dir = template.output_dir();
    std::fs::create_dir_all(&dir)?;
    let rows_csv = dir.join("sweep_runs.csv");
    let aggregate_csv = dir.join("sweep_aggregate.csv");
    write_rows(&rows_csv, &rows)?;
    write_aggregate(&aggregate_csv, &agg)?;
    Ok(SweepResult {
        summaries,
        aggregate: agg,
        rows_csv,
        aggregate_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_counts() {
        let t = RunConfig::stage1_default();
        let axes = SweepAxes {
            arms: vec![Arm::Off, Arm::FdFixed],
            seeds: vec![0, 1, 2],
            weights: vec![1e-4, 1e-3],
        };
        let cfgs = axes.configs(&t).unwrap();
        assert_eq!(cfgs.len(), 3 + 6);
        assert!(cfgs.iter().filter(|c| c.arm == Arm::Off).all(|c| c.aux_weight() == 0.0));
        assert!(SweepAxes::default().configs(&t).is_err());
        let bad = SweepAxes {
            arms: vec![Arm::ShellFixed],
            seeds: vec![0],
            weights: vec![],
        };
        assert!(bad.configs(&t).is_err());
    }
}
