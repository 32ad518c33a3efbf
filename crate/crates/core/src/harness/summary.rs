//! Per-run summaries (JSON, schema v1) and their CSV rows.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Arm, RunConfig, Stage};
use crate::annulus::{audit_stage2, train_stage2, Stage2Audit, Stage2Problem, TermBreakdown};
use crate::diffnet::{save_checkpoint, NetworkParams};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::fdref::read_wall_slice;
use crate::poisson::{audit_stage1, train_stage1, Stage1Audit};
use crate::train::RunStatus;

pub const SCHEMA_VERSION: u32 = 1;

/// CSV column order, schema v1.
pub const CSV_COLUMNS: [&str; 19] = [
    "stage",
    "arm",
    "seed",
    "optimizer",
    "lr_init",
    "aux_weight",
    "status",
    "best_val",
    "rel_l2_u",
    "rel_l2_grad_u",
    "residual_rmse",
    "grad_r_rmse",
    "final_loss",
    "wall_bc_rmse",
    "dtdn_rmse",
    "t_wall_rmse",
    "bc_residual_rmse",
    "shell_probe",
    "runtime_s",
];

/// One CSV row. Metrics that do not apply to the stage, or that are
/// non-finite, are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub stage: Stage,
    pub arm: Arm,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub lr_init: f64,
    pub aux_weight: f64,
    pub status: RunStatus,
    pub best_val: Option<f64>,
    pub rel_l2_u: Option<f64>,
    pub rel_l2_grad_u: Option<f64>,
    pub residual_rmse: Option<f64>,
    pub grad_r_rmse: Option<f64>,
    pub final_loss: Option<f64>,
    pub wall_bc_rmse: Option<f64>,
    pub dtdn_rmse: Option<f64>,
    pub t_wall_rmse: Option<f64>,
    pub bc_residual_rmse: Option<f64>,
    pub shell_probe: Option<f64>,
    pub runtime_s: Option<f64>,
}

/// Metric columns of [`SummaryRow`], in CSV order.
pub const METRIC_COLUMNS: [&str; 11] = [
    "best_val",
    "rel_l2_u",
    "rel_l2_grad_u",
    "residual_rmse",
    "grad_r_rmse",
    "final_loss",
    "wall_bc_rmse",
    "dtdn_rmse",
    "t_wall_rmse",
    "bc_residual_rmse",
    "shell_probe",
];

impl SummaryRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "best_val" => self.best_val,
            "rel_l2_u" => self.rel_l2_u,
            "rel_l2_grad_u" => self.rel_l2_grad_u,
            "residual_rmse" => self.residual_rmse,
            "grad_r_rmse" => self.grad_r_rmse,
            "final_loss" => self.final_loss,
            "wall_bc_rmse" => self.wall_bc_rmse,
            "dtdn_rmse" => self.dtdn_rmse,
            "t_wall_rmse" => self.t_wall_rmse,
            "bc_residual_rmse" => self.bc_residual_rmse,
            "shell_probe" => self.shell_probe,
            "runtime_s" => self.runtime_s,
            _ => None,
        }
    }
}

pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub runtime_s: f64,
    pub seconds_per_epoch: f64,
}

/// Everything one run reports. Serialized as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub run_name: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub best_epoch: u64,
    pub epochs_run: u64,
    pub last_finite_epoch: Option<u64>,
    /// Aux weight applied at switch-on; differs from the configured weight for matched AD arms.
    pub effective_aux_weight: f64,
    pub metrics: SummaryRow,
    /// Stage 1: FD residual-gradient loss on the four shifted audit grids.
    pub shifted_fd_rg: Option<Vec<Option<f64>>>,
    /// Stage 2: validation-cloud term breakdown of the best checkpoint.
    pub val_terms: Option<TermBreakdown>,
    pub val_history: Vec<(u64, f64)>,
    pub loss_history: Vec<f64>,
    pub timing: Option<Timing>,
    /// Checkpoint file name, relative to the summary's directory.
    pub checkpoint: Option<String>,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        self.status == RunStatus::Failed
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: RunSummary = serde_json::from_str(text)?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported summary schema {}", s.schema_version)));
        }
        Ok(s)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Re-runs the embedded config without writing files.
    pub fn regenerate(&self) -> Result<RunSummary> {
        Ok(execute(&self.config)?.0)
    }
}

/// Runs the config in memory and returns the summary and the best-validation parameters.
pub fn execute(cfg: &RunConfig) -> Result<(RunSummary, NetworkParams)> {
    cfg.validate()?;
    let started = Instant::now();
    let mut row = SummaryRow {
        stage: cfg.stage,
        arm: cfg.arm,
        seed: cfg.seeds.init,
        optimizer: cfg.optimizer.kind,
        lr_init: cfg.optimizer.lr_init,
        aux_weight: cfg.aux_weight(),
        status: RunStatus::Completed,
        best_val: None,
        rel_l2_u: None,
        rel_l2_grad_u: None,
        residual_rmse: None,
        grad_r_rmse: None,
        final_loss: None,
        wall_bc_rmse: None,
        dtdn_rmse: None,
        t_wall_rmse: None,
        bc_residual_rmse: None,
        shell_probe: None,
        runtime_s: None,
    };
    let mut shifted_fd_rg = None;
    let mut val_terms = None;
    let (outcome, effective) = match cfg.stage {
        Stage::Stage1 => {
            let run = train_stage1(cfg)?;
            if let Some(a) = &run.audit {
                row.rel_l2_u = finite(a.rel_l2_u);
                row.rel_l2_grad_u = finite(a.rel_l2_grad_u);
                row.residual_rmse = finite(a.residual_rmse);
                row.grad_r_rmse = finite(a.grad_r_rmse);
                shifted_fd_rg = Some(a.shifted_fd_rg.iter().map(|&v| finite(v)).collect());
            }
            (run.outcome, run.effective_aux_weight)
        }
        Stage::Stage2 => {
            let run = train_stage2(cfg)?;
            if let Some(a) = &run.audit {
                row.wall_bc_rmse = finite(a.wall_bc_rmse);
                row.shell_probe = finite(a.shell_probe);
                if let Some(r) = &a.reference {
                    row.dtdn_rmse = finite(r.dtdn_rmse);
                    row.t_wall_rmse = finite(r.t_wall_rmse);
                    row.bc_residual_rmse = finite(r.bc_residual_rmse);
                }
                val_terms = Some(a.val_terms);
            }
            (run.outcome, row.aux_weight)
        }
    };
    row.status = outcome.status;
    row.best_val = finite(outcome.best_val);
    row.final_loss = finite(outcome.final_loss);
    let timing = cfg.record_timing.then(|| {
        let runtime_s = started.elapsed().as_secs_f64();
        Timing {
            runtime_s,
            seconds_per_epoch: runtime_s / outcome.epochs_run.max(1) as f64,
        }
    });
    row.runtime_s = timing.as_ref().map(|t| t.runtime_s);
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        run_name: cfg.run_name(),
        config: cfg.clone(),
        status: outcome.status,
        failure: outcome.failure.clone(),
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        last_finite_epoch: outcome.last_finite_epoch,
        effective_aux_weight: effective,
        metrics: row,
        shifted_fd_rg,
        val_terms,
        val_history: outcome.val_history,
        loss_history: outcome.loss_history,
        timing,
        checkpoint: None,
    };
    Ok((summary, outcome.best))
}

/// Paths written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

/// Executes a run and writes `<name>.json`, `<name>.csv` and, if enabled, `<name>.ckpt`
/// into the output directory.
pub fn run(cfg: &RunConfig) -> Result<(RunSummary, RunFiles)> {
    let (mut summary, best) = execute(cfg)?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let name = summary.run_name.clone();
    let checkpoint = if cfg.output.write_checkpoint {
        let file = format!("{name}.ckpt");
        let path = dir.join(&file);
        save_checkpoint(&best, &path)?;
        summary.checkpoint = Some(file);
        Some(path)
    } else {
        None
    };
    let json = dir.join(format!("{name}.json"));
    std::fs::write(&json, summary.to_json()?)?;
    let csv = dir.join(format!("{name}.csv"));
    write_rows(&csv, std::slice::from_ref(&summary.metrics))?;
    Ok((summary, RunFiles { json, csv, checkpoint }))
}

pub fn write_rows(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows, checking that the header matches schema v1 exactly.
pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Format(format!("CSV header {header:?} does not match schema v1")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Audit of a trained network under a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum AuditReport {
    Stage1(Stage1Audit),
    Stage2(Stage2Audit),
}

/// Re-audits `net` (e.g. a loaded checkpoint) with the config's audit settings.
pub fn audit(cfg: &RunConfig, net: &NetworkParams) -> Result<AuditReport> {
    cfg.validate()?;
    if net.layer_sizes().first() != cfg.layer_sizes().first() {
        return Err(Error::Dimension {
            expected: cfg.layer_sizes()[0],
            got: net.layer_sizes()[0],
        });
    }
    match cfg.stage {
        Stage::Stage1 => Ok(AuditReport::Stage1(audit_stage1(
            net,
            cfg.seeds.audit,
            cfg.stage1.audit_points,
            cfg.stage1.aux_n,
        )?)),
        Stage::Stage2 => {
            let reference = cfg.stage2.reference.as_ref().map(read_wall_slice).transpose()?;
            let problem = Stage2Problem::from_config(cfg)?;
            Ok(AuditReport::Stage2(audit_stage2(&problem, net, cfg, reference.as_ref())?))
        }
    }
}
