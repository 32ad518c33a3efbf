//! Exact sign test, per-arm aggregates and metric-hierarchy ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::summary::{SummaryRow, METRIC_COLUMNS};
use super::{Arm, Stage};
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::train::RunStatus;

/// Exact two-sided binomial sign test:
/// `p = min(1, 2 * sum_{k >= max(wins, n - wins)} C(n, k) / 2^n)`.
pub fn paired_sign_test(wins: u64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sign test needs at least one untied pair"));
    }
    if wins > n {
        return Err(Error::invalid(format!("wins {wins} exceeds pairs {n}")));
    }
    let k0 = wins.max(n - wins);
    if n < 100 {
        // exact integer tail, one rounding on conversion
        let mut c: u128 = 1;
        let mut tail: u128 = 0;
        for k in (k0..=n).rev() {
            tail += c;
            c = c * u128::from(k) / u128::from(n - k + 1);
        }
        let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
        return Ok(p.min(1.0));
    }
    let ln2n = n as f64 * std::f64::consts::LN_2;
    // ln C(n, k) built up from ln C(n, n) = 0 downward
    let mut ln_c = 0.0;
    let mut tail = 0.0;
    for k in (k0..=n).rev() {
        tail += (ln_c - ln2n).exp();
        if k > 0 {
            ln_c += (k as f64).ln() - ((n - k + 1) as f64).ln();
        }
    }
    Ok((2.0 * tail).min(1.0))
}

/// Paired win count where smaller is better; ties are dropped. Returns `(wins_a, untied)`.
pub fn paired_wins(a: &[f64], b: &[f64]) -> Result<(u64, u64)> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    let mut wins = 0;
    let mut n = 0;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Less) => {
                wins += 1;
                n += 1;
            }
            Some(Ordering::Greater) => n += 1,
            _ => {}
        }
    }
    Ok((wins, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); needs two values.
    pub std: Option<f64>,
}

/// Mean and sample standard deviation, summing in sorted order so the result
/// does not depend on input order.
pub fn mean_std(values: &[f64]) -> MetricStats {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return MetricStats { n, mean: None, std: None };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    MetricStats { n, mean: Some(mean), std }
}

/// Identifies one configuration across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub stage: Stage,
    pub arm: Arm,
    pub optimizer: OptimizerKind,
    pub lr_init: f64,
    pub aux_weight: f64,
}

impl GroupKey {
    fn of(r: &SummaryRow) -> Self {
        GroupKey {
            stage: r.stage,
            arm: r.arm,
            optimizer: r.optimizer,
            lr_init: r.lr_init,
            aux_weight: r.aux_weight,
        }
    }

    fn sort_key(&self) -> (Stage, Arm, OptimizerKind, u64, u64) {
        (
            self.stage,
            self.arm,
            self.optimizer,
            self.lr_init.to_bits(),
            self.aux_weight.to_bits(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: GroupKey,
    pub n_runs: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Statistics over completed runs, keyed by metric column.
    pub stats: BTreeMap<String, MetricStats>,
}

impl AggregateRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.stats.get(metric).and_then(|s| s.mean)
    }
}

/// Groups rows by configuration and aggregates completed runs. Groups come out
/// sorted by `(stage, arm, optimizer, lr_init, aux_weight)`.
pub fn aggregate(rows: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<_, (GroupKey, Vec<&SummaryRow>)> = BTreeMap::new();
    for r in rows {
        let key = GroupKey::of(r);
        groups.entry(key.sort_key()).or_insert_with(|| (key, Vec::new())).1.push(r);
    }
    groups
        .into_values()
        .map(|(key, members)| {
            let ok: Vec<&SummaryRow> = members.iter().copied().filter(|r| r.status == RunStatus::Completed).collect();
            let stats = METRIC_COLUMNS
                .iter()
                .map(|&m| {
                    let vals: Vec<f64> = ok.iter().filter_map(|r| r.metric(m)).collect();
                    (m.to_string(), mean_std(&vals))
                })
                .collect();
            AggregateRow {
                key,
                n_runs: members.len(),
                n_ok: ok.len(),
                n_failed: members.len() - ok.len(),
                stats,
            }
        })
        .collect()
}

/// Aggregate CSV column order.
pub fn aggregate_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["stage", "arm", "optimizer", "lr_init", "aux_weight", "n_runs", "n_ok", "n_failed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in METRIC_COLUMNS {
        cols.push(format!("{m}_mean"));
        cols.push(format!("{m}_std"));
    }
    cols
}

pub fn write_aggregate(path: impl AsRef<std::path::Path>, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(aggregate_columns())?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for a in rows {
        let mut rec = vec![
            a.key.stage.as_str().to_string(),
            a.key.arm.as_str().to_string(),
            a.key.optimizer.as_str().to_string(),
            a.key.lr_init.to_string(),
            a.key.aux_weight.to_string(),
            a.n_runs.to_string(),
            a.n_ok.to_string(),
            a.n_failed.to_string(),
        ];
        for m in METRIC_COLUMNS {
            let s = a.stats.get(m);
            rec.push(opt(s.and_then(|s| s.mean)));
            rec.push(opt(s.and_then(|s| s.std)));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Model-selection hierarchy, most important first. Stage 2 ranks wall flux
/// against the reference, then the reference BC residual, the dense BC audit,
/// the scalar losses, and finally wall temperature.
pub fn hierarchy(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Stage1 => &["best_val", "residual_rmse", "rel_l2_u"],
        Stage::Stage2 => &[
            "dtdn_rmse",
            "bc_residual_rmse",
            "wall_bc_rmse",
            "final_loss",
            "best_val",
            "t_wall_rmse",
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub key: GroupKey,
    /// Group means of the hierarchy metrics, in hierarchy order.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub stage: Stage,
    pub hierarchy: Vec<String>,
    pub aggregate: Vec<AggregateRow>,
    pub ranking: Vec<RankEntry>,
}

fn cmp_level(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Aggregates the rows and ranks configurations lexicographically under the
/// stage's hierarchy (smaller is better; missing values rank last).
pub fn report(rows: &[SummaryRow]) -> Result<Report> {
    let stage = rows
        .first()
        .ok_or_else(|| Error::invalid("report needs at least one summary"))?
        .stage;
    if rows.iter().any(|r| r.stage != stage) {
        return Err(Error::invalid("report mixes stage1 and stage2 summaries"));
    }
    let levels = hierarchy(stage);
    let aggregate = aggregate(rows);
    let mut entries: Vec<RankEntry> = aggregate
        .iter()
        .map(|a| RankEntry {
            rank: 0,
            key: a.key,
            values: levels.iter().map(|m| a.mean(m)).collect(),
        })
        .collect();
    entries.sort_by(|x, y| {
        x.values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| cmp_level(*a, *b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.key.sort_key().cmp(&y.key.sort_key()))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(Report {
        stage,
        hierarchy: levels.iter().map(|s| s.to_string()).collect(),
        aggregate,
        ranking: entries,
    })
}
