//! Full-batch training loop shared by both stages.

use serde::{Deserialize, Serialize};

use crate::diffnet::NetworkParams;
use crate::error::Result;
use crate::optim::{LrSchedule, StepRule};

/// A training problem: composite objective with gradient, and a validation metric.
pub trait Objective {
    /// Called once per epoch before [`loss_and_grad`](Self::loss_and_grad); lets
    /// the problem settle epoch-dependent state (bank rotation, weight matching).
    fn begin_epoch(&mut self, _net: &NetworkParams, _epoch: u64) -> Result<()> {
        Ok(())
    }

    /// Training objective at `epoch` and its parameter gradient.
    fn loss_and_grad(&self, net: &NetworkParams, epoch: u64) -> Result<(f64, Vec<f64>)>;

    fn validation_loss(&self, net: &NetworkParams) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub status: RunStatus,
    pub best: NetworkParams,
    pub best_val: f64,
    pub best_epoch: u64,
    /// Training objective at the last evaluated epoch.
    pub final_loss: f64,
    /// Epochs whose optimizer step completed.
    pub epochs_run: u64,
    pub last_finite_epoch: Option<u64>,
    pub failure: Option<String>,
    pub val_history: Vec<(u64, f64)>,
    pub loss_history: Vec<f64>,
}

/// Runs `epochs` optimizer steps, validating at every multiple of
/// `validate_every` and after the last step, and keeps the best-validation
/// parameters. A non-finite loss or gradient stops the run as failed.
pub fn train(
    net: NetworkParams,
    objective: &mut dyn Objective,
    optimizer: &mut dyn StepRule,
    lr: &LrSchedule,
    epochs: u64,
    validate_every: u64,
) -> Result<TrainOutcome> {
    let mut net = net;
    let mut out = TrainOutcome {
        status: RunStatus::Completed,
        best: net.clone(),
        best_val: f64::INFINITY,
        best_epoch: 0,
        final_loss: f64::NAN,
        epochs_run: 0,
        last_finite_epoch: None,
        failure: None,
        val_history: Vec::new(),
        loss_history: Vec::with_capacity(epochs as usize),
    };
    let validate_every = validate_every.max(1);
    for epoch in 0..=epochs {
        if epoch % validate_every == 0 || epoch == epochs {
            match objective.validation_loss(&net) {
                Ok(v) if v.is_finite() => {
                    out.val_history.push((epoch, v));
                    if v < out.best_val {
                        out.best_val = v;
                        out.best_epoch = epoch;
                        out.best = net.clone();
                    }
                }
                Ok(_) | Err(_) => {
                    out.status = RunStatus::Failed;
                    out.failure = Some(format!("non-finite validation loss at epoch {epoch}"));
                    break;
                }
            }
        }
        if epoch == epochs {
            break;
        }
        let step = objective.begin_epoch(&net, epoch).and_then(|_| {
            let (loss, grad) = objective.loss_and_grad(&net, epoch)?;
            let delta = optimizer.step(&grad, lr.lr_at(epoch)?)?;
            Ok((loss, delta))
        });
        match step {
            Ok((loss, delta)) if loss.is_finite() => {
                out.final_loss = loss;
                out.loss_history.push(loss);
                for (p, d) in net.params_mut().iter_mut().zip(&delta) {
                    *p += d;
                }
                if let Some(i) = net.params().iter().position(|p| !p.is_finite()) {
                    out.status = RunStatus::Failed;
                    out.failure = Some(format!("parameter {i} became non-finite at epoch {epoch}"));
                    break;
                }
                out.last_finite_epoch = Some(epoch);
                out.epochs_run = epoch + 1;
            }
            Ok(_) => {
                out.status = RunStatus::Failed;
                out.failure = Some(format!("non-finite loss at epoch {epoch}"));
                break;
            }
            Err(e) => {
                out.status = RunStatus::Failed;
                out.failure = Some(format!("epoch {epoch}: {e}"));
                break;
            }
        }
    }
    if out.loss_history.is_empty() && out.status == RunStatus::Completed {
        out.final_loss = objective.loss_and_grad(&net, 0).map(|(l, _)| l).unwrap_or(f64::NAN);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{init_mlp, Activation};
    use crate::optim::AdamState;

    /// Drives the output bias toward `target` at one point.
    struct Quadratic {
        target: f64,
    }

    impl Objective for Quadratic {
        fn loss_and_grad(&self, net: &NetworkParams, _: u64) -> Result<(f64, Vec<f64>)> {
            let u = net.eval(&[0.0])?;
            let mut g = vec![0.0; net.n_params()];
            *g.last_mut().unwrap() = 2.0 * (u - self.target);
            Ok(((u - self.target).powi(2), g))
        }

        fn validation_loss(&self, net: &NetworkParams) -> Result<f64> {
            Ok((net.eval(&[0.0])? - self.target).powi(2))
        }
    }

    #[test]
    fn converges_and_keeps_best() {
        let net = init_mlp(&[1, 3, 1], Activation::Tanh, 0).unwrap();
        let mut opt = AdamState::new(net.n_params(), 0.999);
        let out = train(net, &mut Quadratic { target: 0.5 }, &mut opt, &LrSchedule::cosine(0.05, 0.0, 200), 200, 10)
            .unwrap();
        assert_eq!(out.status, RunStatus::Completed);
        assert!(out.best_val < 1e-4, "{}", out.best_val);
        assert_eq!(out.val_history.len(), 21);
        assert_eq!(out.epochs_run, 200);
    }

    #[test]
    fn zero_epochs_reports_initial_state() {
        let net = init_mlp(&[1, 3, 1], Activation::Tanh, 0).unwrap();
        let mut opt = AdamState::new(net.n_params(), 0.999);
        let out = train(net.clone(), &mut Quadratic { target: 0.5 }, &mut opt, &LrSchedule::cosine(0.05, 0.0, 0), 0, 10)
            .unwrap();
        assert_eq!(out.best, net);
        assert_eq!(out.best_epoch, 0);
        assert!((out.final_loss - out.best_val).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_recorded() {
        let net = init_mlp(&[1, 3, 1], Activation::Tanh, 0).unwrap();
        let mut opt = AdamState::new(net.n_params(), 0.999);
        let out = train(net, &mut Quadratic { target: f64::INFINITY }, &mut opt, &LrSchedule::cosine(0.05, 0.0, 5), 5, 1)
            .unwrap();
        assert_eq!(out.status, RunStatus::Failed);
        assert!(out.failure.is_some());
    }
}
