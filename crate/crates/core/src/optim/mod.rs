//! Optimizers, learning-rate schedules and auxiliary-weight schedules.

mod adam;
mod schedule;

use serde::{Deserialize, Serialize};

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_EPS};
pub use schedule::{AuxSchedule, DecayKind, LrSchedule};

use crate::error::{Error, Result};

/// Uniform optimizer interface: gradient and current learning rate in, parameter update out.
pub trait StepRule {
    fn step(&mut self, grad: &[f64], lr: f64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam95,
    Adam999,
    KourkoutasBeta,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam95 => "adam95",
            OptimizerKind::Adam999 => "adam999",
            OptimizerKind::KourkoutasBeta => "kourkoutas_beta",
        }
    }
}

/// Builds a step rule for `n_params` parameters. Kourkoutas-beta has no bundled
/// update rule; pass one through `plugin`.
pub fn optimizer_slot(
    kind: OptimizerKind,
    n_params: usize,
    plugin: Option<Box<dyn StepRule>>,
) -> Result<Box<dyn StepRule>> {
    match kind {
        OptimizerKind::Adam95 => Ok(Box::new(AdamState::new(n_params, 0.95))),
        OptimizerKind::Adam999 => Ok(Box::new(AdamState::new(n_params, 0.999))),
        OptimizerKind::KourkoutasBeta => plugin.ok_or_else(|| Error::NotBundled(kind.as_str().into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Sgd;

    impl StepRule for Sgd {
        fn step(&mut self, grad: &[f64], lr: f64) -> Result<Vec<f64>> {
            Ok(grad.iter().map(|g| -lr * g).collect())
        }
    }

    #[test]
    fn slots() {
        assert!(matches!(
            optimizer_slot(OptimizerKind::KourkoutasBeta, 3, None),
            Err(Error::NotBundled(_))
        ));
        let mut k = optimizer_slot(OptimizerKind::KourkoutasBeta, 1, Some(Box::new(Sgd))).unwrap();
        assert_eq!(k.step(&[2.0], 0.5).unwrap(), vec![-1.0]);
        let mut a = optimizer_slot(OptimizerKind::Adam999, 1, None).unwrap();
        assert!((a.step(&[1.0], 0.1).unwrap()[0] + 0.1).abs() < 1e-8);
    }
}
