use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine decay from `lr_init` at epoch 0 to `lr_final` at `total_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_init: f64,
    pub lr_final: f64,
    pub total_epochs: u64,
}

impl LrSchedule {
    pub fn cosine(lr_init: f64, lr_final: f64, total_epochs: u64) -> Self {
        LrSchedule {
            lr_init,
            lr_final,
            total_epochs,
        }
    }

    pub fn lr_at(&self, epoch: u64) -> Result<f64> {
        if epoch > self.total_epochs {
            return Err(Error::invalid(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.total_epochs
            )));
        }
        if epoch == 0 || self.total_epochs == 0 {
            return Ok(self.lr_init);
        }
        if epoch == self.total_epochs {
            return Ok(self.lr_final);
        }
        let c = (PI * epoch as f64 / self.total_epochs as f64).cos();
        Ok(self.lr_final + 0.5 * (self.lr_init - self.lr_final) * (1.0 + c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    Linear,
    Cosine,
}

/// Ramp-hold-decay weight: zero before `start_epoch`, linear ramp to `lambda0`
/// over `ramp_len` epochs, hold for `hold_len`, decay to `rho * lambda0` over
/// `decay_len`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxSchedule {
    pub start_epoch: u64,
    pub ramp_len: u64,
    pub hold_len: u64,
    pub decay_len: u64,
    pub decay_kind: DecayKind,
    pub lambda0: f64,
    pub rho: f64,
}

impl AuxSchedule {
    pub fn constant(lambda0: f64) -> Self {
        AuxSchedule {
            start_epoch: 0,
            ramp_len: 0,
            hold_len: 0,
            decay_len: 0,
            decay_kind: DecayKind::Linear,
            lambda0,
            rho: 1.0,
        }
    }

    pub fn off() -> Self {
        Self::constant(0.0)
    }

    /// First epoch with a nonzero weight (when `lambda0 != 0`).
    pub fn switch_on_epoch(&self) -> u64 {
        if self.ramp_len == 0 {
            self.start_epoch
        } else {
            self.start_epoch + 1
        }
    }

    pub fn decay_end(&self) -> u64 {
        self.start_epoch + self.ramp_len + self.hold_len + self.decay_len
    }

    pub fn weight_at(&self, epoch: u64) -> f64 {
        if epoch < self.start_epoch {
            return 0.0;
        }
        let mut t = epoch - self.start_epoch;
        if t < self.ramp_len {
            return self.lambda0 * t as f64 / self.ramp_len as f64;
        }
        t -= self.ramp_len;
        if t < self.hold_len {
            return self.lambda0;
        }
        t -= self.hold_len;
        if t >= self.decay_len {
            return self.rho * self.lambda0;
        }
        let frac = t as f64 / self.decay_len as f64;
        match self.decay_kind {
            DecayKind::Linear => self.lambda0 * (1.0 - (1.0 - self.rho) * frac),
            DecayKind::Cosine => {
                self.rho * self.lambda0 + (1.0 - self.rho) * self.lambda0 * 0.5 * (1.0 + (PI * frac).cos())
            }
        }
    }
}
