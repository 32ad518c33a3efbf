use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prescribed outer-wall flux `q(z)`. Ramp breakpoints are fractions of the length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FluxProfile {
    /// `q_max * clamp((z - z1) / (z2 - z1), 0, 1)` with `z1 = z1_frac L`, `z2 = z2_frac L`.
    Ramp { q_max: f64, z1_frac: f64, z2_frac: f64 },
    Constant { q: f64 },
}

impl Default for FluxProfile {
    fn default() -> Self {
        FluxProfile::Ramp {
            q_max: 1.0,
            z1_frac: 0.2,
            z2_frac: 0.4,
        }
    }
}

impl FluxProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FluxProfile::Ramp { q_max, z1_frac, z2_frac } => {
                if q_max.is_finite() && (0.0..=1.0).contains(&z1_frac) && z1_frac < z2_frac && z2_frac <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("invalid flux ramp {self:?}")))
                }
            }
            FluxProfile::Constant { q } if q.is_finite() => Ok(()),
            FluxProfile::Constant { .. } => Err(Error::invalid("non-finite constant flux")),
        }
    }

    /// Flux at `z` (no range check).
    #[inline]
    pub fn q(&self, z: f64, length: f64) -> f64 {
        match *self {
            FluxProfile::Ramp { q_max, z1_frac, z2_frac } => {
                let (z1, z2) = (z1_frac * length, z2_frac * length);
                q_max * ((z - z1) / (z2 - z1)).clamp(0.0, 1.0)
            }
            FluxProfile::Constant { q } => q,
        }
    }

    /// Flux at `z`, rejecting points outside `[0, length]`.
    pub fn flux_at(&self, z: f64, length: f64) -> Result<f64> {
        if !(0.0..=length).contains(&z) {
            return Err(Error::invalid(format!("z = {z} outside [0, {length}]")));
        }
        Ok(self.q(z, length))
    }

    /// Fixed-size binary descriptor: kind byte then three `f64` parameters.
    pub fn descriptor(&self) -> [u8; 25] {
        let (kind, a, b, c) = match *self {
            FluxProfile::Ramp { q_max, z1_frac, z2_frac } => (0u8, q_max, z1_frac, z2_frac),
            FluxProfile::Constant { q } => (1u8, q, 0.0, 0.0),
        };
        let mut out = [0u8; 25];
        out[0] = kind;
        out[1..9].copy_from_slice(&a.to_le_bytes());
        out[9..17].copy_from_slice(&b.to_le_bytes());
        out[17..25].copy_from_slice(&c.to_le_bytes());
        out
    }

    pub fn from_descriptor(d: &[u8; 25]) -> Result<Self> {
        let f = |r: std::ops::Range<usize>| f64::from_le_bytes(d[r].try_into().unwrap());
        match d[0] {
            0 => Ok(FluxProfile::Ramp {
                q_max: f(1..9),
                z1_frac: f(9..17),
                z2_frac: f(17..25),
            }),
            1 => Ok(FluxProfile::Constant { q: f(1..9) }),
            k => Err(Error::Format(format!("unknown flux kind {k}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_values() {
        let f = FluxProfile::default();
        let l = 10.0;
        assert_eq!(f.flux_at(1.0, l).unwrap(), 0.0);
        assert!((f.flux_at(3.0, l).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(f.flux_at(7.0, l).unwrap(), 1.0);
        assert!(f.flux_at(10.5, l).is_err());
        assert!(f.flux_at(-0.1, l).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        for f in [FluxProfile::default(), FluxProfile::Constant { q: -0.3 }] {
            assert_eq!(FluxProfile::from_descriptor(&f.descriptor()).unwrap(), f);
        }
    }
}
