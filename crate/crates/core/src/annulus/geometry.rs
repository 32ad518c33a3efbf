use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Wavy annulus `r_min <= r <= r_o(theta)`, `0 <= z <= length`, with
/// `r_o(theta) = r_max + amplitude * sin(lobes * theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnulusGeometry {
    pub r_min: f64,
    pub r_max: f64,
    pub length: f64,
    pub amplitude: f64,
    pub lobes: u32,
}

impl Default for AnnulusGeometry {
    fn default() -> Self {
        AnnulusGeometry {
            r_min: 0.2,
            r_max: 1.0,
            length: 10.0,
            amplitude: 0.25,
            lobes: 3,
        }
    }
}

impl AnnulusGeometry {
    /// Same radii and length with a circular outer wall.
    pub fn circular(self) -> Self {
        AnnulusGeometry { amplitude: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r_min > 0.0
            && self.length > 0.0
            && self.amplitude >= 0.0
            && self.r_max - self.amplitude > self.r_min
            && [self.r_min, self.r_max, self.length, self.amplitude].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate annulus geometry {self:?}")))
        }
    }

    #[inline]
    pub fn outer_radius(&self, theta: f64) -> f64 {
        self.r_max + self.amplitude * (self.lobes as f64 * theta).sin()
    }

    /// `d r_o / d theta`.
    #[inline]
    pub fn outer_radius_d(&self, theta: f64) -> f64 {
        let m = self.lobes as f64;
        self.amplitude * m * (m * theta).cos()
    }

    /// `d^2 r_o / d theta^2`.
    #[inline]
    pub fn outer_radius_dd(&self, theta: f64) -> f64 {
        let m = self.lobes as f64;
        -self.amplitude * m * m * (m * theta).sin()
    }

    /// Local gap `r_o(theta) - r_min`.
    #[inline]
    pub fn gap(&self, theta: f64) -> f64 {
        self.outer_radius(theta) - self.r_min
    }

    #[inline]
    pub fn r_of(&self, s: f64, theta: f64) -> f64 {
        self.r_min + s * self.gap(theta)
    }

    pub fn map_s_to_r(&self, s: f64, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
        }
        Ok(self.r_of(s, theta))
    }

    /// Inverse of [`map_s_to_r`](Self::map_s_to_r) at fixed `theta`.
    pub fn s_of(&self, r: f64, theta: f64) -> f64 {
        (r - self.r_min) / self.gap(theta)
    }

    /// Tangential metric `sqrt(r^2 + (s r_o')^2)` along lines of constant `s`.
    pub fn h_theta(&self, s: f64, theta: f64) -> f64 {
        let r = self.r_of(s, theta);
        let t = s * self.outer_radius_d(theta);
        (r * r + t * t).sqrt()
    }

    /// Bounds of `(r, theta, z)` covering the domain.
    pub fn input_bounds(&self) -> [(f64, f64); 3] {
        [
            (self.r_min, self.r_max + self.amplitude),
            (0.0, TAU),
            (0.0, self.length),
        ]
    }

    /// Stable 64-bit fingerprint of the geometry.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(b"annulus-geometry-v1");
        for v in [self.r_min, self.r_max, self.length, self.amplitude] {
            h.update(v.to_le_bytes());
        }
        h.update(self.lobes.to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn outer_radius_values() {
        let g = AnnulusGeometry::default();
        assert_eq!(g.outer_radius(0.0), 1.0);
        assert!((g.outer_radius(PI / 6.0) - 1.25).abs() < 1e-15);
        assert!(g.outer_radius_d(PI / 6.0).abs() < 1e-15);
        assert!((g.outer_radius(PI / 2.0) - 0.75).abs() < 1e-15);
        assert!((g.outer_radius_d(0.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mapping() {
        let g = AnnulusGeometry::default();
        assert_eq!(g.map_s_to_r(0.0, 1.3).unwrap(), 0.2);
        assert_eq!(g.map_s_to_r(1.0, 0.0).unwrap(), 1.0);
        assert!((g.map_s_to_r(0.5, PI / 6.0).unwrap() - 0.725).abs() < 1e-15);
        assert!(g.map_s_to_r(1.01, 0.0).is_err());
        assert!((g.s_of(g.r_of(0.3, 2.0), 2.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_fd() {
        let g = AnnulusGeometry::default();
        let h = 1e-6;
        for &t in &[0.1, 1.0, 2.5] {
            let d = (g.outer_radius(t + h) - g.outer_radius(t - h)) / (2.0 * h);
            let dd = (g.outer_radius_d(t + h) - g.outer_radius_d(t - h)) / (2.0 * h);
            assert!((d - g.outer_radius_d(t)).abs() < 1e-8);
            assert!((dd - g.outer_radius_dd(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn hash_tracks_geometry() {
        let g = AnnulusGeometry::default();
        assert_eq!(g.hash(), AnnulusGeometry::default().hash());
        assert_ne!(g.hash(), g.circular().hash());
    }
}
