//! Body-fitted shell near the outer wall and the residual-gradient penalty on it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::problem::cylindrical_residuals;
use super::AnnulusGeometry;
use crate::diffnet::Field;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShellSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub n_theta: usize,
    pub n_z: usize,
}

impl Default for ShellSpec {
    fn default() -> Self {
        ShellSpec {
            s_min: 0.75,
            s_max: 0.98,
            n_s: 8,
            n_theta: 32,
            n_z: 32,
        }
    }
}

/// Structured `(s, theta, z)` grid. Node `(i, j, k)` has flat index
/// `(i * n_theta + j) * n_z + k`; `s_i` spans `[s_min, s_max]`, `theta_j = theta0 + 2 pi j / n_theta`
/// (periodic) and `z_k = (k + 1) L / (n_z + 1)` avoids the end caps.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellBank {
    pub spec: ShellSpec,
    pub geom: AnnulusGeometry,
    pub theta0: f64,
    pub s: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    pub ds: f64,
    pub dtheta: f64,
    pub dz: f64,
    /// Physical nodes `(r, theta, z)`.
    pub points: Vec<f64>,
    /// `h_theta` per node.
    pub h_theta: Vec<f64>,
    /// Physical radial spacing `ds * (r_o(theta_j) - r_min)` per theta column.
    pub dr: Vec<f64>,
    /// Trapezoid tensor weights times the volume Jacobian `r (r_o - r_min)`, per node.
    pub weights: Vec<f64>,
}

pub fn build_shell_bank(geom: &AnnulusGeometry, spec: &ShellSpec, theta0: f64) -> Result<ShellBank> {
    geom.validate()?;
    if spec.n_s < 3 || spec.n_theta < 3 || spec.n_z < 3 {
        return Err(Error::invalid(format!(
            "shell counts ({}, {}, {}) must be at least 3 each",
            spec.n_s, spec.n_theta, spec.n_z
        )));
    }
    if !(0.0 < spec.s_min && spec.s_min < spec.s_max && spec.s_max < 1.0) {
        return Err(Error::invalid(format!(
            "shell range [{}, {}] must lie strictly inside (0, 1)",
            spec.s_min, spec.s_max
        )));
    }
    let ds = (spec.s_max - spec.s_min) / (spec.n_s - 1) as f64;
    let dtheta = TAU / spec.n_theta as f64;
    let dz = geom.length / (spec.n_z + 1) as f64;
    let s: Vec<f64> = (0..spec.n_s).map(|i| spec.s_min + i as f64 * ds).collect();
    let theta: Vec<f64> = (0..spec.n_theta).map(|j| theta0 + j as f64 * dtheta).collect();
    let z: Vec<f64> = (0..spec.n_z).map(|k| (k + 1) as f64 * dz).collect();
    let trap = |i: usize, n: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };

    let n = spec.n_s * spec.n_theta * spec.n_z;
    let mut points = Vec::with_capacity(3 * n);
    let mut h_theta = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (i, &si) in s.iter().enumerate() {
        for &tj in &theta {
            let r = geom.r_of(si, tj);
            let h = geom.h_theta(si, tj);
            let jac = r * geom.gap(tj);
            for (k, &zk) in z.iter().enumerate() {
                points.extend_from_slice(&[r, tj, zk]);
                h_theta.push(h);
                weights.push(trap(i, spec.n_s) * trap(k, spec.n_z) * jac * ds * dtheta * dz);
            }
        }
    }
    let dr = theta.iter().map(|&t| ds * geom.gap(t)).collect();
    Ok(ShellBank {
        spec: *spec,
        geom: *geom,
        theta0,
        s,
        theta,
        z,
        ds,
        dtheta,
        dz,
        points,
        h_theta,
        dr,
        weights,
    })
}

impl ShellBank {
    pub fn n_nodes(&self) -> usize {
        self.spec.n_s * self.spec.n_theta * self.spec.n_z
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.spec.n_theta + j) * self.spec.n_z + k
    }

    /// Physical radial thickness `(s_max - s_min) (r_o(theta) - r_min)`.
    pub fn thickness(&self, theta: f64) -> f64 {
        (self.spec.s_max - self.spec.s_min) * self.geom.gap(theta)
    }

    /// Weighted mean of `(D_r R)^2 + (D_theta R / h_theta)^2 + (D_z R)^2` over
    /// nodes off the `s` and `z` edge lines; with `scale`, also returns
    /// `scale * d loss / d R`.
    pub fn loss_from_residuals(&self, r: &[f64], scale: Option<f64>) -> Result<(f64, Option<Vec<f64>>)> {
        if r.len() != self.n_nodes() {
            return Err(Error::Dimension {
                expected: self.n_nodes(),
                got: r.len(),
            });
        }
        let (ns, nt, nz) = (self.spec.n_s, self.spec.n_theta, self.spec.n_z);
        let wsum: f64 = (1..ns - 1)
            .flat_map(|i| (0..nt).flat_map(move |j| (1..nz - 1).map(move |k| (i, j, k))))
            .map(|(i, j, k)| self.weights[self.index(i, j, k)])
            .sum();
        let mut bar = scale.map(|_| vec![0.0; r.len()]);
        let mut total = 0.0;
        for i in 1..ns - 1 {
            for j in 0..nt {
                let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
                let ar = 1.0 / (2.0 * self.dr[j]);
                for k in 1..nz - 1 {
                    let c = self.index(i, j, k);
                    let at = 1.0 / (2.0 * self.dtheta * self.h_theta[c]);
                    let az = 1.0 / (2.0 * self.dz);
                    let (sp, sm) = (self.index(i + 1, j, k), self.index(i - 1, j, k));
                    let (tp, tm) = (self.index(i, jp, k), self.index(i, jm, k));
                    let (zp, zm) = (c + 1, c - 1);
                    let dr = (r[sp] - r[sm]) * ar;
                    let dt = (r[tp] - r[tm]) * at;
                    let dzv = (r[zp] - r[zm]) * az;
                    let w = self.weights[c] / wsum;
                    total += w * (dr * dr + dt * dt + dzv * dzv);
                    if let (Some(bar), Some(s)) = (bar.as_mut(), scale) {
                        let g = 2.0 * s * w;
                        bar[sp] += g * dr * ar;
                        bar[sm] -= g * dr * ar;
                        bar[tp] += g * dt * at;
                        bar[tm] -= g * dt * at;
                        bar[zp] += g * dzv * az;
                        bar[zm] -= g * dzv * az;
                    }
                }
            }
        }
        Ok((total, bar))
    }
}

/// Unweighted shell penalty of `field` (the shell probe).
pub fn shell_resgrad_loss(field: &impl Field, bank: &ShellBank) -> Result<f64> {
    let r = cylindrical_residuals(field, &bank.points)?;
    Ok(bank.loss_from_residuals(&r, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn metric_and_thickness() {
        let g = AnnulusGeometry::default();
        let bank = build_shell_bank(&g, &ShellSpec::default(), 0.0).unwrap();
        assert!((g.h_theta(0.8, PI / 6.0) - g.r_of(0.8, PI / 6.0)).abs() < 1e-15);
        assert!((g.h_theta(0.0, 0.7) - g.r_min).abs() < 1e-15);
        assert!((bank.thickness(PI / 6.0) - 0.2415).abs() < 1e-12);
        assert!((bank.thickness(PI / 2.0) - 0.1265).abs() < 1e-12);
        for (c, x) in bank.points.chunks(3).enumerate() {
            assert!(x[0] > g.r_min && x[0] < g.outer_radius(x[1]));
            let s = g.s_of(x[0], x[1]);
            let want = (x[0].powi(2) + (s * g.outer_radius_d(x[1])).powi(2)).sqrt();
            assert!((bank.h_theta[c] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_small_banks() {
        let g = AnnulusGeometry::default();
        let spec = ShellSpec { n_s: 2, ..ShellSpec::default() };
        assert!(build_shell_bank(&g, &spec, 0.0).is_err());
        let spec = ShellSpec { s_min: 0.9, s_max: 0.8, ..ShellSpec::default() };
        assert!(build_shell_bank(&g, &spec, 0.0).is_err());
    }

    #[test]
    fn linear_in_z_gives_one() {
        let bank = build_shell_bank(&AnnulusGeometry::default(), &ShellSpec::default(), 0.0).unwrap();
        let r: Vec<f64> = bank.points.chunks(3).map(|x| x[2]).collect();
        let (l, _) = bank.loss_from_residuals(&r, None).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjoint_matches_fd() {
        let spec = ShellSpec { n_s: 4, n_theta: 5, n_z: 4, ..ShellSpec::default() };
        let bank = build_shell_bank(&AnnulusGeometry::default(), &spec, 0.0).unwrap();
        let r: Vec<f64> = (0..bank.n_nodes()).map(|k| ((k * 13 % 17) as f64 * 0.3).sin()).collect();
        let (_, bar) = bank.loss_from_residuals(&r, Some(0.7)).unwrap();
        let bar = bar.unwrap();
        for k in 0..r.len() {
            let mut p = r.clone();
            let mut m = r.clone();
            p[k] += 1e-6;
            m[k] -= 1e-6;
            let d = 0.7
                * (bank.loss_from_residuals(&p, None).unwrap().0 - bank.loss_from_residuals(&m, None).unwrap().0)
                / 2e-6;
            assert!((d - bar[k]).abs() < 1e-6 * (1.0 + d.abs()), "{k}: {d} {}", bar[k]);
        }
    }
}
