//! Dense outer-wall audits.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::problem::{normal_coeffs, wall_points, R, THETA};
use super::{AnnulusGeometry, FluxProfile};
use crate::diffnet::{Field, JetLayout, Partial};
use crate::error::{Error, Result};
use crate::fdref::WallSlice;

/// `T` and `dT/dn` at outer-wall points given as `(theta, z)`.
pub fn wall_values(field: &impl Field, geom: &AnnulusGeometry, theta_z: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let pts = wall_points(geom, theta_z);
    let layout = JetLayout::gradient(3);
    let jets = field.jets(&pts, &layout)?;
    let (cr, ct) = (layout.expect(Partial::d(R)), layout.expect(Partial::d(THETA)));
    let t = (0..theta_z.len()).map(|p| jets.get(p, 0)).collect();
    let dn = theta_z
        .iter()
        .enumerate()
        .map(|(p, &(th, _))| {
            let (a, b) = normal_coeffs(geom, th);
            a * jets.get(p, cr) + b * jets.get(p, ct)
        })
        .collect();
    Ok((t, dn))
}

/// Dense wall grid: `theta_j = 2 pi j / n_theta`, `z_k = k L / (n_z - 1)`, in `(j, k)` row-major order.
pub fn dense_wall_grid(geom: &AnnulusGeometry, n_theta: usize, n_z: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_theta * n_z);
    for j in 0..n_theta {
        for k in 0..n_z {
            out.push((TAU * j as f64 / n_theta as f64, geom.length * k as f64 / (n_z - 1) as f64));
        }
    }
    out
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n as f64).sqrt()
}

/// RMS of `dT/dn - q(z)` over the dense wall grid.
pub fn wall_bc_audit(
    field: &impl Field,
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    n_theta: usize,
    n_z: usize,
) -> Result<f64> {
    if n_theta == 0 || n_z < 2 {
        return Err(Error::invalid("wall audit grid needs n_theta >= 1 and n_z >= 2"));
    }
    let grid = dense_wall_grid(geom, n_theta, n_z);
    let (_, dn) = wall_values(field, geom, &grid)?;
    Ok(rms(grid.iter().zip(&dn).map(|(&(_, z), d)| d - flux.q(z, geom.length))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallComparison {
    pub t_wall_rmse: f64,
    pub dtdn_rmse: f64,
    /// RMS difference of the wall BC residuals `dT/dn - q`; the flux cancels, so
    /// this equals `dtdn_rmse` up to rounding.
    pub bc_residual_rmse: f64,
}

/// Compares the field's wall temperature and normal flux with a reference slice.
pub fn wall_reference_compare(
    field: &impl Field,
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    slice: &WallSlice,
) -> Result<WallComparison> {
    slice.check_shape()?;
    if slice.geometry_hash != geom.hash() {
        return Err(Error::invalid("wall slice was computed for a different geometry"));
    }
    let grid: Vec<(f64, f64)> = slice
        .theta
        .iter()
        .flat_map(|&t| slice.z.iter().map(move |&z| (t, z)))
        .collect();
    let (t, dn) = wall_values(field, geom, &grid)?;
    let q: Vec<f64> = grid.iter().map(|&(_, z)| flux.q(z, geom.length)).collect();
    Ok(WallComparison {
        t_wall_rmse: rms(t.iter().zip(&slice.t_wall).map(|(a, b)| a - b)),
        dtdn_rmse: rms(dn.iter().zip(&slice.dtdn).map(|(a, b)| a - b)),
        bc_residual_rmse: rms(
            dn.iter()
                .zip(&slice.dtdn)
                .zip(&q)
                .map(|((a, b), q)| (a - q) - (b - q)),
        ),
    })
}
