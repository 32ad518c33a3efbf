//! Body-fitted finite-difference discretization of the wavy-annulus problem.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::linalg::{bicgstab, CsrBuilder, SolveReport};
use super::slice::WallSlice;
use crate::annulus::{AnnulusGeometry, FluxProfile};
use crate::error::{Error, Result};

/// Grid counts in `(s, theta, z)`. `s_i = i / (n_s - 1)`, `theta_j = 2 pi j / n_theta`
/// (periodic), `z_k = k L / (n_z - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdGrid {
    pub n_s: usize,
    pub n_theta: usize,
    pub n_z: usize,
}

impl FdGrid {
    pub const MIN: FdGrid = FdGrid { n_s: 5, n_theta: 8, n_z: 5 };

    pub fn new(n_s: usize, n_theta: usize, n_z: usize) -> Self {
        FdGrid { n_s, n_theta, n_z }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s < Self::MIN.n_s || self.n_theta < Self::MIN.n_theta || self.n_z < Self::MIN.n_z {
            return Err(Error::invalid(format!(
                "grid ({}, {}, {}) is below the minimum ({}, {}, {})",
                self.n_s,
                self.n_theta,
                self.n_z,
                Self::MIN.n_s,
                Self::MIN.n_theta,
                Self::MIN.n_z
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unknown ordering: `s` fastest, then `theta`, then `z`.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n_s * (j + self.n_theta * k)
    }

    pub fn ds(&self) -> f64 {
        1.0 / (self.n_s - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn dz(&self, length: f64) -> f64 {
        length / (self.n_z - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn z(&self, k: usize, length: f64) -> f64 {
        k as f64 * self.dz(length)
    }
}

/// Inlet temperature at `z = 0` as a function of `(r, theta)`.
#[derive(Clone, Copy)]
pub enum Inlet {
    Uniform(f64),
    Profile(fn(f64, f64) -> f64),
}

impl Inlet {
    fn value(&self, r: f64, theta: f64) -> f64 {
        match self {
            Inlet::Uniform(v) => *v,
            Inlet::Profile(f) => f(r, theta),
        }
    }
}

impl std::fmt::Debug for Inlet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Inlet::Uniform(v) => write!(f, "Uniform({v})"),
            Inlet::Profile(_) => write!(f, "Profile(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 20_000 }
    }
}

/// A converged finite-difference solution.
#[derive(Debug, Clone)]
pub struct FdField {
    pub grid: FdGrid,
    pub geom: AnnulusGeometry,
    pub flux: FluxProfile,
    /// Nodal temperatures in [`FdGrid::index`] order.
    pub values: Vec<f64>,
    pub report: SolveReport,
}

/// Geometry terms at angle `theta`: `G`, `G'`, `G''` with `G = r_o - r_min`.
fn gap_terms(geom: &AnnulusGeometry, theta: f64) -> (f64, f64, f64) {
    (geom.gap(theta), geom.outer_radius_d(theta), geom.outer_radius_dd(theta))
}

/// Coefficients `(a_T, a_theta, norm)` of the outer-wall normal derivative
/// `dT/dn = (a_T T_s + a_theta T_theta) / norm` at angle `theta`.
fn wall_coeffs(geom: &AnnulusGeometry, theta: f64) -> (f64, f64, f64) {
    let (g, gp, _) = gap_terms(geom, theta);
    let ro = geom.outer_radius(theta);
    let a_s = (1.0 + gp * gp / (ro * ro)) / g;
    let a_t = -gp / (ro * ro);
    (a_s, a_t, (1.0 + (gp / ro).powi(2)).sqrt())
}

/// Assembles and solves the discrete system.
pub fn solve_reference(
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    grid: FdGrid,
    inlet: Inlet,
    opts: SolverOptions,
) -> Result<FdField> {
    geom.validate()?;
    flux.validate()?;
    grid.validate()?;
    let (ns, nt, nz) = (grid.n_s, grid.n_theta, grid.n_z);
    let (ds, dth, dz) = (grid.ds(), grid.dtheta(), grid.dz(geom.length));
    let n = grid.len();
    let mut a = CsrBuilder::with_capacity(n, 11 * n);
    let mut b = vec![0.0; n];
    let id = |i, j, k| grid.index(i, j, k);

    for k in 0..nz {
        let z = grid.z(k, geom.length);
        for j in 0..nt {
            let th = grid.theta(j);
            let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
            let (g, gp, gpp) = gap_terms(geom, th);
            for i in 0..ns {
                let row = id(i, j, k);
                let s = grid.s(i);
                let r = geom.r_min + s * g;
                if i == 0 {
                    a.add(row, 1.0);
                    b[row] = 1.0;
                } else if k == 0 {
                    a.add(row, 1.0);
                    b[row] = inlet.value(r, th);
                } else if i == ns - 1 {
                    let (c_s, c_t, nrm) = wall_coeffs(geom, th);
                    let fs = c_s / (2.0 * ds);
                    a.add(row, 3.0 * fs);
                    a.add(id(i - 1, j, k), -4.0 * fs);
                    a.add(id(i - 2, j, k), fs);
                    let ft = c_t / (2.0 * dth);
                    a.add(id(i, jp, k), ft);
                    a.add(id(i, jm, k), -ft);
                    b[row] = flux.q(z, geom.length) * nrm;
                } else if k == nz - 1 {
                    let f = 1.0 / (2.0 * dz);
                    a.add(row, 3.0 * f);
                    a.add(id(i, j, k - 1), -4.0 * f);
                    a.add(id(i, j, k - 2), f);
                } else {
                    let am = s * gp / g;
                    let da = s * (gpp * g - 2.0 * gp * gp) / (g * g);
                    let r2 = r * r;
                    let c_ss = 1.0 / (g * g) + am * am / r2;
                    let c_st = -2.0 * am / r2;
                    let c_tt = 1.0 / r2;
                    let c_s = 1.0 / (r * g) - da / r2;
                    let (ss, tt, zz) = (c_ss / (ds * ds), c_tt / (dth * dth), 1.0 / (dz * dz));
                    let sd = c_s / (2.0 * ds);
                    let st = c_st / (4.0 * ds * dth);
                    a.add(row, -2.0 * (ss + tt + zz));
                    a.add(id(i + 1, j, k), ss + sd);
                    a.add(id(i - 1, j, k), ss - sd);
                    a.add(id(i, jp, k), tt);
                    a.add(id(i, jm, k), tt);
                    a.add(id(i, j, k + 1), zz);
                    a.add(id(i, j, k - 1), zz);
                    a.add(id(i + 1, jp, k), st);
                    a.add(id(i - 1, jm, k), st);
                    a.add(id(i + 1, jm, k), -st);
                    a.add(id(i - 1, jp, k), -st);
                }
                a.finish_row();
            }
        }
    }
    let (values, report) = bicgstab(&a.build(), &b, opts.tol, opts.max_iter)?;
    if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite("reference solution", Some(idx)));
    }
    Ok(FdField {
        grid,
        geom: *geom,
        flux: *flux,
        values,
        report,
    })
}

impl FdField {
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Physical coordinates `(r, theta, z)` of node `(i, j, k)`.
    pub fn node(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        let th = self.grid.theta(j);
        (
            self.geom.r_of(self.grid.s(i), th),
            th,
            self.grid.z(k, self.geom.length),
        )
    }

    /// Wall temperature and the discrete normal derivative at wall node `(j, k)`,
    /// using the same one-sided and central stencils as the boundary rows.
    pub fn wall_values(&self, j: usize, k: usize) -> (f64, f64) {
        let g = &self.grid;
        let i = g.n_s - 1;
        let nt = g.n_theta;
        let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
        let (c_s, c_t, nrm) = wall_coeffs(&self.geom, g.theta(j));
        let t_s = (3.0 * self.at(i, j, k) - 4.0 * self.at(i - 1, j, k) + self.at(i - 2, j, k)) / (2.0 * g.ds());
        let t_t = (self.at(i, jp, k) - self.at(i, jm, k)) / (2.0 * g.dtheta());
        (self.at(i, j, k), (c_s * t_s + c_t * t_t) / nrm)
    }

    pub fn wall_slice(&self) -> WallSlice {
        let g = &self.grid;
        let mut t_wall = Vec::with_capacity(g.n_theta * g.n_z);
        let mut dtdn = Vec::with_capacity(g.n_theta * g.n_z);
        for j in 0..g.n_theta {
            for k in 0..g.n_z {
                let (t, d) = self.wall_values(j, k);
                t_wall.push(t);
                dtdn.push(d);
            }
        }
        WallSlice {
            n_theta: g.n_theta,
            n_z: g.n_z,
            geometry_hash: self.geom.hash(),
            flux: self.flux,
            theta: (0..g.n_theta).map(|j| g.theta(j)).collect(),
            z: (0..g.n_z).map(|k| g.z(k, self.geom.length)).collect(),
            t_wall,
            dtdn,
        }
    }
}
