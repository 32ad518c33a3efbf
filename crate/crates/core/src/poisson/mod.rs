//! Manufactured Poisson problem on the unit square.
//!
//! `u*(x, y) = sin(pi x) sin(pi y) + 0.2 sin(3 pi x) sin(2 pi y)`, forcing
//! `f = Laplacian(u*)`, residual `R = u_xx + u_yy - f`, Dirichlet data `u = u*`.

mod bank;
mod train;

use std::f64::consts::{FRAC_PI_2, PI};

use crate::diffnet::{AnalyticField, Field, JetLayout, Jets, Partial};
use crate::error::{Error, Result};
use crate::sampling;

pub use bank::{
    ad_resgrad_loss, build_aux_bank, fd_resgrad_adjoint, fd_resgrad_loss, AuxBank, AuxStrategy,
};
pub use train::{audit_stage1, train_stage1, Stage1Audit, Stage1Problem, Stage1Run};

/// `d^n/dx^n sin(a x)`.
#[inline]
fn sin_d(a: f64, x: f64, n: usize) -> f64 {
    a.powi(n as i32) * (a * x + n as f64 * FRAC_PI_2).sin()
}

pub fn exact_solution(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin() + 0.2 * (3.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

/// Any partial derivative of `u*` up to third order.
pub fn exact_partial(x: f64, y: f64, p: Partial) -> f64 {
    let (nx, ny) = (p.count(0), p.count(1));
    sin_d(PI, x, nx) * sin_d(PI, y, ny) + 0.2 * sin_d(3.0 * PI, x, nx) * sin_d(2.0 * PI, y, ny)
}

/// `u*` as an oracle field.
pub fn exact_field() -> AnalyticField<impl Fn(&[f64], Partial) -> f64> {
    AnalyticField::new(2, |x, p| exact_partial(x[0], x[1], p))
}

pub fn forcing(x: f64, y: f64) -> f64 {
    let pi2 = PI * PI;
    -2.0 * pi2 * (PI * x).sin() * (PI * y).sin() - 2.6 * pi2 * (3.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

pub fn forcing_grad(x: f64, y: f64) -> [f64; 2] {
    let pi3 = PI * PI * PI;
    [
        -2.0 * pi3 * (PI * x).cos() * (PI * y).sin()
            - 7.8 * pi3 * (3.0 * PI * x).cos() * (2.0 * PI * y).sin(),
        -2.0 * pi3 * (PI * x).sin() * (PI * y).cos()
            - 5.2 * pi3 * (3.0 * PI * x).sin() * (2.0 * PI * y).cos(),
    ]
}

/// Layout carrying the value, gradient and both pure second derivatives.
pub fn residual_layout() -> JetLayout {
    JetLayout::pure_second(2, &[0, 1]).expect("valid layout")
}

/// Residuals at `points` from jets evaluated with a layout containing `u_xx`, `u_yy`.
pub fn residuals_from_jets(jets: &Jets, layout: &JetLayout, points: &[f64]) -> Vec<f64> {
    let (cxx, cyy) = (layout.expect(Partial::dd(0, 0)), layout.expect(Partial::dd(1, 1)));
    points
        .chunks(2)
        .enumerate()
        .map(|(p, x)| jets.get(p, cxx) + jets.get(p, cyy) - forcing(x[0], x[1]))
        .collect()
}

/// Gradients of the residual, `(R_x, R_y)` per point, from jets evaluated with
/// [`JetLayout::laplacian_gradient`].
pub fn residual_gradients_from_jets(jets: &Jets, layout: &JetLayout, points: &[f64]) -> Vec<[f64; 2]> {
    let c = |a, b, d| layout.expect(Partial::ddd(a, b, d));
    let (xxx, xyy, xxy, yyy) = (c(0, 0, 0), c(0, 1, 1), c(0, 0, 1), c(1, 1, 1));
    points
        .chunks(2)
        .enumerate()
        .map(|(p, x)| {
            let fg = forcing_grad(x[0], x[1]);
            [
                jets.get(p, xxx) + jets.get(p, xyy) - fg[0],
                jets.get(p, xxy) + jets.get(p, yyy) - fg[1],
            ]
        })
        .collect()
}

pub fn residuals(field: &impl Field, points: &[f64]) -> Result<Vec<f64>> {
    let layout = residual_layout();
    let jets = field.jets(points, &layout)?;
    Ok(residuals_from_jets(&jets, &layout, points))
}

pub fn residual(field: &impl Field, x: f64, y: f64) -> Result<f64> {
    Ok(residuals(field, &[x, y])?[0])
}

/// Interior collocation points in `(0,1)^2` and boundary points on the square's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Cloud {
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl Stage1Cloud {
    pub fn sample(n_interior: usize, n_boundary: usize, seed: u64, stream: u64) -> Self {
        let mut rng = sampling::rng(seed, stream);
        let interior = sampling::uniform_box(&mut rng, n_interior, &[(0.0, 1.0), (0.0, 1.0)]);
        let mut boundary = Vec::with_capacity(2 * n_boundary);
        for t in sampling::uniform_box(&mut rng, n_boundary, &[(0.0, 4.0)]) {
            let s = t.fract();
            let (x, y) = match t as usize {
                0 => (s, 0.0),
                1 => (1.0, s),
                2 => (1.0 - s, 1.0),
                _ => (0.0, 1.0 - s),
            };
            boundary.push(x);
            boundary.push(y);
        }
        Stage1Cloud { interior, boundary }
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len() / 2
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len() / 2
    }
}

/// `(L_PDE, L_BC)`: mean-square residual over the interior points and mean-square
/// Dirichlet mismatch over the boundary points.
pub fn base_losses(field: &impl Field, cloud: &Stage1Cloud) -> Result<(f64, f64)> {
    if cloud.n_interior() == 0 || cloud.n_boundary() == 0 {
        return Err(Error::invalid("empty Stage-1 cloud"));
    }
    let r = residuals(field, &cloud.interior)?;
    let pde = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
    let u = field.jets(&cloud.boundary, &JetLayout::value(2))?;
    let bc = cloud
        .boundary
        .chunks(2)
        .enumerate()
        .map(|(p, x)| (u.get(p, 0) - exact_solution(x[0], x[1])).powi(2))
        .sum::<f64>()
        / cloud.n_boundary() as f64;
    Ok((pde, bc))
}

/// `lambda_AD = lambda_FD * S_FD / S_AD`.
pub fn match_ad_weight(lambda_fd: f64, s_fd: f64, s_ad: f64) -> Result<f64> {
    if !(s_ad > 0.0) {
        return Err(Error::invalid(format!("AD scale must be positive, got {s_ad}")));
    }
    Ok(lambda_fd * s_fd / s_ad)
}
