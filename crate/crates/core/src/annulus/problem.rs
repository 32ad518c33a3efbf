//! Steady conduction in the wavy annulus: residual, wall-normal derivative,
//! collocation clouds and the six-term objective.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{AnnulusGeometry, FluxProfile};
use crate::diffnet::{Field, InputMap, JetLayout, Jets, Partial};
use crate::error::{Error, Result};
use crate::sampling;
use rand::Rng;

/// Inputs are `(r, theta, z)`.
pub const R: usize = 0;
pub const THETA: usize = 1;
pub const Z: usize = 2;

pub fn residual_layout() -> JetLayout {
    JetLayout::pure_second(3, &[R, THETA, Z]).expect("valid layout")
}

/// Maps the domain's bounding box onto `[-1, 1]^3`.
pub fn input_map(geom: &AnnulusGeometry) -> InputMap {
    InputMap::from_bounds(&geom.input_bounds()).expect("non-degenerate bounds")
}

/// Chain-rule coefficients of the residual with respect to `(T_r, T_rr, T_tt, T_zz)` at radius `r`.
#[inline]
fn residual_coeffs(r: f64) -> [f64; 4] {
    [1.0 / r, 1.0, 1.0 / (r * r), 1.0]
}

struct ResidualComps {
    r: usize,
    rr: usize,
    tt: usize,
    zz: usize,
}

impl ResidualComps {
    fn new(layout: &JetLayout) -> Self {
        ResidualComps {
            r: layout.expect(Partial::d(R)),
            rr: layout.expect(Partial::dd(R, R)),
            tt: layout.expect(Partial::dd(THETA, THETA)),
            zz: layout.expect(Partial::dd(Z, Z)),
        }
    }
}

/// `T_rr + T_r / r + T_tt / r^2 + T_zz` per point.
pub fn residuals_from_jets(jets: &Jets, layout: &JetLayout, points: &[f64]) -> Vec<f64> {
    let c = ResidualComps::new(layout);
    points
        .chunks(3)
        .enumerate()
        .map(|(p, x)| {
            let k = residual_coeffs(x[R]);
            let j = jets.point(p);
            k[0] * j[c.r] + k[1] * j[c.rr] + k[2] * j[c.tt] + k[3] * j[c.zz]
        })
        .collect()
}

/// Writes `bar[p] * dR_p/d(jet)` into `seeds`.
pub(crate) fn residual_seeds(bar: &[f64], layout: &JetLayout, points: &[f64], seeds: &mut [f64]) {
    let c = ResidualComps::new(layout);
    let w = layout.width();
    for (p, (x, b)) in points.chunks(3).zip(bar).enumerate() {
        let k = residual_coeffs(x[R]);
        seeds[p * w + c.r] += b * k[0];
        seeds[p * w + c.rr] += b * k[1];
        seeds[p * w + c.tt] += b * k[2];
        seeds[p * w + c.zz] += b * k[3];
    }
}

fn check_radii(points: &[f64]) -> Result<()> {
    match points.chunks(3).position(|x| !(x[R] > 0.0)) {
        Some(p) => Err(Error::invalid(format!("non-positive radius at point {p}"))),
        None => Ok(()),
    }
}

pub fn cylindrical_residuals(field: &impl Field, points: &[f64]) -> Result<Vec<f64>> {
    check_radii(points)?;
    let layout = residual_layout();
    let jets = field.jets(points, &layout)?;
    Ok(residuals_from_jets(&jets, &layout, points))
}

pub fn cylindrical_residual(field: &impl Field, r: f64, theta: f64, z: f64) -> Result<f64> {
    Ok(cylindrical_residuals(field, &[r, theta, z])?[0])
}

/// Components of the unit outward normal applied to `(T_r, T_theta)` at the outer wall.
#[inline]
pub fn normal_coeffs(geom: &AnnulusGeometry, theta: f64) -> (f64, f64) {
    let r = geom.outer_radius(theta);
    let d = geom.outer_radius_d(theta);
    let norm = (1.0 + (d / r).powi(2)).sqrt();
    (1.0 / norm, -d / (r * r) / norm)
}

/// Outer-wall points `(r_o(theta), theta, z)` for `(theta, z)` pairs.
pub fn wall_points(geom: &AnnulusGeometry, theta_z: &[(f64, f64)]) -> Vec<f64> {
    theta_z
        .iter()
        .flat_map(|&(t, z)| [geom.outer_radius(t), t, z])
        .collect()
}

/// `dT/dn` at the outer wall for each `(theta, z)`.
pub fn wall_normal_derivatives(field: &impl Field, geom: &AnnulusGeometry, theta_z: &[(f64, f64)]) -> Result<Vec<f64>> {
    let pts = wall_points(geom, theta_z);
    let layout = JetLayout::gradient(3);
    let jets = field.jets(&pts, &layout)?;
    let (cr, ct) = (layout.expect(Partial::d(R)), layout.expect(Partial::d(THETA)));
    Ok(theta_z
        .iter()
        .enumerate()
        .map(|(p, &(t, _))| {
            let (a, b) = normal_coeffs(geom, t);
            a * jets.get(p, cr) + b * jets.get(p, ct)
        })
        .collect())
}

pub fn wall_normal_derivative(field: &impl Field, geom: &AnnulusGeometry, theta: f64, z: f64) -> Result<f64> {
    Ok(wall_normal_derivatives(field, geom, &[(theta, z)])?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermWeights {
    pub pde: f64,
    pub inner: f64,
    pub inlet: f64,
    pub outlet: f64,
    pub outer: f64,
    pub periodic: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        TermWeights {
            pde: 1.0,
            inner: 1.0,
            inlet: 1.0,
            outlet: 1.0,
            outer: 1.0,
            periodic: 1.0,
        }
    }
}

/// Unweighted mean-square value of each term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermBreakdown {
    pub pde: f64,
    pub inner: f64,
    pub inlet: f64,
    pub outlet: f64,
    pub outer: f64,
    pub periodic: f64,
}

impl TermBreakdown {
    pub fn weighted_total(&self, w: &TermWeights) -> f64 {
        w.pde * self.pde
            + w.inner * self.inner
            + w.inlet * self.inlet
            + w.outlet * self.outlet
            + w.outer * self.outer
            + w.periodic * self.periodic
    }
}

/// Collocation points, `(r, theta, z)` triples. Periodic pairs share `(r, z)` and
/// sit at `theta = 0` and `theta = 2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Cloud {
    pub interior: Vec<f64>,
    pub inner: Vec<f64>,
    pub inlet: Vec<f64>,
    pub outlet: Vec<f64>,
    pub outer: Vec<f64>,
    pub pairs_a: Vec<f64>,
    pub pairs_b: Vec<f64>,
}

impl Stage2Cloud {
    /// Samples uniformly in `(s, theta, z)` and maps to physical coordinates.
    pub fn sample(
        geom: &AnnulusGeometry,
        n_interior: usize,
        n_boundary: usize,
        n_pairs: usize,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = sampling::rng(seed, stream);
        let l = geom.length;
        let mut group = |n: usize, fixed_s: Option<f64>, fixed_z: Option<f64>| {
            let mut out = Vec::with_capacity(3 * n);
            for _ in 0..n {
                let s = fixed_s.unwrap_or_else(|| rng.gen::<f64>());
                let t = TAU * rng.gen::<f64>();
                let z = fixed_z.unwrap_or_else(|| l * rng.gen::<f64>());
                out.extend_from_slice(&[geom.r_of(s, t), t, z]);
            }
            out
        };
        let interior = group(n_interior, None, None);
        let inner = group(n_boundary, Some(0.0), None);
        let inlet = group(n_boundary, None, Some(0.0));
        let outlet = group(n_boundary, None, Some(l));
        let outer = group(n_boundary, Some(1.0), None);
        let mut pairs_a = Vec::with_capacity(3 * n_pairs);
        let mut pairs_b = Vec::with_capacity(3 * n_pairs);
        for _ in 0..n_pairs {
            let s: f64 = rng.gen();
            let z = l * rng.gen::<f64>();
            let r = geom.r_of(s, 0.0);
            pairs_a.extend_from_slice(&[r, 0.0, z]);
            pairs_b.extend_from_slice(&[r, TAU, z]);
        }
        Stage2Cloud {
            interior,
            inner,
            inlet,
            outlet,
            outer,
            pairs_a,
            pairs_b,
        }
    }

    fn check(&self) -> Result<()> {
        let groups = [
            ("interior", &self.interior),
            ("inner", &self.inner),
            ("inlet", &self.inlet),
            ("outlet", &self.outlet),
            ("outer", &self.outer),
            ("periodic", &self.pairs_a),
        ];
        for (name, g) in groups {
            if g.is_empty() {
                return Err(Error::invalid(format!("empty `{name}` cloud group")));
            }
        }
        if self.pairs_a.len() != self.pairs_b.len() {
            return Err(Error::invalid("unpaired periodic points"));
        }
        Ok(())
    }
}

/// Evaluation backend for the six-term objective: plain jets for any field, or
/// taped jets whose adjoints are pushed into a parameter gradient.
pub(crate) trait JetSource {
    fn eval(&mut self, points: &[f64], layout: &JetLayout, seeds_for: &mut dyn FnMut(&Jets) -> Vec<f64>) -> Result<()>;
}

pub(crate) struct PlainSource<'a, F: Field>(pub &'a F);

impl<F: Field> JetSource for PlainSource<'_, F> {
    fn eval(&mut self, points: &[f64], layout: &JetLayout, seeds_for: &mut dyn FnMut(&Jets) -> Vec<f64>) -> Result<()> {
        let jets = self.0.jets(points, layout)?;
        seeds_for(&jets);
        Ok(())
    }
}

/// Evaluates all six terms through `src`, pushing `weight * d(term)/d(jets)` as seeds.
pub(crate) fn six_terms(
    src: &mut dyn JetSource,
    cloud: &Stage2Cloud,
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    w: &TermWeights,
) -> Result<TermBreakdown> {
    cloud.check()?;
    check_radii(&cloud.interior)?;
    let mut out = TermBreakdown::default();

    let layout = residual_layout();
    src.eval(&cloud.interior, &layout, &mut |jets| {
        let r = residuals_from_jets(jets, &layout, &cloud.interior);
        let n = r.len() as f64;
        out.pde = r.iter().map(|v| v * v).sum::<f64>() / n;
        let bar: Vec<f64> = r.iter().map(|v| w.pde * 2.0 * v / n).collect();
        let mut seeds = vec![0.0; jets.as_slice().len()];
        residual_seeds(&bar, &layout, &cloud.interior, &mut seeds);
        seeds
    })?;

    let value = JetLayout::value(3);
    for (pts, weight, slot) in [(&cloud.inner, w.inner, &mut out.inner), (&cloud.inlet, w.inlet, &mut out.inlet)] {
        src.eval(pts, &value, &mut |jets| {
            let n = jets.n_points() as f64;
            let d: Vec<f64> = jets.as_slice().iter().map(|t| t - 1.0).collect();
            *slot = d.iter().map(|v| v * v).sum::<f64>() / n;
            d.iter().map(|v| weight * 2.0 * v / n).collect()
        })?;
    }

    let grad = JetLayout::gradient(3);
    let (cr, ct, cz) = (
        grad.expect(Partial::d(R)),
        grad.expect(Partial::d(THETA)),
        grad.expect(Partial::d(Z)),
    );
    src.eval(&cloud.outlet, &grad, &mut |jets| {
        let n = jets.n_points() as f64;
        let mut seeds = vec![0.0; jets.as_slice().len()];
        let mut sum = 0.0;
        for p in 0..jets.n_points() {
            let tz = jets.get(p, cz);
            sum += tz * tz;
            seeds[p * grad.width() + cz] = w.outlet * 2.0 * tz / n;
        }
        out.outlet = sum / n;
        seeds
    })?;

    src.eval(&cloud.outer, &grad, &mut |jets| {
        let n = jets.n_points() as f64;
        let mut seeds = vec![0.0; jets.as_slice().len()];
        let mut sum = 0.0;
        for (p, x) in cloud.outer.chunks(3).enumerate() {
            let (a, b) = normal_coeffs(geom, x[THETA]);
            let d = a * jets.get(p, cr) + b * jets.get(p, ct) - flux.q(x[Z], geom.length);
            sum += d * d;
            let g = w.outer * 2.0 * d / n;
            seeds[p * grad.width() + cr] = g * a;
            seeds[p * grad.width() + ct] = g * b;
        }
        out.outer = sum / n;
        seeds
    })?;

    let both: Vec<f64> = cloud.pairs_a.iter().chain(&cloud.pairs_b).copied().collect();
    let m = cloud.pairs_a.len() / 3;
    src.eval(&both, &value, &mut |jets| {
        let n = m as f64;
        let mut seeds = vec![0.0; 2 * m];
        let mut sum = 0.0;
        for p in 0..m {
            let d = jets.get(p, 0) - jets.get(m + p, 0);
            sum += d * d;
            seeds[p] = w.periodic * 2.0 * d / n;
            seeds[m + p] = -w.periodic * 2.0 * d / n;
        }
        out.periodic = sum / n;
        seeds
    })?;

    Ok(out)
}

/// Weighted six-term objective and its unweighted per-term values.
pub fn six_term_loss(
    field: &impl Field,
    cloud: &Stage2Cloud,
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    weights: &TermWeights,
) -> Result<(f64, TermBreakdown)> {
    let b = six_terms(&mut PlainSource(field), cloud, geom, flux, weights)?;
    Ok((b.weighted_total(weights), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{constant_field, AnalyticField};
    use std::f64::consts::PI;

    #[test]
    fn harmonic_oracles() {
        let ln_r = AnalyticField::new(3, |x, p| match (p.order(), p.count(R)) {
            (0, _) => x[0].ln(),
            (1, 1) => 1.0 / x[0],
            (2, 2) => -1.0 / (x[0] * x[0]),
            _ => 0.0,
        });
        assert!(cylindrical_residual(&ln_r, 0.7, 1.0, 2.0).unwrap().abs() < 1e-12);
        let r2 = AnalyticField::new(3, |x, p| match (p.order(), p.count(R)) {
            (0, _) => x[0] * x[0],
            (1, 1) => 2.0 * x[0],
            (2, 2) => 2.0,
            _ => 0.0,
        });
        assert!((cylindrical_residual(&r2, 0.4, 0.3, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!(cylindrical_residual(&r2, 0.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn wall_normal_is_radial_where_wall_is_flat() {
        let g = AnnulusGeometry::default();
        let t_r = AnalyticField::new(3, |x, p| match (p.order(), p.count(R)) {
            (0, _) => x[0],
            (1, 1) => 1.0,
            _ => 0.0,
        });
        assert!((wall_normal_derivative(&t_r, &g, PI / 6.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wall_normal_derivative(&constant_field(3, 2.0), &g, 0.4, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_field_only_pays_outer_flux() {
        let g = AnnulusGeometry::default();
        let cloud = Stage2Cloud::sample(&g, 50, 40, 10, 0, 1);
        let one = constant_field(3, 1.0);
        let zero_flux = FluxProfile::Constant { q: 0.0 };
        let (t, _) = six_term_loss(&one, &cloud, &g, &zero_flux, &TermWeights::default()).unwrap();
        assert_eq!(t, 0.0);
        let flux = FluxProfile::default();
        let (t, b) = six_term_loss(&one, &cloud, &g, &flux, &TermWeights::default()).unwrap();
        let want = cloud.outer.chunks(3).map(|x| flux.q(x[2], g.length).powi(2)).sum::<f64>() / 40.0;
        assert!((b.outer - want).abs() < 1e-15);
        assert_eq!(t, b.outer);
        assert_eq!(b.pde + b.inner + b.inlet + b.outlet + b.periodic, 0.0);
    }

    #[test]
    fn cloud_respects_walls() {
        let g = AnnulusGeometry::default();
        let c = Stage2Cloud::sample(&g, 200, 50, 20, 3, 1);
        for x in c.interior.chunks(3) {
            assert!(x[0] > g.r_min && x[0] < g.outer_radius(x[1]));
        }
        for x in c.outer.chunks(3) {
            assert!((x[0] - g.outer_radius(x[1])).abs() < 1e-14);
        }
        assert!(c.inlet.chunks(3).all(|x| x[2] == 0.0));
        assert!(c.outlet.chunks(3).all(|x| x[2] == g.length));
    }
}
