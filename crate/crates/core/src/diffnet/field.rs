//! Scalar fields that can report derivative jets: trained networks, networks
//! behind an affine input map, and closed-form oracle fields.

use super::jet::{JetLayout, Jets, Partial};
use super::network::NetworkParams;
use crate::error::{Error, Result};

pub trait Field {
    fn input_dim(&self) -> usize;

    /// Jets for every point in `points` (row-major, `input_dim` coordinates each).
    fn jets(&self, points: &[f64], layout: &JetLayout) -> Result<Jets>;
}

impl<F: Field + ?Sized> Field for &F {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn jets(&self, points: &[f64], layout: &JetLayout) -> Result<Jets> {
        (**self).jets(points, layout)
    }
}

/// Affine map `xi = (x - shift) / scale` applied to physical inputs before the network.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl InputMap {
    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(Error::Dimension {
                expected: shift.len(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !s.is_finite() || *s == 0.0) || shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("input map needs finite shifts and nonzero finite scales"));
        }
        Ok(InputMap { shift, scale })
    }

    /// Maps each `[lo_i, hi_i]` onto `[-1, 1]`.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
            bounds.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, points: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if !points.len().is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                got: points.len() % d,
            });
        }
        Ok(points
            .iter()
            .enumerate()
            .map(|(i, x)| (x - self.shift[i % d]) / self.scale[i % d])
            .collect())
    }

    /// Chain-rule factor turning each network-space jet component into its
    /// physical-space counterpart.
    pub fn component_scales(&self, layout: &JetLayout) -> Vec<f64> {
        layout
            .components()
            .iter()
            .map(|p| p.dirs().iter().map(|&d| 1.0 / self.scale[d as usize]).product())
            .collect()
    }
}

/// A network evaluated in physical coordinates through an [`InputMap`].
#[derive(Debug, Clone, Copy)]
pub struct MappedNetwork<'a> {
    pub net: &'a NetworkParams,
    pub map: Option<&'a InputMap>,
}

impl<'a> MappedNetwork<'a> {
    pub fn new(net: &'a NetworkParams, map: Option<&'a InputMap>) -> Self {
        MappedNetwork { net, map }
    }
}

impl Field for MappedNetwork<'_> {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn jets(&self, points: &[f64], layout: &JetLayout) -> Result<Jets> {
        self.net.jets_mapped(points, layout, self.map)
    }
}

/// Closed-form field: `f(x, partial)` returns the requested partial derivative at `x`.
pub struct AnalyticField<F> {
    dim: usize,
    f: F,
}

impl<F> AnalyticField<F>
where
    F: Fn(&[f64], Partial) -> f64,
{
    pub fn new(dim: usize, f: F) -> Self {
        AnalyticField { dim, f }
    }
}

impl<F> Field for AnalyticField<F>
where
    F: Fn(&[f64], Partial) -> f64,
{
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn jets(&self, points: &[f64], layout: &JetLayout) -> Result<Jets> {
        if layout.dim() != self.dim || !points.len().is_multiple_of(self.dim) {
            return Err(Error::Dimension {
                expected: self.dim,
                got: layout.dim(),
            });
        }
        let data = points
            .chunks(self.dim)
            .flat_map(|x| layout.components().iter().map(move |&p| (self.f)(x, p)))
            .collect();
        Ok(Jets::new(points.len() / self.dim, layout.width(), data))
    }
}

/// The field that is identically `c`.
pub fn constant_field(dim: usize, c: f64) -> AnalyticField<impl Fn(&[f64], Partial) -> f64> {
    AnalyticField::new(dim, move |_, p| if p.order() == 0 { c } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{init_mlp, Activation};

    #[test]
    fn mapped_network_matches_composed_fd() {
        let net = init_mlp(&[2, 8, 8, 1], Activation::Tanh, 4).unwrap();
        let map = InputMap::from_bounds(&[(0.0, 4.0), (-1.0, 0.5)]).unwrap();
        let field = MappedNetwork::new(&net, Some(&map));
        let layout = JetLayout::pure_second(2, &[0, 1]).unwrap();
        let x = [1.3, -0.2];
        let jets = field.jets(&x, &layout).unwrap();
        let f = |x: [f64; 2]| field.jets(&x, &JetLayout::value(2)).unwrap().get(0, 0);
        let h = 1e-4;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let d1 = (f(xp) - f(xm)) / (2.0 * h);
            let d2 = (f(xp) - 2.0 * f(x) + f(xm)) / (h * h);
            let c1 = jets.get(0, layout.expect(Partial::d(i)));
            let c2 = jets.get(0, layout.expect(Partial::dd(i, i)));
            assert!((c1 - d1).abs() < 1e-7 * (1.0 + c1.abs()), "{c1} {d1}");
            assert!((c2 - d2).abs() < 1e-5 * (1.0 + c2.abs()), "{c2} {d2}");
        }
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let layout = JetLayout::laplacian_gradient(2);
        let jets = constant_field(2, 3.0).jets(&[0.1, 0.2, 0.5, 0.5], &layout).unwrap();
        assert_eq!(jets.point(1)[0], 3.0);
        assert!(jets.point(1)[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_zero_scale() {
        assert!(InputMap::new(vec![0.0], vec![0.0]).is_err());
    }
}
