//! Truncated multivariate Taylor jets.
//!
//! A [`JetLayout`] is a downward-closed set of partial derivatives (multi-indices of
//! order at most three) that is pushed through the network alongside the value.
//! Closure matters: propagating `d^3 u / dx dy^2` through an activation needs the
//! lower-order pieces `u_x`, `u_y`, `u_yy` and `u_xy` of the same pre-activation.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Maximum derivative order carried by a jet.
pub const MAX_JET_ORDER: usize = 3;

/// A partial derivative with respect to network inputs, as a sorted multi-index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partial {
    order: u8,
    dirs: [u8; MAX_JET_ORDER],
}

impl Partial {
    pub const VALUE: Partial = Partial {
        order: 0,
        dirs: [0; MAX_JET_ORDER],
    };

    /// Builds the partial derivative along the given input directions (any order).
    pub fn new(dirs: &[usize]) -> Result<Self> {
        if dirs.len() > MAX_JET_ORDER {
            return Err(Error::invalid(format!(
                "derivative order {} exceeds {MAX_JET_ORDER}",
                dirs.len()
            )));
        }
        let mut sorted = [0u8; MAX_JET_ORDER];
        for (slot, &d) in sorted.iter_mut().zip(dirs) {
            *slot = u8::try_from(d).map_err(|_| Error::invalid("input direction too large"))?;
        }
        sorted[..dirs.len()].sort_unstable();
        Ok(Partial {
            order: dirs.len() as u8,
            dirs: sorted,
        })
    }

    pub fn d(i: usize) -> Self {
        Self::new(&[i]).expect("first-order partial")
    }

    pub fn dd(i: usize, j: usize) -> Self {
        Self::new(&[i, j]).expect("second-order partial")
    }

    pub fn ddd(i: usize, j: usize, k: usize) -> Self {
        Self::new(&[i, j, k]).expect("third-order partial")
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn dirs(&self) -> &[u8] {
        &self.dirs[..self.order as usize]
    }

    /// Number of derivatives taken along input `i`.
    pub fn count(&self, i: usize) -> usize {
        self.dirs().iter().filter(|&&d| d as usize == i).count()
    }

    /// The partial with the `pos`-th direction removed.
    fn without(&self, pos: usize) -> Partial {
        let dirs: Vec<usize> = self
            .dirs()
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != pos)
            .map(|(_, &d)| d as usize)
            .collect();
        Partial::new(&dirs).expect("sub-partial has lower order")
    }
}

impl fmt::Debug for Partial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.order == 0 {
            return write!(f, "u");
        }
        write!(f, "u_")?;
        for d in self.dirs() {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// One term of the multivariate chain rule for `a = act(z)`:
/// `act^(sigma)(z_value) * prod(z[factors])`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChainTerm {
    pub sigma: u8,
    pub len: u8,
    pub factors: [u16; MAX_JET_ORDER],
}

impl ChainTerm {
    fn new(sigma: usize, factors: &[usize]) -> Self {
        let mut f = [0u16; MAX_JET_ORDER];
        for (slot, &c) in f.iter_mut().zip(factors) {
            *slot = c as u16;
        }
        ChainTerm {
            sigma: sigma as u8,
            len: factors.len() as u8,
            factors: f,
        }
    }

    #[inline]
    pub fn factors(&self) -> &[u16] {
        &self.factors[..self.len as usize]
    }
}

/// Fast-path description used when the layout has only first and pure second
/// derivatives (the common case for second-order PDE residuals).
#[derive(Debug, Clone)]
pub(crate) struct PureLayout {
    pub firsts: Vec<usize>,
    /// `(component of u_ii, component of u_i)`.
    pub seconds: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct JetLayout {
    dim: usize,
    comps: Vec<Partial>,
    max_order: usize,
    pub(crate) terms: Vec<Vec<ChainTerm>>,
    pub(crate) pure: Option<PureLayout>,
}

impl JetLayout {
    /// Closes `requested` under taking sub-derivatives and orders the components
    /// by derivative order; component 0 is always the value.
    pub fn new(dim: usize, requested: &[Partial]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("jet layout needs at least one input"));
        }
        let mut set = BTreeSet::new();
        set.insert(Partial::VALUE);
        let mut stack: Vec<Partial> = requested.to_vec();
        while let Some(p) = stack.pop() {
            if let Some(&bad) = p.dirs().iter().find(|&&d| d as usize >= dim) {
                return Err(Error::invalid(format!(
                    "input direction {bad} out of range for dimension {dim}"
                )));
            }
            if set.insert(p) {
                for pos in 0..p.order() {
                    stack.push(p.without(pos));
                }
            }
        }
        let comps: Vec<Partial> = set.into_iter().collect();
        let index = |p: Partial| comps.binary_search(&p).expect("closed set");

        let mut terms = Vec::with_capacity(comps.len());
        for p in &comps {
            let d = p.dirs();
            let t = match p.order() {
                0 => vec![ChainTerm::new(0, &[])],
                1 => vec![ChainTerm::new(1, &[index(*p)])],
                2 => {
                    let (i, j) = (d[0] as usize, d[1] as usize);
                    vec![
                        ChainTerm::new(2, &[index(Partial::d(i)), index(Partial::d(j))]),
                        ChainTerm::new(1, &[index(*p)]),
                    ]
                }
                _ => {
                    let (i, j, k) = (d[0] as usize, d[1] as usize, d[2] as usize);
                    let c1 = |a| index(Partial::d(a));
                    let c2 = |a, b| index(Partial::dd(a, b));
                    vec![
                        ChainTerm::new(3, &[c1(i), c1(j), c1(k)]),
                        ChainTerm::new(2, &[c2(i, j), c1(k)]),
                        ChainTerm::new(2, &[c2(i, k), c1(j)]),
                        ChainTerm::new(2, &[c2(j, k), c1(i)]),
                        ChainTerm::new(1, &[index(*p)]),
                    ]
                }
            };
            terms.push(t);
        }

        let max_order = comps.last().map(Partial::order).unwrap_or(0);
        let is_pure = comps
            .iter()
            .all(|p| p.order() <= 1 || (p.order() == 2 && p.dirs()[0] == p.dirs()[1]));
        let pure = is_pure.then(|| PureLayout {
            firsts: (0..comps.len()).filter(|&c| comps[c].order() == 1).collect(),
            seconds: (0..comps.len())
                .filter(|&c| comps[c].order() == 2)
                .map(|c| (c, index(Partial::d(comps[c].dirs()[0] as usize))))
                .collect(),
        });

        Ok(JetLayout {
            dim,
            comps,
            max_order,
            terms,
            pure,
        })
    }

    pub fn value(dim: usize) -> Self {
        Self::new(dim, &[]).expect("valid layout")
    }

    pub fn gradient(dim: usize) -> Self {
        let req: Vec<_> = (0..dim).map(Partial::d).collect();
        Self::new(dim, &req).expect("valid layout")
    }

    /// Value, full gradient and the pure second derivatives along `dirs`.
    pub fn pure_second(dim: usize, dirs: &[usize]) -> Result<Self> {
        let mut req: Vec<_> = (0..dim).map(Partial::d).collect();
        req.extend(dirs.iter().map(|&i| Partial::dd(i, i)));
        Self::new(dim, &req)
    }

    /// Everything needed for the gradient of the Laplacian: all
    /// `d/dx_j d^2/dx_i^2` plus the full gradient.
    pub fn laplacian_gradient(dim: usize) -> Self {
        let mut req: Vec<_> = (0..dim).map(Partial::d).collect();
        for j in 0..dim {
            for i in 0..dim {
                req.push(Partial::ddd(j, i, i));
            }
        }
        Self::new(dim, &req).expect("valid layout")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of jet components per point.
    pub fn width(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Partial] {
        &self.comps
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn index(&self, p: Partial) -> Option<usize> {
        self.comps.binary_search(&p).ok()
    }

    /// Like [`index`](Self::index) but panics with a readable message; for
    /// components the caller put in the layout itself.
    pub fn expect(&self, p: Partial) -> usize {
        self.index(p)
            .unwrap_or_else(|| panic!("{p:?} is not part of this jet layout"))
    }

    /// Index of the first-order component along input `i`, if present.
    pub(crate) fn first(&self, i: usize) -> Option<usize> {
        self.index(Partial::d(i))
    }
}

/// Jet values for a batch of points, `width` components per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jets {
    n_points: usize,
    width: usize,
    data: Vec<f64>,
}

impl Jets {
    pub fn new(n_points: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_points * width, "jet buffer size");
        Jets {
            n_points,
            width,
            data,
        }
    }

    pub fn zeros(n_points: usize, width: usize) -> Self {
        Self::new(n_points, width, vec![0.0; n_points * width])
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn point(&self, p: usize) -> &[f64] {
        &self.data[p * self.width..(p + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, p: usize, comp: usize) -> f64 {
        self.data[p * self.width + comp]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}
