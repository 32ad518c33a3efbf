//! Structured auxiliary grids and the residual-gradient penalties evaluated on them.

use serde::{Deserialize, Serialize};

use super::residual_gradients_from_jets;
use crate::diffnet::{Field, JetLayout};
use crate::error::{Error, Result};
use crate::sampling;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxStrategy {
    FixedSafe,
    Cycle4,
    Jitter4,
}

/// Square auxiliary grids of spacing `h`. Bank `b` has nodes
/// `(x0_b + i h, y0_b + j h)` for `i, j in 1..=n-2`; with phase offsets in
/// `[0, h/2]` every node stays strictly inside the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxBank {
    pub strategy: AuxStrategy,
    pub n: usize,
    pub h: f64,
    pub offsets: Vec<(f64, f64)>,
}

pub fn build_aux_bank(strategy: AuxStrategy, n: usize, h: f64, seed: u64) -> Result<AuxBank> {
    if n < 8 {
        return Err(Error::invalid(format!("aux grid needs n >= 8, got {n}")));
    }
    if !(h > 0.0) || (n as f64 - 1.5) * h >= 1.0 {
        return Err(Error::invalid(format!(
            "aux grid with n = {n}, h = {h} does not fit inside the unit square for every phase"
        )));
    }
    let half = 0.5 * h;
    let offsets = match strategy {
        AuxStrategy::FixedSafe => vec![(0.0, 0.0)],
        AuxStrategy::Cycle4 => vec![(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)],
        AuxStrategy::Jitter4 => {
            let mut rng = sampling::rng(seed, sampling::stream::AUX_JITTER);
            (0..4).map(|_| (rng.gen_range(0.0..half), rng.gen_range(0.0..half))).collect()
        }
    };
    Ok(AuxBank {
        strategy,
        n,
        h,
        offsets,
    })
}

impl AuxBank {
    /// Default bank: `h = 1 / (n - 1)`.
    pub fn with_default_spacing(strategy: AuxStrategy, n: usize, seed: u64) -> Result<Self> {
        build_aux_bank(strategy, n, 1.0 / (n as f64 - 1.0), seed)
    }

    pub fn count(&self) -> usize {
        self.offsets.len()
    }

    /// Nodes per side of one bank.
    pub fn side(&self) -> usize {
        self.n - 2
    }

    pub fn index_for_epoch(&self, epoch: u64) -> usize {
        (epoch % self.count() as u64) as usize
    }

    /// Row-major node list of bank `b`, index `i * side + j` with `i` along x.
    pub fn nodes(&self, b: usize) -> Vec<f64> {
        let (x0, y0) = self.offsets[b];
        let m = self.side();
        let mut out = Vec::with_capacity(2 * m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(x0 + (i + 1) as f64 * self.h);
                out.push(y0 + (j + 1) as f64 * self.h);
            }
        }
        out
    }

    /// Nodes of bank `b` away from its edge lines (where central differences are taken).
    pub fn interior_nodes(&self, b: usize) -> Vec<f64> {
        let m = self.side();
        let all = self.nodes(b);
        let mut out = Vec::with_capacity(2 * (m - 2) * (m - 2));
        for i in 1..m - 1 {
            for j in 1..m - 1 {
                out.extend_from_slice(&all[2 * (i * m + j)..2 * (i * m + j) + 2]);
            }
        }
        out
    }
}

fn check_grid(r: &[f64], nx: usize, ny: usize) -> Result<()> {
    if nx < 3 || ny < 3 {
        return Err(Error::invalid(format!("residual grid {nx}x{ny} is smaller than 3x3")));
    }
    if r.len() != nx * ny {
        return Err(Error::Dimension {
            expected: nx * ny,
            got: r.len(),
        });
    }
    Ok(())
}

/// Mean over interior nodes of `(D_x r)^2 + (D_y r)^2` with second-order central
/// differences; `r[i * ny + j]` with `i` along x.
pub fn fd_resgrad_loss(r: &[f64], nx: usize, ny: usize, h: f64) -> Result<f64> {
    check_grid(r, nx, ny)?;
    let inv = 1.0 / (2.0 * h);
    let mut sum = 0.0;
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let dx = (r[(i + 1) * ny + j] - r[(i - 1) * ny + j]) * inv;
            let dy = (r[i * ny + j + 1] - r[i * ny + j - 1]) * inv;
            sum += dx * dx + dy * dy;
        }
    }
    Ok(sum / ((nx - 2) * (ny - 2)) as f64)
}

/// `scale * d fd_resgrad_loss / d r`.
pub fn fd_resgrad_adjoint(r: &[f64], nx: usize, ny: usize, h: f64, scale: f64) -> Result<Vec<f64>> {
    check_grid(r, nx, ny)?;
    let inv = 1.0 / (2.0 * h);
    let c = scale * 2.0 / ((nx - 2) * (ny - 2)) as f64;
    let mut bar = vec![0.0; r.len()];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let dx = (r[(i + 1) * ny + j] - r[(i - 1) * ny + j]) * inv;
            let dy = (r[i * ny + j + 1] - r[i * ny + j - 1]) * inv;
            bar[(i + 1) * ny + j] += c * dx * inv;
            bar[(i - 1) * ny + j] -= c * dx * inv;
            bar[i * ny + j + 1] += c * dy * inv;
            bar[i * ny + j - 1] -= c * dy * inv;
        }
    }
    Ok(bar)
}

/// Mean of `|grad R|^2` over `nodes`, with `grad R` taken from third-order input
/// derivatives of the field.
pub fn ad_resgrad_loss(field: &impl Field, nodes: &[f64]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::invalid("no nodes for the AD residual-gradient loss"));
    }
    let layout = JetLayout::laplacian_gradient(2);
    let jets = field.jets(nodes, &layout)?;
    let g = residual_gradients_from_jets(&jets, &layout, nodes);
    Ok(g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / g.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_gives_slope_norm() {
        let (nx, ny, h) = (7, 5, 0.1);
        let r: Vec<f64> = (0..nx * ny)
            .map(|k| 3.0 * (k / ny) as f64 * h - 2.0 * (k % ny) as f64 * h)
            .collect();
        assert!((fd_resgrad_loss(&r, nx, ny, h).unwrap() - 13.0).abs() < 1e-12);
        assert_eq!(fd_resgrad_loss(&vec![4.2; nx * ny], nx, ny, h).unwrap(), 0.0);
        assert!(fd_resgrad_loss(&[0.0; 4], 2, 2, h).is_err());
    }

    #[test]
    fn adjoint_matches_fd() {
        let (nx, ny, h) = (5, 6, 0.2);
        let r: Vec<f64> = (0..nx * ny).map(|k| ((k * 7 % 11) as f64).sin()).collect();
        let bar = fd_resgrad_adjoint(&r, nx, ny, h, 1.5).unwrap();
        for k in 0..r.len() {
            let mut p = r.clone();
            let mut m = r.clone();
            p[k] += 1e-6;
            m[k] -= 1e-6;
            let d = 1.5 * (fd_resgrad_loss(&p, nx, ny, h).unwrap() - fd_resgrad_loss(&m, nx, ny, h).unwrap()) / 2e-6;
            assert!((d - bar[k]).abs() < 1e-6, "{k}: {d} {}", bar[k]);
        }
    }

    #[test]
    fn banks_stay_inside() {
        for s in [AuxStrategy::FixedSafe, AuxStrategy::Cycle4, AuxStrategy::Jitter4] {
            let bank = AuxBank::with_default_spacing(s, 64, 3).unwrap();
            for b in 0..bank.count() {
                let nodes = bank.nodes(b);
                assert_eq!(nodes.len(), 2 * 62 * 62);
                assert!(nodes.iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
        assert!(AuxBank::with_default_spacing(AuxStrategy::Cycle4, 7, 0).is_err());
        assert!(build_aux_bank(AuxStrategy::Cycle4, 64, 1.0 / 62.0, 0).is_err());
    }

    #[test]
    fn cycle_rotates() {
        let bank = AuxBank::with_default_spacing(AuxStrategy::Cycle4, 16, 0).unwrap();
        assert_eq!(bank.offsets[3], (0.5 * bank.h, 0.5 * bank.h));
        let seq: Vec<_> = (0..6).map(|e| bank.index_for_epoch(e)).collect();
        assert_eq!(seq, vec![0, 1, 2, 3, 0, 1]);
    }
}
