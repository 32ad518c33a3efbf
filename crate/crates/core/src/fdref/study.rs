//! Grid-refinement comparisons on nested grids.

use serde::{Deserialize, Serialize};

use super::solver::{solve_reference, FdField, FdGrid, Inlet, SolverOptions};
use crate::annulus::{AnnulusGeometry, FluxProfile};
use crate::error::{Error, Result};

/// Differences between a coarse and a fine solution on the coarse nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChange {
    pub coarse: FdGrid,
    pub fine: FdGrid,
    pub field_rel_l2: f64,
    pub field_max: f64,
    pub t_wall_rel_l2: f64,
    pub t_wall_max: f64,
    pub dtdn_rel_l2: f64,
    pub dtdn_max: f64,
}

/// Fine-grid index factors `(f_s, f_theta, f_z)` when `fine` nests `coarse`.
pub fn nesting(coarse: FdGrid, fine: FdGrid) -> Result<(usize, usize, usize)> {
    let ratio = |c: usize, f: usize| (f >= c && f.is_multiple_of(c)).then(|| f / c);
    let fs = ratio(coarse.n_s - 1, fine.n_s - 1);
    let ft = ratio(coarse.n_theta, fine.n_theta);
    let fz = ratio(coarse.n_z - 1, fine.n_z - 1);
    match (fs, ft, fz) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => Err(Error::invalid(format!("grid {fine:?} does not nest {coarse:?}"))),
    }
}

fn diffs(pairs: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut num, mut den, mut max) = (0.0, 0.0, 0.0f64);
    for (c, f) in pairs {
        num += (f - c) * (f - c);
        den += c * c;
        max = max.max((f - c).abs());
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    (rel, max)
}

/// Compares two solutions of the same problem on the coarse grid's nodes.
/// Relative L2 norms fall back to absolute norms when the coarse values vanish.
pub fn compare_fields(coarse: &FdField, fine: &FdField) -> Result<GridChange> {
    if coarse.geom != fine.geom || coarse.flux != fine.flux {
        return Err(Error::invalid("solutions are for different problems"));
    }
    let (fs, ft, fz) = nesting(coarse.grid, fine.grid)?;
    let g = coarse.grid;
    let mut field = Vec::with_capacity(g.len());
    for k in 0..g.n_z {
        for j in 0..g.n_theta {
            for i in 0..g.n_s {
                field.push((coarse.at(i, j, k), fine.at(i * fs, j * ft, k * fz)));
            }
        }
    }
    let mut t_wall = Vec::new();
    let mut dtdn = Vec::new();
    for j in 0..g.n_theta {
        for k in 0..g.n_z {
            let (tc, dc) = coarse.wall_values(j, k);
            let (tf, df) = fine.wall_values(j * ft, k * fz);
            t_wall.push((tc, tf));
            dtdn.push((dc, df));
        }
    }
    let (field_rel_l2, field_max) = diffs(field.into_iter());
    let (t_wall_rel_l2, t_wall_max) = diffs(t_wall.into_iter());
    let (dtdn_rel_l2, dtdn_max) = diffs(dtdn.into_iter());
    Ok(GridChange {
        coarse: coarse.grid,
        fine: fine.grid,
        field_rel_l2,
        field_max,
        t_wall_rel_l2,
        t_wall_max,
        dtdn_rel_l2,
        dtdn_max,
    })
}

/// Solves on each grid in order and compares consecutive pairs.
pub fn grid_study(
    geom: &AnnulusGeometry,
    flux: &FluxProfile,
    grids: &[FdGrid],
    inlet: Inlet,
    opts: SolverOptions,
) -> Result<Vec<GridChange>> {
    if grids.len() < 2 {
        return Err(Error::invalid("a grid study needs at least two grids"));
    }
    for w in grids.windows(2) {
        nesting(w[0], w[1])?;
    }
    let mut prev = solve_reference(geom, flux, grids[0], inlet, opts)?;
    let mut out = Vec::with_capacity(grids.len() - 1);
    for &g in &grids[1..] {
        let next = solve_reference(geom, flux, g, inlet, opts)?;
        out.push(compare_fields(&prev, &next)?);
        prev = next;
    }
    Ok(out)
}

/// Observed order `log2(e_coarse / e_fine)` for consecutive errors under halving.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nesting_rules() {
        assert_eq!(
            nesting(FdGrid::new(9, 16, 11), FdGrid::new(17, 32, 21)).unwrap(),
            (2, 2, 2)
        );
        assert_eq!(nesting(FdGrid::new(9, 16, 11), FdGrid::new(9, 16, 11)).unwrap(), (1, 1, 1));
        assert!(nesting(FdGrid::new(9, 16, 11), FdGrid::new(16, 16, 11)).is_err());
        assert!(nesting(FdGrid::new(9, 16, 11), FdGrid::new(9, 24, 11)).is_err());
        assert!(nesting(FdGrid::new(9, 16, 11), FdGrid::new(5, 16, 11)).is_err());
    }

    #[test]
    fn identical_grids_have_zero_change() {
        let g = AnnulusGeometry::default();
        let f = FluxProfile::default();
        let grid = FdGrid::new(5, 8, 9);
        let a = solve_reference(&g, &f, grid, Inlet::Uniform(1.0), SolverOptions::default()).unwrap();
        let c = compare_fields(&a, &a).unwrap();
        assert_eq!(c.field_max, 0.0);
        assert_eq!(c.dtdn_rel_l2, 0.0);
    }

    #[test]
    fn orders() {
        let o = observed_orders(&[1.0, 0.25, 0.0625]);
        assert!((o[0] - 2.0).abs() < 1e-12 && (o[1] - 2.0).abs() < 1e-12);
    }
}
