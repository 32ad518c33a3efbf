use resgrad::annulus::{AnnulusGeometry, FluxProfile};
use resgrad::fdref::{
    bicgstab, compare_fields, grid_study, nesting, observed_orders, read_wall_slice, solve_reference,
    write_wall_slice, CsrBuilder, FdGrid, Inlet, SolverOptions, WallSlice, WALL_SLICE_MAGIC,
};
use resgrad::Error;

fn log_profile(r: f64, _theta: f64) -> f64 {
    1.0 + 0.5 * (r / 0.2).ln()
}

#[test]
fn zero_flux_recovers_uniform_temperature() {
    let g = AnnulusGeometry::default();
    let sol = solve_reference(
        &g,
        &FluxProfile::Constant { q: 0.0 },
        FdGrid::new(9, 32, 21),
        Inlet::Uniform(1.0),
        SolverOptions::default(),
    )
    .unwrap();
    let err = sol.values.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err}");
    assert!(sol.report.residual <= 1e-10);
}

#[test]
fn axisymmetric_limit_converges_at_second_order() {
    let g = AnnulusGeometry::default().circular();
    let flux = FluxProfile::Constant { q: 0.5 };
    let errors: Vec<f64> = [5, 9, 17, 33]
        .iter()
        .map(|&ns| {
            let sol = solve_reference(&g, &flux, FdGrid::new(ns, 8, 5), Inlet::Profile(log_profile), SolverOptions::default())
                .unwrap();
            let mut err: f64 = 0.0;
            for k in 0..5 {
                for j in 0..8 {
                    for i in 0..ns {
                        let (r, th, _) = sol.node(i, j, k);
                        err = err.max((sol.at(i, j, k) - log_profile(r, th)).abs());
                    }
                }
            }
            err
        })
        .collect();
    let orders = observed_orders(&errors);
    assert!(orders.iter().all(|&p| p >= 1.8), "errors {errors:?} orders {orders:?}");
}

#[test]
fn radial_refinement_moves_wall_temperature_far_more_than_wall_flux() {
    let g = AnnulusGeometry::default();
    let grids = [FdGrid::new(9, 32, 41), FdGrid::new(17, 32, 41)];
    let changes = grid_study(&g, &FluxProfile::default(), &grids, Inlet::Uniform(1.0), SolverOptions::default()).unwrap();
    assert_eq!(changes.len(), 1);
    let c = &changes[0];
    assert!(c.t_wall_rel_l2 > 0.0);
    assert!(c.dtdn_rel_l2 * 100.0 <= c.t_wall_rel_l2, "{c:?}");
}

#[test]
fn solution_respects_boundary_rows() {
    let g = AnnulusGeometry::default();
    let grid = FdGrid::new(7, 16, 11);
    let sol = solve_reference(&g, &FluxProfile::default(), grid, Inlet::Uniform(1.0), SolverOptions::default()).unwrap();
    for j in 0..grid.n_theta {
        for k in 0..grid.n_z {
            assert!((sol.at(0, j, k) - 1.0).abs() < 1e-9);
        }
        for i in 0..grid.n_s {
            assert!((sol.at(i, j, 0) - 1.0).abs() < 1e-9);
        }
    }
    // heated wall ends up hotter than the inner wall downstream
    let k = grid.n_z - 1;
    assert!(sol.at(grid.n_s - 1, 3, k) > 1.0);
    // wall flux equals q on every non-inlet column
    for j in 0..grid.n_theta {
        for k in 1..grid.n_z {
            let (_, d) = sol.wall_values(j, k);
            let q = FluxProfile::default().q(grid.z(k, g.length), g.length);
            assert!((d - q).abs() < 1e-6, "({j}, {k}): {d} vs {q}");
        }
    }
}

#[test]
fn wall_slice_file_roundtrip() {
    let g = AnnulusGeometry::default();
    let sol = solve_reference(&g, &FluxProfile::default(), FdGrid::MIN, Inlet::Uniform(1.0), SolverOptions::default())
        .unwrap();
    let slice = sol.wall_slice();
    assert_eq!(slice.geometry_hash, g.hash());
    assert_eq!(slice.flux, FluxProfile::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wall.bin");
    write_wall_slice(&path, &slice).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], WALL_SLICE_MAGIC);
    assert_eq!(bytes.len(), 50 + 8 * (8 + 5 + 2 * 8 * 5));
    let back = read_wall_slice(&path).unwrap();
    assert_eq!(back, slice);
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(read_wall_slice(&path).is_err());
    assert!(WallSlice::decode(&bytes[..10]).is_err());
}

#[test]
fn grid_study_requires_nested_grids() {
    let g = AnnulusGeometry::default();
    let f = FluxProfile::default();
    let o = SolverOptions::default();
    assert!(grid_study(&g, &f, &[FdGrid::new(9, 16, 9)], Inlet::Uniform(1.0), o).is_err());
    assert!(grid_study(&g, &f, &[FdGrid::new(9, 16, 9), FdGrid::new(12, 16, 9)], Inlet::Uniform(1.0), o).is_err());
    assert_eq!(nesting(FdGrid::new(5, 8, 5), FdGrid::new(9, 16, 9)).unwrap(), (2, 2, 2));
    let a = solve_reference(&g, &f, FdGrid::new(5, 8, 5), Inlet::Uniform(1.0), o).unwrap();
    let b = solve_reference(&g, &f, FdGrid::new(9, 16, 9), Inlet::Uniform(1.0), o).unwrap();
    let c = compare_fields(&a, &b).unwrap();
    assert!(c.field_max > 0.0 && c.field_max >= c.t_wall_max);
    assert!(compare_fields(&b, &a).is_err());
}

#[test]
fn iteration_cap_reports_no_convergence() {
    let g = AnnulusGeometry::default();
    let opts = SolverOptions { tol: 1e-14, max_iter: 2 };
    match solve_reference(&g, &FluxProfile::default(), FdGrid::new(9, 16, 9), Inlet::Uniform(1.0), opts) {
        Err(Error::NoConvergence { iterations, history, .. }) => {
            assert_eq!(iterations, 2);
            assert_eq!(history.len(), 2);
        }
        other => panic!("expected NoConvergence, got {other:?}"),
    }
}

#[test]
fn bicgstab_solves_small_nonsymmetric_system() {
    let n = 6;
    let mut b = CsrBuilder::with_capacity(n, 3 * n);
    for i in 0..n {
        if i > 0 {
            b.add(i - 1, -1.3);
        }
        b.add(i, 4.0);
        if i + 1 < n {
            b.add(i + 1, -0.7);
        }
        b.finish_row();
    }
    let a = b.build();
    let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
    let mut rhs = vec![0.0; n];
    a.mul_vec(&x_true, &mut rhs);
    let (x, rep) = bicgstab(&a, &rhs, 1e-12, 100).unwrap();
    assert!(rep.residual <= 1e-12);
    for (u, v) in x.iter().zip(&x_true) {
        assert!((u - v).abs() < 1e-10);
    }
}
