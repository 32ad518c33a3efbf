mod common;

use common::close;
use proptest::prelude::*;
use resgrad::diffnet::{AnalyticField, Partial};
use resgrad::harness::{Arm, RunConfig};
use resgrad::optim::AuxSchedule;
use resgrad::poisson::{
    ad_resgrad_loss, audit_stage1, base_losses, build_aux_bank, exact_field, exact_partial, exact_solution,
    fd_resgrad_adjoint, fd_resgrad_loss, forcing, forcing_grad, match_ad_weight, residuals, AuxBank, AuxStrategy,
    Stage1Cloud, Stage1Problem,
};
use resgrad::train::Objective;

const STRATEGIES: [AuxStrategy; 3] = [AuxStrategy::FixedSafe, AuxStrategy::Cycle4, AuxStrategy::Jitter4];

/// `u* + eps * sin(2x + 3y)`, whose residual is `-13 eps sin(2x + 3y)`.
fn perturbed(eps: f64) -> AnalyticField<impl Fn(&[f64], Partial) -> f64> {
    AnalyticField::new(2, move |x, p| {
        let (nx, ny) = (p.count(0) as i32, p.count(1) as i32);
        let phase = (nx + ny) as f64 * std::f64::consts::FRAC_PI_2;
        exact_partial(x[0], x[1], p) + eps * 2f64.powi(nx) * 3f64.powi(ny) * (2.0 * x[0] + 3.0 * x[1] + phase).sin()
    })
}

#[test]
fn forcing_matches_laplacian_of_exact_solution() {
    for &(x, y) in &[(0.1, 0.2), (0.37, 0.81), (0.5, 0.5), (0.93, 0.04)] {
        let lap = exact_partial(x, y, Partial::dd(0, 0)) + exact_partial(x, y, Partial::dd(1, 1));
        assert!((lap - forcing(x, y)).abs() < 1e-12);
        let g = forcing_grad(x, y);
        for (k, gk) in g.iter().enumerate() {
            let third = exact_partial(x, y, Partial::ddd(k, 0, 0)) + exact_partial(x, y, Partial::ddd(k, 1, 1));
            assert!((third - gk).abs() < 1e-10, "{k}: {third} vs {gk}");
        }
        let h = 1e-5;
        let fd = (exact_solution(x + h, y) - exact_solution(x - h, y)) / (2.0 * h);
        assert!((fd - exact_partial(x, y, Partial::d(0))).abs() < 1e-8);
    }
}

#[test]
fn exact_field_has_zero_regularizers_on_every_bank() {
    let u = exact_field();
    for strategy in STRATEGIES {
        for n in [8, 16, 33, 64] {
            let bank = AuxBank::with_default_spacing(strategy, n, 5).unwrap();
            for b in 0..bank.count() {
                let r = residuals(&u, &bank.nodes(b)).unwrap();
                let fd = fd_resgrad_loss(&r, bank.side(), bank.side(), bank.h).unwrap();
                let ad = ad_resgrad_loss(&u, &bank.interior_nodes(b)).unwrap();
                assert!(fd <= 1e-18, "{strategy:?} n={n} b={b}: fd {fd:e}");
                assert!(ad <= 1e-18, "{strategy:?} n={n} b={b}: ad {ad:e}");
            }
        }
    }
    let cloud = Stage1Cloud::sample(256, 64, 1, 2);
    let (pde, bc) = base_losses(&u, &cloud).unwrap();
    assert!(pde <= 1e-18 && bc <= 1e-18);
}

#[test]
fn exact_field_audit_is_clean() {
    let a = audit_stage1(&exact_field(), 3, 512, 32).unwrap();
    assert!(a.rel_l2_u < 1e-14 && a.rel_l2_grad_u < 1e-14);
    assert!(a.residual_rmse < 1e-9 && a.grad_r_rmse < 1e-9);
    assert_eq!(a.shifted_fd_rg.len(), 4);
    assert!(a.shifted_fd_rg.iter().all(|v| *v <= 1e-18));
}

#[test]
fn perturbed_audit_matches_closed_form() {
    let eps = 0.01;
    let a = audit_stage1(&perturbed(eps), 3, 4096, 32).unwrap();
    // residual -13 eps sin(2x + 3y), RMS about 13 eps / sqrt(2)
    assert!(a.residual_rmse > 5.0 * eps && a.residual_rmse < 13.0 * eps);
    assert!(a.grad_r_rmse > a.residual_rmse);
}

proptest! {
    #[test]
    fn linear_residual_gives_squared_slope(
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
        nx in 3usize..12, ny in 3usize..12, h in 0.01f64..0.2,
    ) {
        let r: Vec<f64> = (0..nx)
            .flat_map(|i| (0..ny).map(move |j| a * i as f64 * h + b * j as f64 * h + c))
            .collect();
        let l = fd_resgrad_loss(&r, nx, ny, h).unwrap();
        prop_assert!(close(l, a * a + b * b, 1e-12, 1e-12));
    }

    #[test]
    fn fd_adjoint_matches_fd_of_loss(
        vals in prop::collection::vec(-1.0f64..1.0, 20),
        h in 0.05f64..0.5, scale in 0.1f64..3.0,
    ) {
        let (nx, ny) = (5, 4);
        let bar = fd_resgrad_adjoint(&vals, nx, ny, h, scale).unwrap();
        let f = |r: &[f64]| scale * fd_resgrad_loss(r, nx, ny, h).unwrap();
        let oracle = common::fd_gradient(&f, &vals, 1e-6);
        for (g, o) in bar.iter().zip(&oracle) {
            prop_assert!(close(*g, *o, 1e-6, 1e-7));
        }
    }

    #[test]
    fn bank_nodes_stay_inside(strategy in prop_oneof![
            Just(AuxStrategy::FixedSafe), Just(AuxStrategy::Cycle4), Just(AuxStrategy::Jitter4)],
        n in 8usize..80, seed in 0u64..100, shrink in 0.5f64..1.0,
    ) {
        let h_max = 1.0 / (n as f64 - 1.5);
        let h = shrink * h_max * 0.999;
        let bank = build_aux_bank(strategy, n, h, seed).unwrap();
        prop_assert_eq!(bank.count(), if strategy == AuxStrategy::FixedSafe { 1 } else { 4 });
        for &(ox, oy) in &bank.offsets {
            prop_assert!((0.0..=h / 2.0).contains(&ox) && (0.0..=h / 2.0).contains(&oy));
        }
        for b in 0..bank.count() {
            let nodes = bank.nodes(b);
            prop_assert_eq!(nodes.len(), 2 * (n - 2) * (n - 2));
            prop_assert!(nodes.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn ad_weight_matching_is_exact(l in 1e-6f64..1.0, s_fd in 1e-6f64..1e3, s_ad in 1e-6f64..1e3) {
        prop_assert_eq!(match_ad_weight(l, s_fd, s_ad).unwrap(), l * s_fd / s_ad);
    }
}

#[test]
fn bank_rejects_bad_sizes() {
    assert!(build_aux_bank(AuxStrategy::FixedSafe, 7, 0.1, 0).is_err());
    assert!(build_aux_bank(AuxStrategy::Cycle4, 10, 1.0 / 8.5, 0).is_err());
    assert!(build_aux_bank(AuxStrategy::Cycle4, 10, 1.0 / 8.6, 0).is_ok());
    let a = build_aux_bank(AuxStrategy::Jitter4, 16, 0.05, 9).unwrap();
    let b = build_aux_bank(AuxStrategy::Jitter4, 16, 0.05, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ad_weight_matching_example() {
    assert_eq!(match_ad_weight(1e-3, 2.0, 4.0).unwrap(), 5e-4);
    assert!(match_ad_weight(1e-3, 2.0, 0.0).is_err());
}

/// FD and AD penalties on the same fixed centers, with 3x3 stencils of spacing `h`.
fn fd_ad_gap(h: f64) -> f64 {
    let field = perturbed(0.3);
    let mut centers = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            centers.extend_from_slice(&[0.2 + 0.1 * i as f64, 0.2 + 0.1 * j as f64]);
        }
    }
    let mut fd = 0.0;
    for c in centers.chunks(2) {
        let mut patch = Vec::with_capacity(18);
        for di in -1..=1 {
            for dj in -1..=1 {
                patch.extend_from_slice(&[c[0] + di as f64 * h, c[1] + dj as f64 * h]);
            }
        }
        let r = residuals(&field, &patch).unwrap();
        fd += fd_resgrad_loss(&r, 3, 3, h).unwrap();
    }
    fd /= (centers.len() / 2) as f64;
    (fd - ad_resgrad_loss(&field, &centers).unwrap()).abs()
}

#[test]
fn fd_ad_gap_is_second_order() {
    let gaps: Vec<f64> = [0.04, 0.02, 0.01, 0.005].iter().map(|&h| fd_ad_gap(h)).collect();
    for w in gaps.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "gaps {gaps:?}");
    }
}

#[test]
fn ad_arm_matches_weight_at_switch_on() {
    let mut cfg = RunConfig::stage1_default();
    cfg.arm = Arm::AdFixed;
    cfg.network.hidden_layers = Some(2);
    cfg.network.width = Some(8);
    cfg.stage1.aux_n = 16;
    cfg.stage1.aux_strategy = AuxStrategy::Cycle4;
    cfg.aux.start_frac = 0.1;
    cfg.epochs = 20;
    let net = resgrad::diffnet::init_mlp(&cfg.layer_sizes(), cfg.activation(), 0).unwrap();
    let mut p = Stage1Problem::from_config(&cfg).unwrap();
    p.begin_epoch(&net, 0).unwrap();
    assert_eq!(p.schedule().lambda0, 1e-3);
    p.begin_epoch(&net, 2).unwrap();
    let b = p.bank.index_for_epoch(2);
    let want = 1e-3 * p.fd_loss(&net, b).unwrap() / p.ad_loss(&net, b).unwrap();
    assert_eq!(p.schedule().lambda0, want);
    // matched once only
    p.begin_epoch(&net, 3).unwrap();
    assert_eq!(p.schedule().lambda0, want);
}

#[test]
fn clouds_are_seeded_and_in_domain() {
    let a = Stage1Cloud::sample(100, 40, 7, 2);
    assert_eq!(a, Stage1Cloud::sample(100, 40, 7, 2));
    assert_ne!(a, Stage1Cloud::sample(100, 40, 8, 2));
    assert!(a.interior.iter().all(|&v| (0.0..=1.0).contains(&v)));
    for x in a.boundary.chunks(2) {
        let on_edge = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0;
        assert!(on_edge, "{x:?}");
    }
}

#[test]
fn schedule_constant_switches_on() {
    let s = AuxSchedule { start_epoch: 5, ..AuxSchedule::constant(2.0) };
    assert_eq!(s.weight_at(4), 0.0);
    assert_eq!(s.weight_at(5), 2.0);
}
