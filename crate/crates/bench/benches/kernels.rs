use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use resgrad::annulus::{build_shell_bank, shell_resgrad_loss, AnnulusGeometry, FluxProfile, ShellSpec, Stage2Problem};
use resgrad::diffnet::{init_mlp, Activation, Field, JetLayout};
use resgrad::fdref::{solve_reference, FdGrid, Inlet, SolverOptions};
use resgrad::harness::{Arm, RunConfig};
use resgrad::poisson::Stage1Problem;
use resgrad::train::Objective;

fn points(n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|i| ((i as f64 * 0.618_034) % 1.0) * 0.9 + 0.05).collect()
}

fn jets(c: &mut Criterion) {
    let net = init_mlp(&[2, 32, 32, 32, 32, 1], Activation::Tanh, 0).unwrap();
    let pts = points(256, 2);
    let mut g = c.benchmark_group("jets");
    for (name, layout) in [
        ("gradient", JetLayout::gradient(2)),
        ("laplacian", JetLayout::pure_second(2, &[0, 1]).unwrap()),
        ("laplacian_gradient", JetLayout::laplacian_gradient(2)),
    ] {
        g.bench_function(name, |b| b.iter(|| net.jets(black_box(&pts), &layout).unwrap()));
    }
    g.finish();
}

fn small_stage1(arm: Arm) -> RunConfig {
    let mut cfg = RunConfig::stage1_default();
    cfg.arm = arm;
    cfg.network.hidden_layers = Some(4);
    cfg.network.width = Some(32);
    cfg.stage1.n_interior = 512;
    cfg.stage1.n_boundary = 128;
    cfg.stage1.aux_n = 32;
    cfg
}

fn objectives(c: &mut Criterion) {
    let mut g = c.benchmark_group("objective");
    for arm in [Arm::Off, Arm::FdFixed, Arm::AdFixed] {
        let cfg = small_stage1(arm);
        let net = init_mlp(&cfg.layer_sizes(), cfg.activation(), 0).unwrap();
        let mut p = Stage1Problem::from_config(&cfg).unwrap();
        p.begin_epoch(&net, 0).unwrap();
        g.bench_function(format!("stage1_{}", arm.as_str()), |b| b.iter(|| p.loss_and_grad(&net, 0).unwrap()));
    }
    let mut cfg = RunConfig::stage2_default();
    cfg.arm = Arm::ShellFixed;
    cfg.network.hidden_layers = Some(4);
    cfg.network.width = Some(32);
    (cfg.stage2.n_interior, cfg.stage2.n_boundary, cfg.stage2.n_pairs) = (500, 125, 50);
    (cfg.stage2.shell.n_theta, cfg.stage2.shell.n_z) = (16, 16);
    let net = init_mlp(&cfg.layer_sizes(), cfg.activation(), 0).unwrap();
    let p = Stage2Problem::from_config(&cfg).unwrap();
    g.bench_function("stage2_shell_fixed", |b| b.iter(|| p.loss_and_grad(&net, 0).unwrap()));
    g.finish();
}

fn shell(c: &mut Criterion) {
    let geom = AnnulusGeometry::default();
    let bank = build_shell_bank(&geom, &ShellSpec::default(), 0.0).unwrap();
    let net = init_mlp(&[3, 32, 32, 1], Activation::Silu, 0).unwrap();
    c.bench_function("shell_probe", |b| b.iter(|| shell_resgrad_loss(&net, black_box(&bank)).unwrap()));
}

fn fd_reference(c: &mut Criterion) {
    let geom = AnnulusGeometry::default();
    let mut g = c.benchmark_group("fdref");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    g.bench_function("solve_9x32x41", |b| {
        b.iter_batched(
            || FdGrid::new(9, 32, 41),
            |grid| solve_reference(&geom, &FluxProfile::default(), grid, Inlet::Uniform(1.0), SolverOptions::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, jets, objectives, shell, fd_reference);
criterion_main!(benches);
