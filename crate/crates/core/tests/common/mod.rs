//! Central finite-difference oracles shared by the integration tests.
#![allow(dead_code)]

use resgrad::diffnet::{init_mlp, Activation, NetworkParams};

/// `d f / d x_i` by a central difference with step `h`.
pub fn fd_partial(f: &impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|i| fd_partial(f, x, i, h)).collect()
}

/// `|a - b| <= rel * |b| + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}

/// Asserts elementwise closeness and reports the first mismatch.
pub fn assert_all_close(got: &[f64], want: &[f64], rel: f64, abs: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length");
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(close(*g, *w, rel, abs), "{what}[{k}]: got {g:e}, oracle {w:e}");
    }
}

/// Small random network with the given activation.
pub fn small_net(input: usize, hidden: &[usize], act: Activation, seed: u64) -> NetworkParams {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    init_mlp(&sizes, act, seed).expect("valid sizes")
}

/// The same network with its parameters replaced.
pub fn with_params(net: &NetworkParams, params: &[f64]) -> NetworkParams {
    NetworkParams::from_parts(net.layer_sizes(), net.activation(), params.to_vec()).expect("same shape")
}

/// Parameter-space FD gradient of `loss`.
pub fn fd_param_gradient(net: &NetworkParams, loss: impl Fn(&NetworkParams) -> f64, h: f64) -> Vec<f64> {
    let f = |p: &[f64]| loss(&with_params(net, p));
    fd_gradient(&f, net.params(), h)
}
