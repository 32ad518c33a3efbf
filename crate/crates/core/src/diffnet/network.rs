//! Dense scalar-output MLP with exact input derivatives and parameter gradients.
//!
//! Points are processed in chunks. For a chunk of `n` points and a jet layout of
//! width `C`, each layer holds a row-major `(neurons, n * C)` matrix whose column
//! `p * C + c` is jet component `c` of point `p`. Affine layers then act on every
//! component with a single GEMM (the bias only touches value columns), and the
//! activation applies the multivariate chain rule pointwise.
//!
//! The reverse pass walks the same structure backwards with hand-derived
//! adjoints, so any loss that can report its adjoint with respect to the output
//! jets gets an exact parameter gradient.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use super::field::{Field, InputMap};
use super::jet::{JetLayout, Jets, Partial};
use crate::error::{Error, Result};

/// Points per chunk in the batched passes.
const CHUNK_POINTS: usize = 128;

/// Tapes larger than this are recomputed chunk by chunk during the reverse pass
/// instead of being kept alive between the forward and reverse sweeps.
const TAPE_BUDGET_BYTES: usize = 768 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    /// Offset of each layer's weight block; its bias follows the weights.
    offsets: Vec<usize>,
}

/// Value, input gradient and requested pure second derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad: Vec<f64>,
    pub second: BTreeMap<usize, f64>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 3 {
        return Err(Error::Shape(
            "need an input size, at least one hidden layer and an output size".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Shape("layer sizes must be positive".into()));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Shape(format!(
            "output dimension must be 1, got {}",
            layer_sizes.last().unwrap()
        )));
    }
    Ok(())
}

fn layer_offsets(layer_sizes: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
    let mut total = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(total);
        total += w[0] * w[1] + w[1];
    }
    (offsets, total)
}

/// Layer sizes `[input, hidden x layers, 1]`.
pub fn mlp_sizes(input: usize, hidden_layers: usize, width: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(width, hidden_layers));
    sizes.push(1);
    sizes
}

/// Deterministic fan-in scaled uniform initialization (variance `1 / fan_in`),
/// zero biases.
pub fn init_mlp(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<NetworkParams> {
    validate_sizes(layer_sizes)?;
    let (offsets, total) = layer_offsets(layer_sizes);
    let mut params = vec![0.0; total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (l, w) in layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (3.0 / fan_in as f64).sqrt();
        let start = offsets[l];
        for p in &mut params[start..start + fan_in * fan_out] {
            *p = rng.gen_range(-limit..limit);
        }
    }
    Ok(NetworkParams {
        layer_sizes: layer_sizes.to_vec(),
        activation,
        params,
        offsets,
    })
}

impl NetworkParams {
    /// Rebuilds a network from a flat parameter vector (layer by layer: row-major
    /// `(out, in)` weights followed by the bias).
    pub fn from_parts(layer_sizes: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let (offsets, total) = layer_offsets(layer_sizes);
        if params.len() != total {
            return Err(Error::Dimension {
                expected: total,
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::non_finite("network parameters", Some(i)));
        }
        Ok(NetworkParams {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
            offsets,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn dims(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l], self.layer_sizes[l + 1])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (i, o) = self.dims(l);
        &self.params[self.offsets[l]..self.offsets[l] + i * o]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (i, o) = self.dims(l);
        let start = self.offsets[l] + i * o;
        &self.params[start..start + o]
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Plain forward pass at a single point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = self.dims(l);
            let w = self.weights(l);
            let b = self.bias(l);
            let last = l + 1 == self.n_layers();
            a = (0..n_out)
                .map(|o| {
                    let z = b[o] + (0..n_in).map(|i| w[o * n_in + i] * a[i]).sum::<f64>();
                    if last {
                        z
                    } else {
                        self.activation.value(z)
                    }
                })
                .collect();
        }
        Ok(a[0])
    }

    /// Value, full input gradient and the pure second derivatives along `second_dirs`.
    pub fn eval_with_input_derivs(&self, x: &[f64], second_dirs: &[usize]) -> Result<DerivativeBundle> {
        self.check_point(x)?;
        let dim = self.input_dim();
        let layout = JetLayout::pure_second(dim, second_dirs)?;
        let jets = self.jets(x, &layout)?;
        let row = jets.point(0);
        Ok(DerivativeBundle {
            value: row[0],
            grad: (0..dim).map(|i| row[layout.expect(Partial::d(i))]).collect(),
            second: second_dirs
                .iter()
                .map(|&i| (i, row[layout.expect(Partial::dd(i, i))]))
                .collect(),
        })
    }

    /// Forward pass that keeps what the reverse pass needs. `map`, when given,
    /// is applied to the points before they reach the network and folded into
    /// the reported derivatives.
    pub fn forward_taped<'a>(
        &'a self,
        points: &[f64],
        layout: &JetLayout,
        map: Option<&InputMap>,
    ) -> Result<TapedForward<'a>> {
        let dim = self.input_dim();
        check_points(points, dim, layout)?;
        let inner = match map {
            Some(m) => m.apply(points)?,
            None => points.to_vec(),
        };
        let n = inner.len() / dim;
        let keep = tape_bytes(self, layout, n) <= TAPE_BUDGET_BYTES;
        let width = layout.width();
        let mut out = vec![0.0; n * width];
        let mut tapes = Vec::new();
        for (ci, chunk) in inner.chunks(CHUNK_POINTS * dim).enumerate() {
            let start = ci * CHUNK_POINTS * width;
            let dst = &mut out[start..start + chunk.len() / dim * width];
            if keep {
                let mut tape = ChunkTape::default();
                self.forward_chunk(chunk, layout, dst, Some(&mut tape));
                tapes.push(tape);
            } else {
                self.forward_chunk(chunk, layout, dst, None);
            }
        }
        let comp_scale = map.map(|m| m.component_scales(layout));
        if let Some(scale) = &comp_scale {
            for row in out.chunks_mut(width) {
                for (v, s) in row.iter_mut().zip(scale) {
                    *v *= s;
                }
            }
        }
        Ok(TapedForward {
            net: self,
            layout: layout.clone(),
            points: inner,
            jets: Jets::new(n, width, out),
            tapes: keep.then_some(tapes),
            comp_scale,
        })
    }

    pub(crate) fn jets_mapped(&self, points: &[f64], layout: &JetLayout, map: Option<&InputMap>) -> Result<Jets> {
        let dim = self.input_dim();
        check_points(points, dim, layout)?;
        let owned;
        let inner = match map {
            Some(m) => {
                owned = m.apply(points)?;
                &owned[..]
            }
            None => points,
        };
        let n = inner.len() / dim;
        let width = layout.width();
        let mut out = vec![0.0; n * width];
        for (ci, chunk) in inner.chunks(CHUNK_POINTS * dim).enumerate() {
            let start = ci * CHUNK_POINTS * width;
            self.forward_chunk(chunk, layout, &mut out[start..start + chunk.len() / dim * width], None);
        }
        if let Some(m) = map {
            let scale = m.component_scales(layout);
            for row in out.chunks_mut(width) {
                for (v, s) in row.iter_mut().zip(&scale) {
                    *v *= s;
                }
            }
        }
        Ok(Jets::new(n, width, out))
    }

    fn forward_chunk(&self, pts: &[f64], layout: &JetLayout, out: &mut [f64], mut tape: Option<&mut ChunkTape>) {
        let dim = self.input_dim();
        let n = pts.len() / dim;
        let width = layout.width();
        let cols = n * width;

        let mut a = vec![0.0; dim * cols];
        for p in 0..n {
            for i in 0..dim {
                a[i * cols + p * width] = pts[p * dim + i];
                if let Some(c) = layout.first(i) {
                    a[i * cols + p * width + c] = 1.0;
                }
            }
        }

        let taping = tape.is_some();
        let n_sig = layout.max_order() + usize::from(taping);
        for l in 0..self.n_layers() {
            let (n_in, n_out) = self.dims(l);
            let mut z = vec![0.0; n_out * cols];
            gemm(n_out, n_in, cols, self.weights(l), n_in, 1, &a, cols, 1, 0.0, &mut z);
            for (o, &b) in self.bias(l).iter().enumerate() {
                let row = &mut z[o * cols..(o + 1) * cols];
                for p in 0..n {
                    row[p * width] += b;
                }
            }
            if l + 1 == self.n_layers() {
                out.copy_from_slice(&z);
                if let Some(t) = tape.as_deref_mut() {
                    t.inputs.push(a);
                }
                break;
            }
            let mut next = vec![0.0; n_out * cols];
            let mut sig = if taping { vec![0.0; n_out * n * n_sig] } else { Vec::new() };
            activate(self.activation, layout, &z, &mut next, &mut sig, n_sig, n);
            match tape.as_deref_mut() {
                Some(t) => {
                    t.inputs.push(std::mem::replace(&mut a, next));
                    t.zs.push(z);
                    t.sigs.push(sig);
                }
                None => a = next,
            }
        }
        if let Some(t) = tape {
            t.n_points = n;
            t.n_sig = n_sig;
        }
    }

    fn backward_chunk(&self, tape: &ChunkTape, layout: &JetLayout, seeds: &[f64], grad: &mut [f64]) {
        let n = tape.n_points;
        let width = layout.width();
        let cols = n * width;
        let mut zbar = seeds.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = self.dims(l);
            if l + 1 < self.n_layers() {
                let abar = zbar;
                zbar = vec![0.0; n_out * cols];
                activate_backward(layout, &tape.zs[l], &tape.sigs[l], tape.n_sig, n, &abar, &mut zbar);
            }
            let off = self.offsets[l];
            let (gw, gb) = grad[off..off + n_out * n_in + n_out].split_at_mut(n_out * n_in);
            gemm(n_out, cols, n_in, &zbar, cols, 1, &tape.inputs[l], 1, cols, 1.0, gw);
            for (o, g) in gb.iter_mut().enumerate() {
                let row = &zbar[o * cols..(o + 1) * cols];
                *g += (0..n).map(|p| row[p * width]).sum::<f64>();
            }
            if l > 0 {
                let mut abar = vec![0.0; n_in * cols];
                gemm(n_in, n_out, cols, self.weights(l), 1, n_in, &zbar, cols, 1, 0.0, &mut abar);
                zbar = abar;
            }
        }
    }
}

impl Field for NetworkParams {
    fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn jets(&self, points: &[f64], layout: &JetLayout) -> Result<Jets> {
        self.jets_mapped(points, layout, None)
    }
}

fn check_points(points: &[f64], dim: usize, layout: &JetLayout) -> Result<()> {
    if layout.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: layout.dim(),
        });
    }
    if !points.len().is_multiple_of(dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: points.len() % dim,
        });
    }
    Ok(())
}

fn tape_bytes(net: &NetworkParams, layout: &JetLayout, n: usize) -> usize {
    let per_point: usize = (0..net.n_layers())
        .map(|l| {
            let (i, o) = net.dims(l);
            i * layout.width() + o * (layout.width() + layout.max_order() + 1)
        })
        .sum();
    per_point * n * std::mem::size_of::<f64>()
}

#[derive(Debug, Default)]
struct ChunkTape {
    n_points: usize,
    n_sig: usize,
    /// Input matrix of every layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    zs: Vec<Vec<f64>>,
    /// Activation derivatives 1..=n_sig for every (neuron, point).
    sigs: Vec<Vec<f64>>,
}

/// Result of [`NetworkParams::forward_taped`].
pub struct TapedForward<'a> {
    net: &'a NetworkParams,
    layout: JetLayout,
    points: Vec<f64>,
    jets: Jets,
    tapes: Option<Vec<ChunkTape>>,
    comp_scale: Option<Vec<f64>>,
}

impl TapedForward<'_> {
    pub fn jets(&self) -> &Jets {
        &self.jets
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    /// Parameter gradient of a loss whose adjoint with respect to the output
    /// jets is `seeds` (same shape as the jets).
    pub fn backward(&self, seeds: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.net.n_params()];
        self.backward_into(seeds, &mut grad)?;
        Ok(grad)
    }

    /// Accumulates the parameter gradient into `grad`.
    pub fn backward_into(&self, seeds: &[f64], grad: &mut [f64]) -> Result<()> {
        let width = self.layout.width();
        if seeds.len() != self.jets.n_points() * width {
            return Err(Error::Dimension {
                expected: self.jets.n_points() * width,
                got: seeds.len(),
            });
        }
        if grad.len() != self.net.n_params() {
            return Err(Error::Dimension {
                expected: self.net.n_params(),
                got: grad.len(),
            });
        }
        let scaled;
        let seeds = match &self.comp_scale {
            Some(scale) => {
                scaled = seeds
                    .chunks(width)
                    .flat_map(|row| row.iter().zip(scale).map(|(s, f)| s * f))
                    .collect::<Vec<_>>();
                &scaled[..]
            }
            None => seeds,
        };
        let dim = self.net.input_dim();
        for (ci, chunk) in self.points.chunks(CHUNK_POINTS * dim).enumerate() {
            let start = ci * CHUNK_POINTS * width;
            let s = &seeds[start..start + chunk.len() / dim * width];
            if s.iter().all(|&v| v == 0.0) {
                continue;
            }
            match &self.tapes {
                Some(tapes) => self.net.backward_chunk(&tapes[ci], &self.layout, s, grad),
                None => {
                    let mut tape = ChunkTape::default();
                    let mut scratch = vec![0.0; s.len()];
                    self.net.forward_chunk(chunk, &self.layout, &mut scratch, Some(&mut tape));
                    self.net.backward_chunk(&tape, &self.layout, s, grad);
                }
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::non_finite("parameter gradient", Some(i)));
        }
        Ok(())
    }
}

/// Evaluates a loss built from output jets and returns it with its exact
/// parameter gradient. `loss` returns the value and its adjoint with respect to
/// every output jet component.
pub fn loss_param_gradient<F>(net: &NetworkParams, points: &[f64], layout: &JetLayout, loss: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&Jets) -> Result<(f64, Vec<f64>)>,
{
    let taped = net.forward_taped(points, layout, None)?;
    let (value, seeds) = loss(taped.jets())?;
    if !value.is_finite() {
        return Err(Error::non_finite("loss", None));
    }
    if let Some(i) = seeds.iter().position(|s| !s.is_finite()) {
        return Err(Error::non_finite("loss adjoint", Some(i)));
    }
    let grad = taped.backward(&seeds)?;
    Ok((value, grad))
}

fn activate(act: Activation, layout: &JetLayout, z: &[f64], a: &mut [f64], sig: &mut [f64], n_sig: usize, n: usize) {
    let width = layout.width();
    let mut s = [0.0; 5];
    for (r, (zrow, arow)) in z.chunks(n * width).zip(a.chunks_mut(n * width)).enumerate() {
        for p in 0..n {
            let zc = &zrow[p * width..(p + 1) * width];
            let ac = &mut arow[p * width..(p + 1) * width];
            act.derivatives(zc[0], &mut s[..=n_sig]);
            ac[0] = s[0];
            if let Some(pure) = &layout.pure {
                for &c in &pure.firsts {
                    ac[c] = s[1] * zc[c];
                }
                for &(c, f) in &pure.seconds {
                    ac[c] = s[2] * zc[f] * zc[f] + s[1] * zc[c];
                }
            } else {
                for (c, terms) in layout.terms.iter().enumerate().skip(1) {
                    ac[c] = terms
                        .iter()
                        .map(|t| s[t.sigma as usize] * t.factors().iter().map(|&f| zc[f as usize]).product::<f64>())
                        .sum();
                }
            }
            if !sig.is_empty() {
                let dst = (r * n + p) * n_sig;
                sig[dst..dst + n_sig].copy_from_slice(&s[1..=n_sig]);
            }
        }
    }
}

fn activate_backward(layout: &JetLayout, z: &[f64], sig: &[f64], n_sig: usize, n: usize, abar: &[f64], zbar: &mut [f64]) {
    let width = layout.width();
    // s[k] = act^(k); s[0] is never read by the adjoint.
    let mut s = [0.0; 5];
    for (r, ((zrow, arow), brow)) in z
        .chunks(n * width)
        .zip(abar.chunks(n * width))
        .zip(zbar.chunks_mut(n * width))
        .enumerate()
    {
        for p in 0..n {
            let zc = &zrow[p * width..(p + 1) * width];
            let ab = &arow[p * width..(p + 1) * width];
            let zb = &mut brow[p * width..(p + 1) * width];
            let src = (r * n + p) * n_sig;
            s[1..=n_sig].copy_from_slice(&sig[src..src + n_sig]);
            if let Some(pure) = &layout.pure {
                zb[0] = ab[0] * s[1];
                for &c in &pure.firsts {
                    zb[c] = ab[c] * s[1];
                    zb[0] += ab[c] * s[2] * zc[c];
                }
                for &(c, f) in &pure.seconds {
                    zb[c] = ab[c] * s[1];
                    zb[f] += 2.0 * ab[c] * s[2] * zc[f];
                    zb[0] += ab[c] * (s[3] * zc[f] * zc[f] + s[2] * zc[c]);
                }
            } else {
                zb.fill(0.0);
                for (c, terms) in layout.terms.iter().enumerate() {
                    let g = ab[c];
                    if g == 0.0 {
                        continue;
                    }
                    for t in terms {
                        let f = t.factors();
                        let sg = t.sigma as usize;
                        match f.len() {
                            0 => zb[0] += g * s[sg + 1],
                            1 => {
                                let f0 = f[0] as usize;
                                zb[0] += g * s[sg + 1] * zc[f0];
                                zb[f0] += g * s[sg];
                            }
                            2 => {
                                let (f0, f1) = (f[0] as usize, f[1] as usize);
                                zb[0] += g * s[sg + 1] * zc[f0] * zc[f1];
                                zb[f0] += g * s[sg] * zc[f1];
                                zb[f1] += g * s[sg] * zc[f0];
                            }
                            _ => {
                                let (f0, f1, f2) = (f[0] as usize, f[1] as usize, f[2] as usize);
                                zb[0] += g * s[sg + 1] * zc[f0] * zc[f1] * zc[f2];
                                zb[f0] += g * s[sg] * zc[f1] * zc[f2];
                                zb[f1] += g * s[sg] * zc[f0] * zc[f2];
                                zb[f2] += g * s[sg] * zc[f0] * zc[f1];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b + beta * c` for an `(m, n)` row-major `c`; `a` is `(m, k)` and `b`
/// is `(k, n)`, both addressed through explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_mlp(&[2, 4, 1], Activation::Tanh, 7).unwrap();
        let b = init_mlp(&[2, 4, 1], Activation::Tanh, 7).unwrap();
        assert_eq!(a, b);
        let c = init_mlp(&[2, 4, 1], Activation::Tanh, 8).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(init_mlp(&[2, 4, 2], Activation::Tanh, 0).is_err());
        assert!(init_mlp(&[2, 1], Activation::Tanh, 0).is_err());
        assert!(init_mlp(&[2, 0, 1], Activation::Tanh, 0).is_err());
    }

    #[test]
    fn paper_architectures_chain() {
        let big = init_mlp(&mlp_sizes(3, 16, 128), Activation::Silu, 0).unwrap();
        assert_eq!(big.n_layers(), 17);
        assert_eq!(big.layer_sizes()[0], 3);
        assert!(big.layer_sizes()[1..17].iter().all(|&w| w == 128));
        assert_eq!(big.weights(0).len(), 128 * 3);
        assert_eq!(big.weights(16).len(), 128);
        let small = init_mlp(&mlp_sizes(2, 6, 96), Activation::Tanh, 1).unwrap();
        assert_eq!(small.layer_sizes(), &[2, 96, 96, 96, 96, 96, 96, 1]);
    }

    #[test]
    fn fan_in_scaling() {
        let net = init_mlp(&[50, 50, 1], Activation::Tanh, 3).unwrap();
        let lim = (3.0f64 / 50.0).sqrt();
        assert!(net.weights(0).iter().all(|w| w.abs() < lim));
        let var = net.weights(0).iter().map(|w| w * w).sum::<f64>() / 2500.0;
        assert!((var - 1.0 / 50.0).abs() < 0.003, "{var}");
        assert!(net.bias(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_network_is_zero() {
        let net = NetworkParams::from_parts(&[2, 3, 1], Activation::Tanh, vec![0.0; 13]).unwrap();
        assert_eq!(net.eval(&[0.3, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn one_hidden_unit_by_hand() {
        // hidden: tanh(2 x1 + 3 x2 + 1); output weight 1, bias 0
        let net = NetworkParams::from_parts(&[2, 1, 1], Activation::Tanh, vec![2.0, 3.0, 1.0, 1.0, 0.0]).unwrap();
        let (x1, x2) = (0.01, -0.02);
        let want = (2.0 * x1 + 3.0 * x2 + 1.0f64).tanh();
        assert!((net.eval(&[x1, x2]).unwrap() - want).abs() < 1e-15);
        let b = net.eval_with_input_derivs(&[x1, x2], &[0, 1]).unwrap();
        let t = want;
        let s = 1.0 - t * t;
        assert!((b.grad[0] - 2.0 * s).abs() < 1e-14);
        assert!((b.grad[1] - 3.0 * s).abs() < 1e-14);
        assert!((b.second[&0] - 4.0 * (-2.0 * t * s)).abs() < 1e-14);
        assert!((b.second[&1] - 9.0 * (-2.0 * t * s)).abs() < 1e-14);
    }

    #[test]
    fn constant_network_has_zero_derivatives() {
        // all weights zero, output bias 0.7
        let mut p = vec![0.0; 2 * 4 + 4 + 4 + 1];
        *p.last_mut().unwrap() = 0.7;
        let net = NetworkParams::from_parts(&[2, 4, 1], Activation::Silu, p).unwrap();
        let b = net.eval_with_input_derivs(&[0.2, 0.9], &[0, 1]).unwrap();
        assert_eq!(b.value, 0.7);
        assert!(b.grad.iter().all(|&g| g == 0.0));
        assert!(b.second.values().all(|&g| g == 0.0));
        assert_eq!(b.second.len(), 2);
    }

    #[test]
    fn bundle_contains_exactly_requested_seconds() {
        let net = init_mlp(&[3, 5, 1], Activation::Tanh, 1).unwrap();
        let b = net.eval_with_input_derivs(&[0.1, 0.2, 0.3], &[2]).unwrap();
        assert_eq!(b.second.keys().copied().collect::<Vec<_>>(), vec![2]);
        assert!(net.eval_with_input_derivs(&[0.1, 0.2], &[0]).is_err());
    }

    #[test]
    fn batched_values_match_pointwise_eval() {
        let net = init_mlp(&[2, 9, 7, 1], Activation::Silu, 11).unwrap();
        let pts: Vec<f64> = (0..600).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let jets = net.jets(&pts, &JetLayout::pure_second(2, &[0, 1]).unwrap()).unwrap();
        for p in 0..300 {
            let v = net.eval(&pts[2 * p..2 * p + 2]).unwrap();
            assert!((jets.get(p, 0) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn recomputed_tape_gives_same_gradient() {
        let net = init_mlp(&[2, 6, 6, 1], Activation::Tanh, 5).unwrap();
        let layout = JetLayout::laplacian_gradient(2);
        let pts: Vec<f64> = (0..400).map(|i| (i as f64 * 0.37).sin()).collect();
        let taped = net.forward_taped(&pts, &layout, None).unwrap();
        let seeds: Vec<f64> = (0..taped.jets().as_slice().len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let g1 = taped.backward(&seeds).unwrap();
        let untaped = TapedForward {
            net: &net,
            layout: layout.clone(),
            points: pts.clone(),
            jets: taped.jets().clone(),
            tapes: None,
            comp_scale: None,
        };
        let g2 = untaped.backward(&seeds).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn final_layer_scaling_scales_every_derivative() {
        let net = init_mlp(&[2, 5, 5, 1], Activation::Tanh, 2).unwrap();
        let mut scaled = net.clone();
        let last = scaled.n_layers() - 1;
        let off = scaled.offsets[last];
        for w in &mut scaled.params_mut()[off..off + 6] {
            *w *= -2.5;
        }
        let layout = JetLayout::laplacian_gradient(2);
        let x = [0.3, 0.8];
        let a = net.jets(&x, &layout).unwrap();
        let b = scaled.jets(&x, &layout).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((v - (-2.5) * u).abs() <= 1e-14 * (1.0 + u.abs()));
        }
    }
}
