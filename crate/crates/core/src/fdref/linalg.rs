//! CSR matrices, ILU(0) and preconditioned BiCGSTAB.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Row-by-row assembly; duplicate columns within a row are summed.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        CsrBuilder {
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
            scratch: Vec::new(),
        }
    }

    pub fn add(&mut self, col: usize, val: f64) {
        self.scratch.push((col, val));
    }

    pub fn finish_row(&mut self) {
        self.scratch.sort_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &self.scratch {
            if c == last {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = c;
            }
        }
        self.scratch.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix {
            n: self.row_ptr.len() - 1,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            y[i] = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j)
            .map(|p| self.vals[self.row_ptr[i] + p])
            .unwrap_or(0.0)
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let row = &lu.cols[lu.row_ptr[i]..lu.row_ptr[i + 1]];
            *d = lu.row_ptr[i]
                + row
                    .binary_search(&i)
                    .map_err(|_| Error::invalid(format!("row {i} has no diagonal entry")))?;
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.cols[p]] = p;
            }
            for p in start..diag[i] {
                let k = lu.cols[p];
                let pivot = lu.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::invalid(format!("zero pivot in row {k}")));
                }
                lu.vals[p] /= pivot;
                let lik = lu.vals[p];
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    if pos[j] != usize::MAX {
                        lu.vals[pos[j]] -= lik * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.cols[p]] = usize::MAX;
            }
            if lu.vals[diag[i]] == 0.0 {
                return Err(Error::invalid(format!("zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `L U x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = x[i];
            for p in lu.row_ptr[i]..self.diag[i] {
                acc -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = x[i];
            for p in self.diag[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = acc / lu.vals[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true relative residual `|b - A x| / |b|`.
    pub residual: f64,
    /// Relative residual estimate after every iteration.
    pub history: Vec<f64>,
}

/// ILU(0)-preconditioned BiCGSTAB from `x = 0` until `|b - A x| <= tol |b|`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, residual: 0.0, history: vec![] }));
    }
    let m = Ilu0::new(a)?;
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = Vec::new();
    let true_residual = |x: &[f64]| {
        let mut ax = vec![0.0; n];
        a.mul_vec(x, &mut ax);
        norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>()) / bnorm
    };

    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            // breakdown: restart the shadow residual
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        p_hat.copy_from_slice(&p);
        m.apply(&mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        alpha = rho_new / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm(&s) / bnorm;
        if snorm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            history.push(snorm);
            let res = true_residual(&x);
            if res <= tol {
                return Ok((x, SolveReport { iterations: it, residual: res, history }));
            }
            r = b.iter().zip({
                let mut ax = vec![0.0; n];
                a.mul_vec(&x, &mut ax);
                ax
            }.iter()).map(|(b, ax)| b - ax).collect();
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
            continue;
        }
        s_hat.copy_from_slice(&s);
        m.apply(&mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            let res = true_residual(&x);
            if res <= tol {
                return Ok((x, SolveReport { iterations: it, residual: res, history }));
            }
            r = {
                let mut ax = vec![0.0; n];
                a.mul_vec(&x, &mut ax);
                b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
            };
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
        }
    }
    Err(Error::NoConvergence {
        iterations: history.len(),
        residual: true_residual(&x),
        history,
    })
}
