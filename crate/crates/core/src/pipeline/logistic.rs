//! L2-regularised logistic regression.
//!
//! Objective, with `n` rows, weights `w` and unpenalised intercepts `b`:
//!
//! ```text
//! binary:       L = 1/n * sum_i [ log(1 + e^{z_i}) - y_i z_i ] + l2 * |w|^2,   z_i = x_i.w + b
//! multinomial:  L = 1/n * sum_i [ logsumexp_k z_ik - z_{i,y_i} ] + l2 * |W|^2,   z_ik = x_i.w_k + b_k
//! ```
//!
//! Binary problems are solved by damped Newton steps, multinomial ones by
//! L-BFGS. Both start from zero and are fully deterministic.

use serde::{Deserialize, Serialize};

use super::matrix::{cholesky_solve, dot, norm, Matrix};

/// Parameter layout: class-major blocks of `cols + 1` values, the last of
/// each block being the intercept. Binary problems have a single block
/// scoring the positive class (index 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub params: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// The regularised cross-entropy objective over a fixed design matrix.
pub struct LogisticObjective<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub l2: f64,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<'a> LogisticObjective<'a> {
    pub fn n_params(&self) -> usize {
        self.blocks() * (self.x.cols() + 1)
    }

    fn blocks(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }

    fn penalty(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.cols();
        let mut value = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (i, p) in params.iter().enumerate() {
            if i % (d + 1) != d {
                value += self.l2 * p * p;
                grad[i] = 2.0 * self.l2 * p;
            }
        }
        (value, grad)
    }

    /// Objective value and its analytic gradient.
    pub fn value_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let d = self.x.cols();
        let n = self.x.rows() as f64;
        let (mut value, mut grad) = self.penalty(params);
        let mut loss = 0.0;
        if self.n_classes == 2 {
            let (w, b) = params.split_at(d);
            for r in 0..self.x.rows() {
                let xr = self.x.row(r);
                let z = dot(xr, w) + b[0];
                let y = (self.y[r] == 1) as u8 as f64;
                loss += log1p_exp(z) - y * z;
                let g = (sigmoid(z) - y) / n;
                for (gj, xj) in grad[..d].iter_mut().zip(xr) {
                    *gj += g * xj;
                }
                grad[d] += g;
            }
        } else {
            let k = self.n_classes;
            let mut z = vec![0.0; k];
            for r in 0..self.x.rows() {
                let xr = self.x.row(r);
                for (c, zc) in z.iter_mut().enumerate() {
                    let block = &params[c * (d + 1)..(c + 1) * (d + 1)];
                    *zc = dot(xr, &block[..d]) + block[d];
                }
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
                loss += m + sum.ln() - z[self.y[r]];
                for c in 0..k {
                    let p = (z[c] - m).exp() / sum;
                    let g = (p - (c == self.y[r]) as u8 as f64) / n;
                    let block = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                    for (gj, xj) in block[..d].iter_mut().zip(xr) {
                        *gj += g * xj;
                    }
                    block[d] += g;
                }
            }
        }
        value += loss / n;
        (value, grad)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.value_grad(params).0
    }

    /// Hessian of the binary objective (row-major, `(d+1)^2`).
    fn binary_hessian(&self, params: &[f64]) -> Vec<f64> {
        let d = self.x.cols();
        let m = d + 1;
        let n = self.x.rows() as f64;
        let mut h = vec![0.0; m * m];
        let mut xa = vec![0.0; m];
        for r in 0..self.x.rows() {
            let xr = self.x.row(r);
            xa[..d].copy_from_slice(xr);
            xa[d] = 1.0;
            let p = sigmoid(dot(xr, &params[..d]) + params[d]);
            let s = p * (1.0 - p) / n;
            for i in 0..m {
                let si = s * xa[i];
                if si == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    h[i * m + j] += si * xa[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                h[j * m + i] = h[i * m + j];
            }
        }
        for i in 0..d {
            h[i * m + i] += 2.0 * self.l2;
        }
        h
    }
}

pub struct FitOptions {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Fit from zero initialisation. Stops once the gradient's Euclidean norm is
/// at most `tol`; otherwise returns the best iterate seen with
/// `converged = false`.
pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, opts: &FitOptions) -> LogisticModel {
    assert!(n_classes >= 2, "need two classes");
    let obj = LogisticObjective { x, y, n_classes, l2: opts.l2 };
    let (params, converged, iterations, grad_norm) =
        if n_classes == 2 { newton(&obj, opts) } else { lbfgs(&obj, opts) };
    LogisticModel { n_classes, n_features: x.cols(), params, converged, iterations, grad_norm }
}

fn newton(obj: &LogisticObjective, opts: &FitOptions) -> (Vec<f64>, bool, usize, f64) {
    let m = obj.n_params();
    let mut w = vec![0.0; m];
    let (mut f, mut g) = obj.value_grad(&w);
    for it in 0..opts.max_iter {
        let gn = norm(&g);
        if gn <= opts.tol {
            return (w, true, it, gn);
        }
        let mut h = obj.binary_hessian(&w);
        let mut jitter = 0.0;
        let step = loop {
            if let Some(s) = cholesky_solve(&h, &g, m) {
                break s;
            }
            let add = if jitter == 0.0 { 1e-10 } else { jitter * 9.0 };
            for i in 0..m {
                h[i * m + i] += add;
            }
            jitter += add;
        };
        let mut t = 1.0;
        let slope = dot(&g, &step);
        let mut accepted = false;
        for _ in 0..50 {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect();
            let fc = obj.value(&cand);
            if fc <= f - 1e-4 * t * slope {
                w = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (w, false, it, gn);
        }
        let next = obj.value_grad(&w);
        f = next.0;
        g = next.1;
    }
    let gn = norm(&g);
    (w, gn <= opts.tol, opts.max_iter, gn)
}

fn lbfgs(obj: &LogisticObjective, opts: &FitOptions) -> (Vec<f64>, bool, usize, f64) {
    const MEMORY: usize = 10;
    let m = obj.n_params();
    let mut w = vec![0.0; m];
    let (mut f, mut g) = obj.value_grad(&w);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let max_iter = opts.max_iter.max(1) * 5;
    for it in 0..max_iter {
        let gn = norm(&g);
        if gn <= opts.tol {
            return (w, true, it, gn);
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push((a, rho));
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / gn.max(1.0),
        };
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &q);
        if !(slope > 0.0) {
            q = g.clone();
            slope = dot(&g, &g);
            s_hist.clear();
            y_hist.clear();
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&q).map(|(wi, qi)| wi - t * qi).collect();
            let (fc, gc) = obj.value_grad(&cand);
            if fc <= f - 1e-4 * t * slope {
                next = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((wn, fn_, gn_new)) = next else {
            return (w, false, it, gn);
        };
        let s: Vec<f64> = wn.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        w = wn;
        f = fn_;
        g = gn_new;
    }
    let gn = norm(&g);
    (w, gn <= opts.tol, max_iter, gn)
}

impl LogisticModel {
    /// Index of the most probable class; ties go to the lower index.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let d = self.n_features;
        if self.n_classes == 2 {
            let z = dot(x, &self.params[..d]) + self.params[d];
            usize::from(z > 0.0)
        } else {
            let mut best = (0, f64::NEG_INFINITY);
            for c in 0..self.n_classes {
                let block = &self.params[c * (d + 1)..(c + 1) * (d + 1)];
                let z = dot(x, &block[..d]) + block[d];
                if z > best.1 {
                    best = (c, z);
                }
            }
            best.0
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}
