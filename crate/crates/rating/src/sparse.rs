//! Row-compressed least-squares systems and CGLS.

use serde::{Deserialize, Serialize};

/// `min ||A x - b||^2` with `A` stored by rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeastSquares {
    pub ncols: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LeastSquares {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_start: vec![0],
            ..Default::default()
        }
    }

    /// Appends a row, summing repeated columns and dropping zeros.
    pub fn push_row(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let start = self.cols.len();
        for &(j, v) in entries {
            debug_assert!(j < self.ncols);
            match self.cols[start..].iter().position(|&c| c == j) {
                Some(k) => self.vals[start + k] += v,
                None => {
                    self.cols.push(j);
                    self.vals.push(v);
                }
            }
        }
        let mut k = start;
        while k < self.cols.len() {
            if self.vals[k] == 0.0 {
                self.cols.swap_remove(k);
                self.vals.swap_remove(k);
            } else {
                k += 1;
            }
        }
        self.row_start.push(self.cols.len());
        self.rhs.push(rhs);
    }

    pub fn nrows(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    pub fn tmul(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
    }

    /// Columns with no non-zero entry.
    pub fn empty_columns(&self) -> Vec<usize> {
        let mut seen = vec![false; self.ncols];
        for &j in &self.cols {
            seen[j] = true;
        }
        (0..self.ncols).filter(|&j| !seen[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CglsReport {
    pub iterations: usize,
    /// `||A^T (b - A x)|| / ||A^T b||` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Conjugate gradients on the normal equations, started from zero.
pub fn cgls(system: &LeastSquares, tol: f64, max_iterations: usize) -> (Vec<f64>, CglsReport) {
    let n = system.ncols;
    let mut x = vec![0.0; n];
    let mut r = system.rhs.clone();
    let mut s = vec![0.0; n];
    system.tmul(&r, &mut s);
    let s0 = norm2(&s).sqrt();
    if s0 == 0.0 {
        return (
            x,
            CglsReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut p = s.clone();
    let mut q = vec![0.0; system.nrows()];
    let mut gamma = norm2(&s);
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iterations {
        iterations += 1;
        system.mul(&p, &mut q);
        let qq = norm2(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        system.tmul(&r, &mut s);
        let gamma_next = norm2(&s);
        rel = gamma_next.sqrt() / s0;
        if rel <= tol {
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    // Recompute from scratch so the report does not rely on the recurrence.
    let mut ax = vec![0.0; system.nrows()];
    system.mul(&x, &mut ax);
    let resid: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    system.tmul(&resid, &mut s);
    let relative_residual = norm2(&s).sqrt() / s0;
    let converged = rel <= tol;
    (
        x,
        CglsReport {
            iterations,
            relative_residual,
            converged,
        },
    )
}
