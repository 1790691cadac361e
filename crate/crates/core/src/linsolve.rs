//! Sparse SPD systems from the slab discretization: a banded Cholesky
//! factorization and a conjugate-gradient solver preconditioned by
//! tridiagonal line solves.

use crate::error::{Error, Result};

/// Symmetric matrix in compressed rows. Each row lists its off-diagonal
/// couplings (column, value) and the diagonal separately.
#[derive(Clone, Debug, Default)]
pub struct SparseSym {
    pub diag: Vec<f64>,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            let mut acc = self.diag[i] * x[i];
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            out[i] = acc;
        }
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.dim())
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.dim()];
        self.apply(x, &mut ax);
        let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Lower band factor L with A = L Lᵀ; row i stores columns i−bw..=i.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // column k of row i lives at i*w + (k + bw - i)
        for i in 0..n {
            l[i * w + bw] = a.diag[i];
            for (j, v) in a.row(i) {
                if j < i {
                    l[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                let klo = k.saturating_sub(bw).max(lo);
                let mut acc = l[i * w + (k + bw - i)];
                let (ri, rk) = (i * w + bw - i, k * w + bw - k);
                for c in klo..k {
                    acc -= l[ri + c] * l[rk + c];
                }
                l[i * w + (k + bw - i)] = acc / l[k * w + bw];
            }
            let ri = i * w + bw - i;
            let mut d = l[i * w + bw];
            for c in lo..i {
                d -= l[ri + c] * l[ri + c];
            }
            if !(d > 0.0) {
                return Err(Error::Precondition(format!(
                    "matrix not positive definite at row {i}"
                )));
            }
            l[i * w + bw] = d.sqrt();
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let mut acc = x[i];
            for c in lo..i {
                acc -= self.l[ri + c] * x[c];
            }
            x[i] = acc / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            for c in lo..i {
                x[c] -= self.l[ri + c] * xi;
            }
        }
        x
    }

    /// Entries held by the factor.
    pub fn storage(n: usize, bw: usize) -> usize {
        n * (bw + 1)
    }
}

/// Tridiagonal blocks along `line_prev`: unknown i couples to i−1 in its
/// line when `sub[i]` is nonzero.
#[derive(Clone, Debug)]
pub struct LinePreconditioner {
    // Thomas factors
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    sub: Vec<f64>,
}

impl LinePreconditioner {
    pub fn new(a: &SparseSym, line_link: &[bool]) -> Self {
        let n = a.dim();
        let mut sub = vec![0.0; n];
        for i in 1..n {
            if line_link[i] {
                sub[i] = a.row(i).find(|&(j, _)| j == i - 1).map(|(_, v)| v).unwrap_or(0.0);
            }
        }
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let sup = if i + 1 < n { sub[i + 1] } else { 0.0 };
            let d = a.diag[i] - if i > 0 { sub[i] * c_prime[i - 1] } else { 0.0 };
            denom[i] = d;
            c_prime[i] = sup / d;
        }
        Self { c_prime, denom, sub }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let prev = if i > 0 { self.sub[i] * z[i - 1] } else { 0.0 };
            z[i] = (r[i] - prev) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            z[i] -= self.c_prime[i] * z[i + 1];
        }
    }
}

/// Preconditioned conjugate gradients from a zero start, stopping at
/// relative residual `tol`.
pub fn pcg(
    a: &SparseSym,
    pre: &LinePreconditioner,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok((x, it));
        }
        pre.apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence { iterations: max_iter, detail: "conjugate gradients".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1D Dirichlet Laplacian plus a long-range coupling at distance 3.
    fn test_matrix(n: usize) -> SparseSym {
        let mut m = SparseSym { diag: vec![4.5; n], row_start: vec![0], ..Default::default() };
        for i in 0..n {
            for (j, v) in [(i.wrapping_sub(3), -0.25), (i.wrapping_sub(1), -1.0), (i + 1, -1.0), (i + 3, -0.25)] {
                if j < n {
                    m.cols.push(j);
                    m.vals.push(v);
                }
            }
            m.row_start.push(m.cols.len());
        }
        m
    }

    #[test]
    fn band_cholesky_solves() {
        let a = test_matrix(50);
        assert_eq!(a.bandwidth(), 3);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = BandCholesky::factor(&a).unwrap().solve(&b);
        assert!(a.relative_residual(&x, &b) < 1e-14);
    }

    #[test]
    fn pcg_matches_direct() {
        let a = test_matrix(80);
        let b: Vec<f64> = (0..80).map(|i| 1.0 + (i % 7) as f64).collect();
        let link: Vec<bool> = (0..80).map(|i| i % 10 != 0).collect();
        let pre = LinePreconditioner::new(&a, &link);
        let (x, _) = pcg(&a, &pre, &b, 1e-13, 500).unwrap();
        let y = BandCholesky::factor(&a).unwrap().solve(&b);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-10));
    }
}
