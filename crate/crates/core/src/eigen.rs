//! Dense symmetric eigendecomposition.
//!
//! `symmetric_eigen` reduces the matrix to tridiagonal form with Householder
//! reflections and diagonalizes it with the implicit-shift QL iteration,
//! accumulating the orthogonal transform so eigenvectors come out orthonormal.
//! Eigenpairs are returned sorted by ascending eigenvalue.
//!
//! `jacobi_eigen` is a slow cyclic-Jacobi reference used as an independent
//! cross-check in tests.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigenpairs of a symmetric matrix; column `i` of `vectors` pairs with
/// `values[i]`, eigenvalues ascending.
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Tensor,
}

impl Eigen {
    /// Column `i` as an owned vector.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.vectors.rows())
            .map(|r| self.vectors.get(r, i))
            .collect()
    }
}

const MAX_QL_ITERATIONS: usize = 64;

pub fn symmetric_eigen(a: &Tensor) -> Result<Eigen> {
    if a.rows() != a.cols() {
        return Err(Error::validation(format!(
            "symmetric_eigen requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: Tensor::zeros(0, 0),
        });
    }
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut z, &mut d, &mut e);
    ql_implicit(&mut d, &mut e, &mut z)?;

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Tensor::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_col, z.get(r, old_col));
        }
    }
    Ok(Eigen { values, vectors })
}

/// Largest residual `max_i ||A v_i - lambda_i v_i||_2` over all eigenpairs.
pub fn max_residual(a: &Tensor, eig: &Eigen) -> f64 {
    let n = a.rows();
    let mut worst: f64 = 0.0;
    for (i, &lambda) in eig.values.iter().enumerate() {
        let mut norm_sq = 0.0;
        for r in 0..n {
            let mut av = 0.0;
            for c in 0..n {
                av += a.get(r, c) * eig.vectors.get(c, i);
            }
            let resid = av - lambda * eig.vectors.get(r, i);
            norm_sq += resid * resid;
        }
        worst = worst.max(norm_sq.sqrt());
    }
    worst
}

/// Householder reduction to tridiagonal form, accumulating the transform in
/// `z` so that `z` holds the orthogonal matrix Q with Q^T A Q tridiagonal.
fn tridiagonalize(z: &mut Tensor, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| z.get(i, k).abs()).sum();
            if scale == 0.0 {
                e[i] = z.get(i, l);
            } else {
                for k in 0..=l {
                    let v = z.get(i, k) / scale;
                    z.set(i, k, v);
                    h += v * v;
                }
                let mut f = z.get(i, l);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z.set(i, l, f - g);
                f = 0.0;
                for j in 0..=l {
                    z.set(j, i, z.get(i, j) / h);
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z.get(j, k) * z.get(i, k);
                    }
                    for k in (j + 1)..=l {
                        g_acc += z.get(k, j) * z.get(i, k);
                    }
                    e[j] = g_acc / h;
                    f += e[j] * z.get(i, j);
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let fj = z.get(i, j);
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        let v = z.get(j, k) - fj * e[k] - gj * z.get(i, k);
                        z.set(j, k, v);
                    }
                }
            }
        } else {
            e[i] = z.get(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z.get(i, k) * z.get(k, j);
                }
                for k in 0..i {
                    let v = z.get(k, j) - g * z.get(k, i);
                    z.set(k, j, v);
                }
            }
        }
        d[i] = z.get(i, i);
        z.set(i, i, 1.0);
        for j in 0..i {
            z.set(j, i, 0.0);
            z.set(i, j, 0.0);
        }
    }
}

/// Implicit-shift QL iteration on the tridiagonal (d, e), rotating the
/// accumulated transform `z` so its columns become eigenvectors.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut Tensor) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::numeric(format!(
                    "eigensolver: QL iteration did not converge for index {l} \
                     (off-diagonal {:.3e} after {MAX_QL_ITERATIONS} sweeps)",
                    e[l].abs()
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z.get(k, i + 1);
                    z.set(k, i + 1, s * z.get(k, i) + c * f);
                    z.set(k, i, c * z.get(k, i) - s * f);
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition. Quadratically convergent but O(n^3) per
/// sweep; kept as an independent reference for validating `symmetric_eigen`.
pub fn jacobi_eigen(a: &Tensor) -> Result<Eigen> {
    if a.rows() != a.cols() {
        return Err(Error::validation("jacobi_eigen requires a square matrix"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Tensor::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Tensor::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Ok(Eigen { values, vectors })
}
