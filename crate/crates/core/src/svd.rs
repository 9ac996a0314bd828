//! Truncated singular value decomposition.
//!
//! Two backends sit behind [`partial_svd`]: a one-sided Jacobi SVD (exact
//! to machine precision, used for small matrices and near-full target
//! ranks) and a randomized subspace iteration with oversampling and power
//! steps for large matrices with small target rank. Both are fully
//! deterministic: the randomized path draws its test matrix from a fixed
//! internal stream key.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{kernel, DenseMatrix};
use crate::rng::StreamKey;

/// Thin SVD truncated to rank `r`: `u` is `d1 x r`, `v` is `d2 x r`,
/// `s` nonincreasing and nonnegative with `u diag(s) vᵀ ≈ m`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    /// Reconstructs `u diag(s) vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (d1, r) = self.u.dims();
        let d2 = self.v.rows();
        let mut out = DenseMatrix::zeros(d1, d2);
        let mut us = self.u.clone();
        for i in 0..d1 {
            for (k, sk) in self.s.iter().enumerate() {
                let val = us.get(i, k) * sk;
                us.set(i, k, val);
            }
        }
        for i in 0..d1 {
            let ui = us.row(i);
            let row = out.row_mut(i);
            for (j, rj) in row.iter_mut().enumerate() {
                *rj = kernel::dot(ui, self.v.row(j));
            }
        }
        let _ = r;
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 48;
const JACOBI_TOL: f64 = 1e-15;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 4;
const SKETCH_SEED: u64 = 0x5356_4421;

/// Best rank-`r` approximation factors of `m`.
///
/// Requires `1 ≤ r ≤ min(d1, d2)` and finite entries. Columns of `u` and
/// `v` are orthonormal (completed deterministically when singular values
/// vanish); `s` is sorted nonincreasing.
pub fn partial_svd(m: &DenseMatrix, r: usize) -> Result<Svd> {
    let (d1, d2) = m.dims();
    let min_d = d1.min(d2);
    if r == 0 || r > min_d {
        return Err(Error::Dimension(format!(
            "rank {r} out of range for {d1}x{d2} matrix"
        )));
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    if min_d <= 32 || 4 * r >= 3 * min_d {
        let full = jacobi_svd(m);
        Ok(truncate(full, r))
    } else {
        Ok(randomized_svd(m, r))
    }
}

fn truncate(full: Svd, r: usize) -> Svd {
    let (d1, _) = full.u.dims();
    let d2 = full.v.rows();
    let u = DenseMatrix::from_fn(d1, r, |i, j| full.u.get(i, j));
    let v = DenseMatrix::from_fn(d2, r, |i, j| full.v.get(i, j));
    Svd {
        u,
        v,
        s: full.s[..r].to_vec(),
    }
}

/// One-sided Jacobi on the columns of the (tall-oriented) matrix.
fn jacobi_svd(m: &DenseMatrix) -> Svd {
    let (d1, d2) = m.dims();
    if d1 >= d2 {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose());
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    }
}

fn jacobi_tall(m: &DenseMatrix) -> Svd {
    let (d1, d2) = m.dims();
    debug_assert!(d1 >= d2);
    // Work on contiguous columns.
    let mut w: Vec<Vec<f64>> = (0..d2)
        .map(|j| (0..d1).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..d2)
        .map(|j| {
            let mut col = vec![0.0; d2];
            col[j] = 1.0;
            col
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d2.saturating_sub(1) {
            for q in p + 1..d2 {
                let (wp, wq) = pair_mut(&mut w, p, q);
                let alpha = kernel::dot(wp, wp);
                let beta = kernel::dot(wq, wq);
                let gamma = kernel::dot(wp, wq);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values and ordering (descending, stable).
    let mut sv: Vec<f64> = w.iter().map(|col| kernel::dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..d2).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap().then(a.cmp(&b)));
    let w_sorted: Vec<Vec<f64>> = order.iter().map(|&j| w[j].clone()).collect();
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    sv = order.iter().map(|&j| sv[j]).collect();
    w = w_sorted;

    // Normalize left vectors; complete columns for vanished singular values.
    let smax = sv.first().copied().unwrap_or(0.0);
    let tiny = smax * 1e-300 + f64::MIN_POSITIVE;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(d2);
    for (j, col) in w.iter().enumerate() {
        if sv[j] > tiny {
            u_cols.push(col.iter().map(|x| x / sv[j]).collect());
        } else {
            sv[j] = 0.0;
            u_cols.push(complete_column(&u_cols, d1));
        }
    }

    Svd {
        u: cols_to_matrix(&u_cols, d1),
        s: sv,
        v: cols_to_matrix(&v_sorted, d2),
    }
}

fn pair_mut<T>(cols: &mut [Vec<T>], p: usize, q: usize) -> (&mut Vec<T>, &mut Vec<T>) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xa = *x;
        *x = c * xa - s * *y;
        *y = s * xa + c * *y;
    }
}

/// Deterministic orthonormal completion: first canonical basis vector with
/// a substantial residual after projecting out the existing columns.
fn complete_column(existing: &[Vec<f64>], dim: usize) -> Vec<f64> {
    for k in 0..dim {
        let mut cand = vec![0.0; dim];
        cand[k] = 1.0;
        for col in existing {
            let proj = kernel::dot(&cand, col);
            kernel::axpy(-proj, col, &mut cand);
        }
        let norm = kernel::dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            cand.iter_mut().for_each(|x| *x /= norm);
            return cand;
        }
    }
    // Unreachable for well-formed inputs (fewer columns than dim).
    let mut cand = vec![0.0; dim];
    cand[0] = 1.0;
    cand
}

fn cols_to_matrix(cols: &[Vec<f64>], dim: usize) -> DenseMatrix {
    DenseMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i])
}

/// Randomized subspace iteration (Halko-Martinsson-Tropp style) with
/// oversampling and `POWER_ITERS` power steps.
fn randomized_svd(m: &DenseMatrix, r: usize) -> Svd {
    let (d1, d2) = m.dims();
    let k = (r + OVERSAMPLE).min(d1.min(d2));
    let key = StreamKey::new(SKETCH_SEED);

    // Sketch columns are keyed individually so sketches nest across ranks.
    let omega: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut rng = key.child(c as u64).rng();
            (0..d2).map(|_| rng.normal()).collect()
        })
        .collect();

    // Y = M * Omega
    let mut y: Vec<Vec<f64>> = omega
        .iter()
        .map(|w| (0..d1).map(|i| kernel::dot(m.row(i), w)).collect())
        .collect();
    orthonormalize(&mut y);

    for _ in 0..POWER_ITERS {
        // Z = Mᵀ Y
        let mut z: Vec<Vec<f64>> = y
            .iter()
            .map(|col| {
                let mut acc = vec![0.0; d2];
                for i in 0..d1 {
                    kernel::axpy(col[i], m.row(i), &mut acc);
                }
                acc
            })
            .collect();
        orthonormalize(&mut z);
        y = z
            .iter()
            .map(|col| (0..d1).map(|i| kernel::dot(m.row(i), col)).collect())
            .collect();
        orthonormalize(&mut y);
    }

    // B = Yᵀ M  (k x d2)
    let mut b = DenseMatrix::zeros(k, d2);
    for (c, col) in y.iter().enumerate() {
        let brow = b.row_mut(c);
        for i in 0..d1 {
            kernel::axpy(col[i], m.row(i), brow);
        }
    }

    let small = jacobi_svd(&b); // k x d2, exact on the small panel
    // U = Y * U_b, truncated to r.
    let mut u = DenseMatrix::zeros(d1, r);
    for j in 0..r {
        for (c, col) in y.iter().enumerate() {
            let coef = small.u.get(c, j);
            if coef != 0.0 {
                for i in 0..d1 {
                    let val = u.get(i, j) + coef * col[i];
                    u.set(i, j, val);
                }
            }
        }
    }
    let v = DenseMatrix::from_fn(d2, r, |i, j| small.v.get(i, j));
    Svd {
        u,
        v,
        s: small.s[..r].to_vec(),
    }
}

/// Modified Gram-Schmidt, run twice for numerical orthogonality; columns
/// that vanish are replaced by a deterministic completion.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    let dim = match cols.first() {
        Some(c) => c.len(),
        None => return,
    };
    for pass in 0..2 {
        for j in 0..cols.len() {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj = kernel::dot(&done[i], &rest[0]);
                kernel::axpy(-proj, &done[i], &mut rest[0]);
            }
            let norm = kernel::dot(&cols[j], &cols[j]).sqrt();
            if norm > 1e-300 {
                cols[j].iter_mut().for_each(|x| *x /= norm);
            } else if pass == 1 {
                let fill = complete_column(&cols[..j].to_vec(), dim);
                cols[j] = fill;
            } else {
                cols[j].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
}

/// Largest eigenvalue of a small symmetric matrix (cyclic Jacobi).
pub(crate) fn sym_eig_max(a: &DenseMatrix) -> f64 {
    debug_assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + m.norm_fro()) {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
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
            }
        }
    }
    (0..n).map(|i| m.get(i, i)).fold(f64::NEG_INFINITY, f64::max)
}
