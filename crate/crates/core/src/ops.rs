//! Structured operators used by the solver: row/column truncation,
//! global hard thresholding, row-norm projection and the rank-plus-clamp
//! projection used during initialization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{kernel, DenseMatrix};
use crate::svd::partial_svd;

/// Keeps entry `(i,j)` iff `|S_ij|` is at least the `⌊beta*d2⌋`-th largest
/// absolute value in row `i` AND the `⌊beta*d1⌋`-th largest in column `j`;
/// everything else becomes zero. A zero budget in either dimension zeroes
/// the whole matrix. Ties at the threshold are all retained.
pub fn truncate_sparse(s: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in [0,1], got {beta}"
        )));
    }
    let (d1, d2) = s.dims();
    let k_row = (beta * d2 as f64).floor() as usize;
    let k_col = (beta * d1 as f64).floor() as usize;
    let mut out = DenseMatrix::zeros(d1, d2);
    if k_row == 0 || k_col == 0 {
        return Ok(out);
    }

    let row_thresh: Vec<f64> = (0..d1)
        .map(|i| kth_largest_abs(s.row(i), k_row))
        .collect();
    let mut col_thresh = vec![0.0f64; d2];
    {
        let mut col_buf = vec![0.0f64; d1];
        for (j, thresh) in col_thresh.iter_mut().enumerate() {
            for (i, slot) in col_buf.iter_mut().enumerate() {
                *slot = s.get(i, j);
            }
            *thresh = kth_largest_abs(&col_buf, k_col);
        }
    }

    for i in 0..d1 {
        for j in 0..d2 {
            let v = s.get(i, j);
            if v.abs() >= row_thresh[i] && v.abs() >= col_thresh[j] {
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

/// The `k`-th largest absolute value of the slice (1-based `k ≤ len`).
fn kth_largest_abs(xs: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= xs.len());
    let mut abs: Vec<f64> = xs.iter().map(|v| v.abs()).collect();
    let idx = k - 1;
    abs.select_nth_unstable_by(idx, |a, b| b.partial_cmp(a).unwrap());
    abs[idx]
}

/// Retains exactly `min(k, nnz(m))` entries of largest absolute value and
/// zeroes the rest; ties broken by lowest linear index first.
pub fn hard_threshold(m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let (d1, d2) = m.dims();
    if k > d1 * d2 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds entry count {}",
            d1 * d2
        )));
    }
    let mut out = DenseMatrix::zeros(d1, d2);
    if k == 0 {
        return Ok(out);
    }
    let data = m.data();
    let mut order: Vec<u32> = (0..data.len() as u32)
        .filter(|&ix| data[ix as usize] != 0.0)
        .collect();
    let keep = k.min(order.len());
    if keep == 0 {
        return Ok(out);
    }
    // Sort by (|value| desc, linear index asc); deterministic tie-break.
    order.sort_unstable_by(|&a, &b| {
        let va = data[a as usize].abs();
        let vb = data[b as usize].abs();
        vb.partial_cmp(&va).unwrap().then(a.cmp(&b))
    });
    for &ix in &order[..keep] {
        out.data_mut()[ix as usize] = data[ix as usize];
    }
    Ok(out)
}

/// Euclidean projection onto the row-norm ball: rows with ℓ2 norm above
/// `radius` are rescaled onto the sphere, other rows pass through.
pub fn project_incoherent(f: &DenseMatrix, radius: f64) -> Result<DenseMatrix> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    let mut out = f.clone();
    project_incoherent_in_place(&mut out, radius);
    Ok(out)
}

pub(crate) fn project_incoherent_in_place(f: &mut DenseMatrix, radius: f64) {
    // The 1e-12 relative band absorbs roundoff from a previous projection,
    // making the operator exactly idempotent in floating point.
    for i in 0..f.rows() {
        let row = f.row_mut(i);
        let norm = kernel::dot(row, row).sqrt();
        if norm > radius * (1.0 + 1e-12) {
            if radius == 0.0 {
                row.iter_mut().for_each(|x| *x = 0.0);
            } else {
                let scale = radius / norm;
                row.iter_mut().for_each(|x| *x *= scale);
            }
        }
    }
}

/// Alternating projection onto `{rank ≤ r} ∩ {‖·‖∞,∞ ≤ zeta}`: each sweep
/// does a rank-`r` SVD projection followed by an entrywise clamp, so the
/// clamp holds exactly on output and the rank bound holds just before the
/// final clamp. One sweep is the default used by the initializer.
pub fn project_rank_clamped(
    m: &DenseMatrix,
    r: usize,
    zeta: f64,
    sweeps: usize,
) -> Result<DenseMatrix> {
    if !(zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "zeta must be nonnegative, got {zeta}"
        )));
    }
    if sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be >= 1".into()));
    }
    let mut x = m.clone();
    for _ in 0..sweeps {
        let svd = partial_svd(&x, r)?;
        x = svd.reconstruct();
        clamp_in_place(&mut x, zeta);
    }
    Ok(x)
}

pub(crate) fn clamp_in_place(m: &mut DenseMatrix, zeta: f64) {
    for v in m.data_mut() {
        *v = v.clamp(-zeta, zeta);
    }
}
