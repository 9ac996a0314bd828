//! Entrywise observation-probability models and their estimators.
//!
//! A model assigns each grid cell a probability `p_ij` of being observed;
//! the odds `(1 - p_ij) / p_ij` drive the weighted conformal calibration.
//! Estimated probabilities are clamped into `[1e-6, 1 - 1e-6]` so odds
//! stay finite.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::matrix::DenseMatrix;
use crate::rng::{CounterRng, StreamKey};

const P_CLAMP_LO: f64 = 1e-6;
const P_CLAMP_HI: f64 = 1.0 - 1e-6;

/// A probability law over the grid for the observation indicators.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationModel {
    /// Constant probability `p0`.
    Uniform { p0: f64, d1: usize, d2: usize },
    /// `p_ij = sigmoid(sum_l a_il * b_lj)`; `a` is `d1 x k`, `b` is `k x d2`.
    LogisticFactor { a: DenseMatrix, b: DenseMatrix },
    /// `p_ij = a_i * b_j` (clamped at evaluation).
    RankOne { a: Vec<f64>, b: Vec<f64> },
    /// Arbitrary per-entry probabilities, validated on construction.
    Explicit { p: DenseMatrix },
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn clamp_p(p: f64) -> f64 {
    p.clamp(P_CLAMP_LO, P_CLAMP_HI)
}

impl ObservationModel {
    pub fn uniform(p0: f64, d1: usize, d2: usize) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "uniform probability must lie strictly in (0,1), got {p0}"
            )));
        }
        Ok(ObservationModel::Uniform { p0, d1, d2 })
    }

    pub fn explicit(p: DenseMatrix) -> Result<Self> {
        if p.data().iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidInput(
                "explicit probabilities must lie strictly in (0,1)".into(),
            ));
        }
        Ok(ObservationModel::Explicit { p })
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            ObservationModel::Uniform { d1, d2, .. } => (*d1, *d2),
            ObservationModel::LogisticFactor { a, b } => (a.rows(), b.cols()),
            ObservationModel::RankOne { a, b } => (a.len(), b.len()),
            ObservationModel::Explicit { p } => p.dims(),
        }
    }

    /// Observation probability of cell `(i, j)`, clamped into the band.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let p = match self {
            ObservationModel::Uniform { p0, .. } => *p0,
            ObservationModel::LogisticFactor { a, b } => {
                let k = a.cols();
                let mut logit = 0.0;
                for l in 0..k {
                    logit += a.get(i, l) * b.get(l, j);
                }
                sigmoid(logit)
            }
            ObservationModel::RankOne { a, b } => a[i] * b[j],
            ObservationModel::Explicit { p } => p.get(i, j),
        };
        clamp_p(p)
    }

    /// Odds ratio `(1 - p_ij) / p_ij`; finite and positive by clamping.
    #[inline]
    pub fn odds(&self, i: usize, j: usize) -> f64 {
        let p = self.prob(i, j);
        (1.0 - p) / p
    }

    /// Dense matrix of probabilities (mostly for diagnostics and IO).
    pub fn prob_matrix(&self) -> DenseMatrix {
        let (d1, d2) = self.dims();
        DenseMatrix::from_fn(d1, d2, |i, j| self.prob(i, j))
    }
}

/// Draws an observation mask: each cell independently with its `p_ij`.
pub fn sample_mask(model: &ObservationModel, rng: &mut CounterRng) -> IndexSet {
    let (d1, d2) = model.dims();
    let mut mask = IndexSet::empty(d1, d2);
    for i in 0..d1 {
        for j in 0..d2 {
            if rng.bernoulli(model.prob(i, j)) {
                mask.insert(i, j);
            }
        }
    }
    mask
}

/// Homogeneous-missingness estimator: `p̂ = |Ω_tr| / (d1 d2 q)`, clamped.
pub fn estimate_uniform(
    mask_train: &IndexSet,
    q: f64,
    dims: (usize, usize),
) -> Result<ObservationModel> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction q must lie in (0,1], got {q}"
        )));
    }
    if mask_train.is_empty() {
        return Err(Error::InsufficientData(
            "empty training set for uniform estimate".into(),
        ));
    }
    let (d1, d2) = dims;
    let p_hat = clamp_p(mask_train.len() as f64 / (d1 as f64 * d2 as f64 * q));
    Ok(ObservationModel::Uniform { p0: p_hat, d1, d2 })
}

/// Options for the constrained logistic maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct LogisticFitOptions {
    /// Initial ascent step; backtracking halves it as needed.
    pub lr: f64,
    pub max_iters: usize,
    /// Box for the row factors `a_il`.
    pub a_box: (f64, f64),
    /// Box for the column factors `b_lj`.
    pub b_box: (f64, f64),
    /// Relative log-likelihood improvement below which we stop.
    pub tol: f64,
}

impl Default for LogisticFitOptions {
    /// The small default budget is deliberate: with one Bernoulli
    /// indicator per grid cell the fully converged factor MLE overfits
    /// badly (entrywise error roughly doubles), so the ascent is stopped
    /// early as implicit regularization. Raise `max_iters` for a full fit.
    fn default() -> Self {
        LogisticFitOptions {
            lr: 0.25,
            max_iters: 6,
            a_box: (0.0, 1.0),
            b_box: (-0.5, 0.5),
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFitReport {
    pub converged: bool,
    pub iters: usize,
    pub final_log_lik: f64,
}

/// Constrained MLE for the logistic-factor model.
///
/// Membership of a grid cell in the training mask is Bernoulli with
/// success probability `q * sigmoid(logit_ij)`, since the training split
/// keeps an observed entry with probability `q`. The fit maximizes that
/// Bernoulli likelihood over the full grid by projected gradient ascent
/// with backtracking, so the log-likelihood never decreases.
pub fn estimate_logistic(
    mask_train: &IndexSet,
    k: usize,
    dims: (usize, usize),
    q: f64,
    opts: &LogisticFitOptions,
) -> Result<(ObservationModel, LogisticFitReport)> {
    if k == 0 {
        return Err(Error::InvalidParameter("latent rank k must be >= 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction q must lie in (0,1], got {q}"
        )));
    }
    let (d1, d2) = dims;

    // Deterministic symmetry-breaking initialization inside the boxes.
    let mut rng = StreamKey::new(0x4c4f_4749).rng();
    let (alo, ahi) = opts.a_box;
    let (blo, bhi) = opts.b_box;
    let amid = 0.5 * (alo + ahi);
    let aw = 0.05 * (ahi - alo);
    let bw = 0.04 * (bhi - blo);
    let mut a = DenseMatrix::from_fn(d1, k, |_, _| amid + aw * (2.0 * rng.next_f64() - 1.0));
    let mut b = DenseMatrix::from_fn(k, d2, |_, _| bw * (2.0 * rng.next_f64() - 1.0));

    let loglik = |a: &DenseMatrix, b: &DenseMatrix| -> f64 {
        let mut ll = 0.0;
        for i in 0..d1 {
            let arow = a.row(i);
            for j in 0..d2 {
                let mut logit = 0.0;
                for (l, al) in arow.iter().enumerate() {
                    logit += al * b.get(l, j);
                }
                let qp = (q * sigmoid(logit)).clamp(1e-12, 1.0 - 1e-12);
                ll += if mask_train.contains(i, j) {
                    qp.ln()
                } else {
                    (1.0 - qp).ln()
                };
            }
        }
        ll
    };

    let mut ll = loglik(&a, &b);
    let mut step = opts.lr / (d1.max(d2) as f64);
    let mut iters_used = 0;
    let mut converged = false;

    for iter in 0..opts.max_iters {
        iters_used = iter + 1;
        // Gradient of the log-likelihood w.r.t. the logits, pushed through
        // to the factors.
        let mut grad_a = DenseMatrix::zeros(d1, k);
        let mut grad_b = DenseMatrix::zeros(k, d2);
        for i in 0..d1 {
            let arow = a.row(i);
            for j in 0..d2 {
                let mut logit = 0.0;
                for (l, al) in arow.iter().enumerate() {
                    logit += al * b.get(l, j);
                }
                let s = sigmoid(logit);
                let qp = (q * s).clamp(1e-12, 1.0 - 1e-12);
                let g = if mask_train.contains(i, j) {
                    1.0 - s
                } else {
                    -q * s * (1.0 - s) / (1.0 - qp)
                };
                for l in 0..k {
                    let ga = grad_a.get(i, l) + g * b.get(l, j);
                    grad_a.set(i, l, ga);
                    let gb = grad_b.get(l, j) + g * arow[l];
                    grad_b.set(l, j, gb);
                }
            }
        }

        // Backtracking along the projection arc; accept only improvements.
        let mut improved = false;
        let mut t = step;
        for _ in 0..30 {
            let a_new = DenseMatrix::from_fn(d1, k, |i, l| {
                (a.get(i, l) + t * grad_a.get(i, l)).clamp(alo, ahi)
            });
            let b_new = DenseMatrix::from_fn(k, d2, |l, j| {
                (b.get(l, j) + t * grad_b.get(l, j)).clamp(blo, bhi)
            });
            let ll_new = loglik(&a_new, &b_new);
            if ll_new >= ll {
                let gain = ll_new - ll;
                a = a_new;
                b = b_new;
                ll = ll_new;
                improved = true;
                step = (t * 1.5).min(opts.lr);
                if gain <= opts.tol * ll.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }

    Ok((
        ObservationModel::LogisticFactor { a, b },
        LogisticFitReport {
            converged,
            iters: iters_used,
            final_log_lik: ll,
        },
    ))
}

#[derive(Debug, Clone, Default)]
pub struct RankOneFitReport {
    /// Rows/columns with no training observation that fell back to the
    /// global mean rate.
    pub empty_rows: usize,
    pub empty_cols: usize,
}

/// Method-of-moments estimator for the separable model `p_ij = a_i b_j`:
/// row rate × column rate / overall rate, exact in expectation.
pub fn estimate_rank_one(
    mask_train: &IndexSet,
    q: f64,
    dims: (usize, usize),
) -> Result<(ObservationModel, RankOneFitReport)> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction q must lie in (0,1], got {q}"
        )));
    }
    if mask_train.is_empty() {
        return Err(Error::InsufficientData(
            "empty training set for rank-one estimate".into(),
        ));
    }
    let (d1, d2) = dims;
    let mut row_counts = vec![0usize; d1];
    let mut col_counts = vec![0usize; d2];
    for (i, j) in mask_train.iter() {
        row_counts[i] += 1;
        col_counts[j] += 1;
    }
    let m = mask_train.len() as f64 / (d1 as f64 * d2 as f64 * q);
    let mut report = RankOneFitReport::default();
    let sqrt_m = m.sqrt();
    let a: Vec<f64> = row_counts
        .iter()
        .map(|&c| {
            if c == 0 {
                report.empty_rows += 1;
                sqrt_m // p̂ over this row falls back to the column rates
            } else {
                c as f64 / (d2 as f64 * q) / sqrt_m
            }
        })
        .collect();
    let b: Vec<f64> = col_counts
        .iter()
        .map(|&c| {
            if c == 0 {
                report.empty_cols += 1;
                sqrt_m
            } else {
                c as f64 / (d1 as f64 * q) / sqrt_m
            }
        })
        .collect();
    Ok((ObservationModel::RankOne { a, b }, report))
}

/// Normalized calibration/test weights for the quantile step.
#[derive(Debug, Clone)]
pub struct CalibrationWeights {
    /// One weight per calibration index, aligned with row-major iteration
    /// of the calibration set.
    pub cal: Vec<f64>,
    /// Weight of the test atom (max odds over the target set).
    pub test: f64,
    /// Largest single weight (calibration or test).
    pub max: f64,
}

/// Computes `w_ij = h_ij / (Σ_cal h + max_target h)` and the matching test
/// weight, normalized in one pass. When every odds value is identical the
/// exact flat vector `1/(N+1)` is returned so uniform models reduce to
/// standard split conformal without roundoff.
pub fn weights(
    model: &ObservationModel,
    cal_set: &IndexSet,
    target_set: &IndexSet,
) -> Result<CalibrationWeights> {
    if target_set.is_empty() {
        return Err(Error::InvalidInput(
            "target set must be nonempty for the test weight".into(),
        ));
    }
    let cal_odds: Vec<f64> = cal_set.iter().map(|(i, j)| model.odds(i, j)).collect();
    let max_target = target_set
        .iter()
        .map(|(i, j)| model.odds(i, j))
        .fold(f64::NEG_INFINITY, f64::max);

    let n = cal_odds.len();
    let all_equal = cal_odds.iter().all(|&h| h == max_target);
    if all_equal {
        let w = 1.0 / (n as f64 + 1.0);
        return Ok(CalibrationWeights {
            cal: vec![w; n],
            test: w,
            max: w,
        });
    }

    // Neumaier-compensated denominator.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &h in cal_odds.iter().chain(core::iter::once(&max_target)) {
        let t = sum + h;
        if sum.abs() >= h.abs() {
            comp += (sum - t) + h;
        } else {
            comp += (h - t) + sum;
        }
        sum = t;
    }
    let denom = sum + comp;
    let cal: Vec<f64> = cal_odds.iter().map(|h| h / denom).collect();
    let test = max_target / denom;
    let max = cal.iter().fold(test, |m, &w| m.max(w));
    Ok(CalibrationWeights { cal, test, max })
}
