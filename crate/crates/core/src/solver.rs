//! Point estimation: projected gradient descent on the factorized
//! low-rank + sparse objective under partial observation, with a
//! hard-threshold / clamped-rank-projection initialization phase.

use alloc::format;
use alloc::string::String;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::index_set::IndexSet;
use crate::matrix::{kernel, DenseMatrix, FactorPair};
use crate::ops::{
    hard_threshold, project_incoherent_in_place, project_rank_clamped, truncate_sparse,
};
use crate::svd::{partial_svd, sym_eig_max};

/// Step-size choice for the gradient loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `1 / ‖G⁰‖₂²`, resolved once after initialization.
    Auto,
    Fixed(f64),
}

/// Solver configuration. `rank` is the hypothesized rank and may differ
/// from the truth; everything else has workable defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    /// Assumed corruption sparsity level β.
    pub sparsity_beta: f64,
    /// Truncation slack: the per-row/column budget is the fraction γβ.
    pub gamma: f64,
    pub eta: StepSize,
    pub max_iters: usize,
    /// Relative objective-change stopping tolerance.
    pub tol: f64,
    /// Initialization rounds.
    pub init_iters: usize,
    /// Initialization step multiplier; the effective step is `tau * p̂`
    /// against the `1/p̂`-scaled gradient, so `tau = 1` applies the full
    /// observed residual in one step.
    pub init_step: f64,
    /// Hard-threshold budget multiplier: keep `λ ⌊β |obs|⌋` entries.
    pub lambda: f64,
    /// Multiplier for the entrywise clamp level ζ* in initialization.
    pub zeta_c0: f64,
}

impl SolverConfig {
    pub fn with_rank(rank: usize) -> Self {
        SolverConfig {
            rank,
            sparsity_beta: 0.1,
            gamma: 2.0,
            eta: StepSize::Auto,
            max_iters: 300,
            tol: 1e-7,
            init_iters: 10,
            init_step: 1.0,
            lambda: 1.5,
            zeta_c0: 1.5,
        }
    }

    fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        let check = |ok: bool, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(String::from(msg)))
            }
        };
        check(
            self.rank >= 1 && self.rank <= d1.min(d2),
            "rank out of range",
        )?;
        check(
            (0.0..1.0).contains(&self.sparsity_beta),
            "sparsity_beta must lie in [0,1)",
        )?;
        check(self.gamma > 0.0, "gamma must be positive")?;
        if let StepSize::Fixed(e) = self.eta {
            check(e > 0.0 && e.is_finite(), "eta must be positive")?;
        }
        check(self.max_iters >= 1, "max_iters must be >= 1")?;
        check(self.tol > 0.0, "tol must be positive")?;
        check(self.init_iters >= 1, "init_iters must be >= 1")?;
        check(self.init_step > 0.0, "init_step must be positive")?;
        check(self.lambda >= 1.0, "lambda must be >= 1")?;
        check(self.zeta_c0 > 0.0, "zeta_c0 must be positive")?;
        Ok(())
    }
}

/// Solver output: factors, dense reconstructions and the split of the
/// observed set into estimated-corrupted and estimated-pure indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcaEstimate {
    pub factors: FactorPair,
    pub xhat: DenseMatrix,
    pub shat: DenseMatrix,
    /// Support of the final sparse iterate (within the observed set).
    pub omega_star_hat: IndexSet,
    /// Observed set minus the flagged indices.
    pub omega_pure_hat: IndexSet,
    pub iters_run: usize,
    pub final_objective: f64,
}

/// Empirical loss under partial observation and its exact factor
/// gradients: `loss = (1/(2 p̂)) Σ_obs (U Vᵀ + S − Y)²_ij`.
pub fn loss_and_gradients(
    factors: &FactorPair,
    s: &DenseMatrix,
    y: &DenseMatrix,
    obs: &IndexSet,
    p_hat: f64,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let (d1, d2) = y.dims();
    if s.dims() != (d1, d2) || obs.dims() != (d1, d2) {
        return Err(Error::Dimension(format!(
            "S {:?} / obs {:?} must match Y {:?}",
            s.dims(),
            obs.dims(),
            y.dims()
        )));
    }
    if factors.u.rows() != d1 || factors.v.rows() != d2 {
        return Err(Error::Dimension(format!(
            "factors ({}x{}, {}x{}) do not match {d1}x{d2}",
            factors.u.rows(),
            factors.u.cols(),
            factors.v.rows(),
            factors.v.cols(),
        )));
    }
    if !(p_hat > 0.0 && p_hat <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p_hat must lie in (0,1], got {p_hat}"
        )));
    }
    let r = factors.rank();
    let inv_p = 1.0 / p_hat;
    let mut loss = 0.0;
    let mut grad_u = DenseMatrix::zeros(d1, r);
    let mut grad_v = DenseMatrix::zeros(d2, r);
    for (i, j) in obs.iter() {
        let e = factors.product_entry(i, j) + s.get(i, j) - y.get(i, j);
        loss += e * e;
        let ei = e * inv_p;
        kernel::axpy(ei, factors.v.row(j), grad_u.row_mut(i));
        kernel::axpy(ei, factors.u.row(i), grad_v.row_mut(j));
    }
    Ok((0.5 * inv_p * loss, grad_u, grad_v))
}

/// Residual `Π_obs(X + S − Y)` as a dense matrix (zeros off the mask).
fn dense_residual(
    x: Option<&DenseMatrix>,
    s: Option<&DenseMatrix>,
    y: &DenseMatrix,
    obs: &IndexSet,
) -> DenseMatrix {
    let (d1, d2) = y.dims();
    let mut g = DenseMatrix::zeros(d1, d2);
    for (i, j) in obs.iter() {
        let mut v = -y.get(i, j);
        if let Some(x) = x {
            v += x.get(i, j);
        }
        if let Some(s) = s {
            v += s.get(i, j);
        }
        g.set(i, j, v);
    }
    g
}

/// Scale statistics estimated once from the rank-`r` SVD of the rescaled
/// observed matrix: top singular value, incoherence and condition number,
/// combined into the clamp level ζ*.
struct InitScales {
    mu: f64,
    zeta: f64,
}

fn estimate_scales(
    y: &DenseMatrix,
    obs: &IndexSet,
    cfg: &SolverConfig,
    p_hat: f64,
) -> Result<InitScales> {
    let (d1, d2) = y.dims();
    let mut m0 = dense_residual(None, None, y, obs);
    m0.scale_in_place(-1.0 / p_hat);
    let svd = partial_svd(&m0, cfg.rank)?;
    let sigma1 = svd.s[0];
    let sigma_r = svd.s[cfg.rank - 1];
    let mu_u = d1 as f64 * svd.u.norm_two_inf().powi(2) / cfg.rank as f64;
    let mu_v = d2 as f64 * svd.v.norm_two_inf().powi(2) / cfg.rank as f64;
    let mu = mu_u.max(mu_v).max(1.0);
    let kappa = if sigma_r > sigma1 * 1e-12 {
        sigma1 / sigma_r
    } else {
        1e12
    };
    // c0 in the clamp level is a bound on sigma_1, so the configured
    // multiplier rides on the estimated top singular value.
    let zeta =
        cfg.zeta_c0 * sigma1 * mu * cfg.rank as f64 * kappa / ((d1 as f64) * (d2 as f64)).sqrt();
    Ok(InitScales { mu, zeta })
}

/// Initialization phase: alternating hard-threshold steps on the sparse
/// part and clamped rank projections on the low-rank part, starting from
/// zero, followed by a rank-`r` SVD split into balanced factors.
pub fn initialize(
    y: &DenseMatrix,
    obs: &IndexSet,
    cfg: &SolverConfig,
) -> Result<(FactorPair, DenseMatrix)> {
    let (f, s, _) = initialize_with_scales(y, obs, cfg)?;
    Ok((f, s))
}

fn initialize_with_scales(
    y: &DenseMatrix,
    obs: &IndexSet,
    cfg: &SolverConfig,
) -> Result<(FactorPair, DenseMatrix, InitScales)> {
    let (d1, d2) = y.dims();
    if obs.dims() != (d1, d2) {
        return Err(Error::Dimension("mask dims do not match Y".into()));
    }
    if obs.is_empty() {
        return Err(Error::InsufficientData("empty observation set".into()));
    }
    cfg.validate(d1, d2)?;
    let p_hat = obs.len() as f64 / (d1 as f64 * d2 as f64);
    let scales = estimate_scales(y, obs, cfg, p_hat)?;

    let sparsity = (cfg.sparsity_beta * obs.len() as f64).floor();
    let budget = ((cfg.lambda * sparsity).floor() as usize).min(d1 * d2);

    let mut x = DenseMatrix::zeros(d1, d2);
    let mut s = DenseMatrix::zeros(d1, d2);
    for _ in 0..cfg.init_iters {
        // Both updates use the gradient at the current (X, S); the loss
        // gradient w.r.t. X and S is the same restricted residual, and
        // the `1/p̂` scaling cancels against the `tau * p̂` step.
        let g = dense_residual(Some(&x), Some(&s), y, obs);
        let s_step = s.add_scaled(-cfg.init_step, &g)?;
        let s_next = hard_threshold(&s_step, budget)?;
        let x_step = x.add_scaled(-cfg.init_step, &g)?;
        let x_next = project_rank_clamped(&x_step, cfg.rank, scales.zeta, 1)?;
        s = s_next;
        x = x_next;
    }

    let svd = partial_svd(&x, cfg.rank)?;
    let mut u0 = DenseMatrix::zeros(d1, cfg.rank);
    let mut v0 = DenseMatrix::zeros(d2, cfg.rank);
    for k in 0..cfg.rank {
        let root = svd.s[k].max(0.0).sqrt();
        for i in 0..d1 {
            u0.set(i, k, svd.u.get(i, k) * root);
        }
        for j in 0..d2 {
            v0.set(j, k, svd.v.get(j, k) * root);
        }
    }
    // Incoherence for the C1/C2 radii comes from the initialization-output
    // SVD rather than the first raw pass, which corruption can inflate.
    let mu_u = d1 as f64 * svd.u.norm_two_inf().powi(2) / cfg.rank as f64;
    let mu_v = d2 as f64 * svd.v.norm_two_inf().powi(2) / cfg.rank as f64;
    let scales = InitScales {
        mu: mu_u.max(mu_v).max(1.0),
        zeta: scales.zeta,
    };
    Ok((FactorPair::new(u0, v0)?, s, scales))
}

/// Full point estimation: initialization followed by projected gradient
/// descent with per-iteration truncation of the observed residual.
pub fn solve(y: &DenseMatrix, obs: &IndexSet, cfg: &SolverConfig) -> Result<RpcaEstimate> {
    let (d1, d2) = y.dims();
    let (factors0, _s0, scales) = initialize_with_scales(y, obs, cfg)?;
    let p_hat = obs.len() as f64 / (d1 as f64 * d2 as f64);
    let inv_p = 1.0 / p_hat;
    let r = cfg.rank;

    let mut u = factors0.u;
    let mut v = factors0.v;

    // ‖G⁰‖₂² = λ_max(U⁰ᵀU⁰ + V⁰ᵀV⁰); constraint radii and step follow.
    let g0_norm_sq = sym_eig_max(&gram_sum(&u, &v)).max(0.0);
    let g0_norm = g0_norm_sq.sqrt();
    let radius_u = (scales.mu * r as f64 / d1 as f64).sqrt() * g0_norm;
    let radius_v = (scales.mu * r as f64 / d2 as f64).sqrt() * g0_norm;
    let eta = match cfg.eta {
        StepSize::Fixed(e) => e,
        StepSize::Auto => {
            if g0_norm_sq > 0.0 {
                1.0 / g0_norm_sq
            } else {
                1.0
            }
        }
    };

    project_incoherent_in_place(&mut u, radius_u);
    project_incoherent_in_place(&mut v, radius_v);

    let trunc_frac = (cfg.gamma * cfg.sparsity_beta).min(1.0);
    let mut prev_obj = f64::INFINITY;
    let mut initial_obj = f64::NAN;
    let mut iters_run = 0;
    let mut objective = 0.0;

    for t in 0..cfg.max_iters {
        iters_run = t + 1;
        // Residual of the low-rank part on the mask, then truncate.
        let mut resid = DenseMatrix::zeros(d1, d2);
        for (i, j) in obs.iter() {
            resid.set(i, j, y.get(i, j) - kernel::dot(u.row(i), v.row(j)));
        }
        let s = truncate_sparse(&resid, trunc_frac)?;

        // E = Π_obs(U Vᵀ + S − Y) = S − resid (both supported on obs).
        let e = s.add_scaled(-1.0, &resid)?;

        let loss = 0.5 * inv_p * kernel::dot(e.data(), e.data());
        let gram_u = gram(&u);
        let gram_v = gram(&v);
        let mut diff = gram_u.add_scaled(-1.0, &gram_v)?;
        let balance = kernel::dot(diff.data(), diff.data()) / 64.0;
        objective = loss + balance;

        if t == 0 {
            initial_obj = objective.max(f64::MIN_POSITIVE);
        } else if objective > 1e12 * initial_obj {
            return Err(Error::Divergence { iteration: t });
        }
        let rel_change = (objective - prev_obj).abs() / prev_obj.max(f64::MIN_POSITIVE);
        if objective == 0.0 || rel_change < cfg.tol {
            break;
        }
        prev_obj = objective;

        // Loss gradients in one pass over the mask.
        let mut grad_u = DenseMatrix::zeros(d1, r);
        let mut grad_v = DenseMatrix::zeros(d2, r);
        for (i, j) in obs.iter() {
            let eij = e.get(i, j);
            if eij != 0.0 {
                let scaled = eij * inv_p;
                kernel::axpy(scaled, v.row(j), grad_u.row_mut(i));
                kernel::axpy(scaled, u.row(i), grad_v.row_mut(j));
            }
        }
        // Balance terms: U (UᵀU − VᵀV) / 16 and the mirrored V update.
        diff.scale_in_place(1.0 / 16.0);
        let bal_u = mat_mul_small(&u, &diff);
        diff.scale_in_place(-1.0);
        let bal_v = mat_mul_small(&v, &diff);

        for i in 0..d1 {
            let gu = grad_u.row(i);
            let bu = bal_u.row(i);
            let row = u.row_mut(i);
            for k in 0..r {
                row[k] -= eta * (gu[k] + bu[k]);
            }
        }
        for j in 0..d2 {
            let gv = grad_v.row(j);
            let bv = bal_v.row(j);
            let row = v.row_mut(j);
            for k in 0..r {
                row[k] -= eta * (gv[k] + bv[k]);
            }
        }
        project_incoherent_in_place(&mut u, radius_u);
        project_incoherent_in_place(&mut v, radius_v);
        debug_assert!(radius_u == 0.0 || u.norm_two_inf() <= radius_u * (1.0 + 1e-9));
        debug_assert!(radius_v == 0.0 || v.norm_two_inf() <= radius_v * (1.0 + 1e-9));
    }

    // Final sparse estimate and index split from the last factors.
    let factors = FactorPair { u, v };
    let mut resid = DenseMatrix::zeros(d1, d2);
    for (i, j) in obs.iter() {
        resid.set(i, j, y.get(i, j) - factors.product_entry(i, j));
    }
    let shat = truncate_sparse(&resid, trunc_frac)?;
    let mut omega_star_hat = IndexSet::empty(d1, d2);
    for (i, j) in obs.iter() {
        if shat.get(i, j) != 0.0 {
            omega_star_hat.insert(i, j);
        }
    }
    let omega_pure_hat = obs.difference(&omega_star_hat)?;
    let xhat = factors.product();

    Ok(RpcaEstimate {
        factors,
        xhat,
        shat,
        omega_star_hat,
        omega_pure_hat,
        iters_run,
        final_objective: objective,
    })
}

/// `AᵀA` for a skinny factor.
fn gram(a: &DenseMatrix) -> DenseMatrix {
    let r = a.cols();
    let mut g = DenseMatrix::zeros(r, r);
    for i in 0..a.rows() {
        let row = a.row(i);
        for p in 0..r {
            let rp = row[p];
            if rp != 0.0 {
                kernel::axpy(rp, row, g.row_mut(p));
            }
        }
    }
    g
}

fn gram_sum(u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let gu = gram(u);
    let gv = gram(v);
    gu.add_scaled(1.0, &gv).expect("factors share rank")
}

/// `A * B` where `B` is small (`r x r`).
fn mat_mul_small(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (n, r) = a.dims();
    debug_assert_eq!(b.rows(), r);
    let mut out = DenseMatrix::zeros(n, b.cols());
    for i in 0..n {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik != 0.0 {
                kernel::axpy(aik, b.row(k), orow);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stage, StreamKey};

    fn random_factors(d1: usize, d2: usize, r: usize, seed: u64) -> FactorPair {
        let mut rng = StreamKey::new(seed).child(stage::LOWRANK).rng();
        let scale = 1.0 / (r as f64).sqrt();
        let u = DenseMatrix::from_fn(d1, r, |_, _| rng.normal() * scale);
        let v = DenseMatrix::from_fn(d2, r, |_, _| rng.normal() * scale);
        FactorPair::new(u, v).unwrap()
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let d = a.get(i, j) - b.get(i, j);
                num += d * d;
                den += b.get(i, j) * b.get(i, j);
            }
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    #[test]
    fn loss_zero_on_exact_fit() {
        let f = random_factors(5, 4, 2, 1);
        let y = f.product();
        let s = DenseMatrix::zeros(5, 4);
        let obs = IndexSet::full(5, 4);
        let (loss, gu, gv) = loss_and_gradients(&f, &s, &y, &obs, 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(gu.is_zero() && gv.is_zero());
    }

    #[test]
    fn loss_hand_case_1x1() {
        let u = DenseMatrix::from_rows(&[&[2.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[&[3.0]]).unwrap();
        let f = FactorPair::new(u, v).unwrap();
        let s = DenseMatrix::zeros(1, 1);
        let y = DenseMatrix::from_rows(&[&[7.0]]).unwrap();
        let obs = IndexSet::full(1, 1);
        let (loss, gu, gv) = loss_and_gradients(&f, &s, &y, &obs, 1.0).unwrap();
        assert!((loss - 0.5).abs() < 1e-15);
        assert!((gu.get(0, 0) + 3.0).abs() < 1e-15);
        assert!((gv.get(0, 0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d1 = 8;
        let d2 = 6;
        let r = 2;
        let key = StreamKey::new(42);
        let f = random_factors(d1, d2, r, 7);
        let mut rng = key.child(stage::NOISE).rng();
        let y = DenseMatrix::from_fn(d1, d2, |_, _| rng.normal());
        let mut s = DenseMatrix::zeros(d1, d2);
        let mut mask_rng = key.child(stage::MASK).rng();
        let mut obs = IndexSet::empty(d1, d2);
        for i in 0..d1 {
            for j in 0..d2 {
                if mask_rng.bernoulli(0.8) {
                    obs.insert(i, j);
                    if mask_rng.bernoulli(0.2) {
                        s.set(i, j, rng.normal());
                    }
                }
            }
        }
        let p_hat = 0.8;
        let (_, gu, gv) = loss_and_gradients(&f, &s, &y, &obs, p_hat).unwrap();
        let h = 1e-6;
        let loss_at = |f: &FactorPair| loss_and_gradients(f, &s, &y, &obs, p_hat).unwrap().0;
        for i in 0..d1 {
            for k in 0..r {
                let mut fp = f.clone();
                let mut fm = f.clone();
                fp.u.set(i, k, f.u.get(i, k) + h);
                fm.u.set(i, k, f.u.get(i, k) - h);
                let fd = (loss_at(&fp) - loss_at(&fm)) / (2.0 * h);
                let g = gu.get(i, k);
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "dU[{i},{k}]: fd {fd} vs {g}"
                );
            }
        }
        for j in 0..d2 {
            for k in 0..r {
                let mut fp = f.clone();
                let mut fm = f.clone();
                fp.v.set(j, k, f.v.get(j, k) + h);
                fm.v.set(j, k, f.v.get(j, k) - h);
                let fd = (loss_at(&fp) - loss_at(&fm)) / (2.0 * h);
                let g = gv.get(j, k);
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "dV[{j},{k}]: fd {fd} vs {g}"
                );
            }
        }
    }

    #[test]
    fn loss_shape_mismatch_errors() {
        let f = random_factors(3, 3, 1, 1);
        let y = DenseMatrix::zeros(3, 3);
        let s = DenseMatrix::zeros(3, 4);
        let obs = IndexSet::full(3, 3);
        assert!(loss_and_gradients(&f, &s, &y, &obs, 1.0).is_err());
    }

    #[test]
    fn initialize_zero_data_gives_zeros() {
        let y = DenseMatrix::zeros(6, 5);
        let obs = IndexSet::full(6, 5);
        let cfg = SolverConfig::with_rank(2);
        let (f, s) = initialize(&y, &obs, &cfg).unwrap();
        assert!(f.u.is_zero() && f.v.is_zero());
        assert!(s.is_zero());
    }

    #[test]
    fn initialize_recovers_rank_one() {
        let f = random_factors(20, 20, 1, 3);
        let y = f.product();
        let obs = IndexSet::full(20, 20);
        let mut cfg = SolverConfig::with_rank(1);
        cfg.sparsity_beta = 0.0;
        cfg.init_iters = 10;
        let (f0, _) = initialize(&y, &obs, &cfg).unwrap();
        let err = rel_err(&f0.product(), &y);
        assert!(err < 0.1, "relative error {err}");
    }

    #[test]
    fn initialize_single_step_trace() {
        // With X0 = S0 = 0 and effective step tau = 1, the first S update
        // hard-thresholds the observed data directly.
        let mut rng = StreamKey::new(12).rng();
        let y = DenseMatrix::from_fn(7, 6, |_, _| rng.normal());
        let mut obs = IndexSet::empty(7, 6);
        for i in 0..7 {
            for j in 0..6 {
                if rng.bernoulli(0.7) {
                    obs.insert(i, j);
                }
            }
        }
        let mut cfg = SolverConfig::with_rank(2);
        cfg.sparsity_beta = 0.2;
        cfg.lambda = 1.0;
        cfg.init_iters = 1;

        let budget = (cfg.sparsity_beta * obs.len() as f64).floor() as usize;
        let mut projected = DenseMatrix::zeros(7, 6);
        for (i, j) in obs.iter() {
            projected.set(i, j, y.get(i, j));
        }
        let expect = hard_threshold(&projected, budget).unwrap();
        let (_, s1) = initialize(&y, &obs, &cfg).unwrap();
        assert_eq!(s1, expect);
    }

    #[test]
    fn initialize_empty_obs_errors() {
        let y = DenseMatrix::zeros(4, 4);
        let obs = IndexSet::empty(4, 4);
        let cfg = SolverConfig::with_rank(1);
        match initialize(&y, &obs, &cfg) {
            Err(Error::InsufficientData(_)) => {}
            other => panic!("expected insufficient-data, got {other:?}"),
        }
    }

    #[test]
    fn solve_exact_instance() {
        let f = random_factors(40, 40, 2, 9);
        let y = f.product();
        let obs = IndexSet::full(40, 40);
        let mut cfg = SolverConfig::with_rank(2);
        cfg.sparsity_beta = 0.01;
        let est = solve(&y, &obs, &cfg).unwrap();
        let err = rel_err(&est.xhat, &y);
        assert!(err <= 1e-3, "relative error {err}");
        assert!(est.iters_run <= 300);
    }

    /// Bernoulli support resampled until every row and column stays within
    /// the dispersed-sparsity cap the solver is designed for.
    pub(crate) fn dispersed_support(
        d1: usize,
        d2: usize,
        beta: f64,
        cap_frac: f64,
        seed: u64,
    ) -> IndexSet {
        let cap_row = (cap_frac * d2 as f64).floor() as usize;
        let cap_col = (cap_frac * d1 as f64).floor() as usize;
        'attempt: for attempt in 0..10_000u64 {
            let mut rng = StreamKey::new(seed ^ (attempt << 32)).child(stage::SPARSE).rng();
            let mut support = IndexSet::empty(d1, d2);
            let mut rows = alloc::vec![0usize; d1];
            let mut cols = alloc::vec![0usize; d2];
            for i in 0..d1 {
                for j in 0..d2 {
                    if rng.bernoulli(beta) {
                        support.insert(i, j);
                        rows[i] += 1;
                        cols[j] += 1;
                    }
                }
            }
            if rows.iter().any(|&c| c > cap_row) || cols.iter().any(|&c| c > cap_col) {
                continue 'attempt;
            }
            return support;
        }
        panic!("no dispersed support found");
    }

    #[test]
    fn solve_planted_corruption() {
        let d = 60;
        let r = 3;
        let f = random_factors(d, d, r, 21);
        let x = f.product();
        let xmax = x.norm_max_abs();
        let mut cfg = SolverConfig::with_rank(r);
        cfg.sparsity_beta = 0.05;
        // Corruption from the dispersed class the truncation budget targets.
        let support = dispersed_support(d, d, 0.05, cfg.gamma * cfg.sparsity_beta, 22);
        let mut rng = StreamKey::new(23).child(stage::SPARSE).rng();
        let mut y = x.clone();
        for (i, j) in support.iter() {
            let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            y.set(i, j, x.get(i, j) + sign * 10.0 * xmax);
        }
        let obs = IndexSet::full(d, d);
        let est = solve(&y, &obs, &cfg).unwrap();
        let err = rel_err(&est.xhat, &x);
        assert!(err <= 1e-2, "relative error {err}");
        let hits = support
            .iter()
            .filter(|&(i, j)| est.omega_star_hat.contains(i, j))
            .count();
        let recall = hits as f64 / support.len().max(1) as f64;
        assert!(recall >= 0.9, "support recall {recall}");
    }

    #[test]
    fn solve_empty_obs_errors() {
        let y = DenseMatrix::zeros(5, 5);
        let obs = IndexSet::empty(5, 5);
        let cfg = SolverConfig::with_rank(1);
        assert!(matches!(
            solve(&y, &obs, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn solve_is_deterministic() {
        let f = random_factors(25, 20, 2, 5);
        let mut y = f.product();
        let mut rng = StreamKey::new(6).child(stage::NOISE).rng();
        for v in y.data_mut() {
            *v += 0.01 * rng.normal();
        }
        let mut mask_rng = StreamKey::new(6).child(stage::MASK).rng();
        let mut obs = IndexSet::empty(25, 20);
        for i in 0..25 {
            for j in 0..20 {
                if mask_rng.bernoulli(0.8) {
                    obs.insert(i, j);
                }
            }
        }
        let cfg = SolverConfig::with_rank(2);
        let a = solve(&y, &obs, &cfg).unwrap();
        let b = solve(&y, &obs, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_partition_and_budget_invariants() {
        let f = random_factors(30, 30, 2, 8);
        let mut y = f.product();
        let mut rng = StreamKey::new(9).child(stage::NOISE).rng();
        for v in y.data_mut() {
            *v += 0.05 * rng.normal();
        }
        let mut mask_rng = StreamKey::new(9).child(stage::MASK).rng();
        let mut obs = IndexSet::empty(30, 30);
        for i in 0..30 {
            for j in 0..30 {
                if mask_rng.bernoulli(0.6) {
                    obs.insert(i, j);
                }
            }
        }
        let mut cfg = SolverConfig::with_rank(2);
        cfg.sparsity_beta = 0.1;
        let est = solve(&y, &obs, &cfg).unwrap();
        let union = est.omega_star_hat.union(&est.omega_pure_hat).unwrap();
        assert_eq!(union, obs);
        let inter = est
            .omega_star_hat
            .intersection(&est.omega_pure_hat)
            .unwrap();
        assert!(inter.is_empty());
        // S zero outside obs and within dispersed budgets at fraction γβ.
        let frac = (cfg.gamma * cfg.sparsity_beta).min(1.0);
        let k_budget = (frac * 30.0).floor() as usize;
        for i in 0..30 {
            let nnz = est.shat.row(i).iter().filter(|v| **v != 0.0).count();
            assert!(nnz <= k_budget);
        }
        for j in 0..30 {
            let nnz = (0..30).filter(|&i| est.shat.get(i, j) != 0.0).count();
            assert!(nnz <= k_budget);
            for i in 0..30 {
                if !obs.contains(i, j) {
                    assert_eq!(est.shat.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn halving_eta_does_not_help_much() {
        // Sanity check on the auto step: halving it must not reduce the
        // final objective by more than 1%.
        let f = random_factors(30, 25, 2, 13);
        let mut y = f.product();
        let mut rng = StreamKey::new(14).child(stage::NOISE).rng();
        for v in y.data_mut() {
            *v += 0.02 * rng.normal();
        }
        let obs = IndexSet::full(30, 25);
        let mut cfg = SolverConfig::with_rank(2);
        cfg.sparsity_beta = 0.05;
        let est_auto = solve(&y, &obs, &cfg).unwrap();

        let (f0, _) = initialize(&y, &obs, &cfg).unwrap();
        let top = sym_eig_max(&gram_sum(&f0.u, &f0.v));
        let mut cfg_half = cfg.clone();
        cfg_half.eta = StepSize::Fixed(0.5 / top);
        let est_half = solve(&y, &obs, &cfg_half).unwrap();
        assert!(
            est_auto.final_objective <= est_half.final_objective * 1.01,
            "auto {} vs half {}",
            est_auto.final_objective,
            est_half.final_objective
        );
    }

    #[test]
    fn huge_step_diverges_with_iteration_info() {
        // Near-exact data gives a tiny initial objective; a wild fixed step
        // then blows past the 1e12x divergence guard.
        let f = random_factors(20, 20, 2, 4);
        let mut y = f.product();
        let mut rng = StreamKey::new(4).child(stage::NOISE).rng();
        for v in y.data_mut() {
            *v += 1e-9 * rng.normal();
        }
        let obs = IndexSet::full(20, 20);
        let mut cfg = SolverConfig::with_rank(2);
        cfg.sparsity_beta = 0.001; // no sparse absorption: init is near-exact
        cfg.eta = StepSize::Fixed(1e4);
        cfg.tol = 1e-30;
        match solve(&y, &obs, &cfg) {
            Err(Error::Divergence { iteration }) => assert!(iteration >= 1),
            other => {
                let info = other.map(|e| (e.iters_run, e.final_objective));
                panic!("expected divergence, got {info:?}")
            }
        }
    }
}
