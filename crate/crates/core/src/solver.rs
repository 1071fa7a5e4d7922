//! Accelerated proximal gradient (FISTA) for `½‖y − Xβ‖² + σ J_λ(β)`.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{check_positive, Error, Result};
use crate::sorted_l1::{
    dual_infeasibility_unchecked, dual_norm, prox_sorted_l1_into, sorted_l1_norm_unchecked,
    LambdaSchedule,
};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Output of [`solve_slope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    /// Indices with `beta[i] != 0`, ascending.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// Primal-dual gap at the returned iterate.
    pub gap: f64,
    pub objective: f64,
    /// False when `max_iter` was reached before the stopping rule held.
    pub converged: bool,
}

/// A penalty `σ·P(b)` the FISTA core can handle.
pub(crate) trait Penalty {
    /// `σ·P(b)`.
    fn value(&self, b: &[f64]) -> f64;
    /// `prox_{step·σ·P}(v)` into `out`.
    fn prox(&self, v: &[f64], step: f64, out: &mut [f64]);
    /// Distance-like measure of `g/σ` outside the dual unit ball of `P`.
    fn dual_infeasibility(&self, g: &[f64]) -> f64;
    /// `P*(g)/σ`, or `None` when infinite.
    fn scaled_dual_norm(&self, g: &[f64]) -> Option<f64>;
}

pub(crate) struct SortedL1<'a> {
    pub lam: &'a [f64],
    pub sigma: f64,
}

impl Penalty for SortedL1<'_> {
    fn value(&self, b: &[f64]) -> f64 {
        self.sigma * sorted_l1_norm_unchecked(b, self.lam)
    }

    fn prox(&self, v: &[f64], step: f64, out: &mut [f64]) {
        prox_sorted_l1_into(v, self.lam, step * self.sigma, out);
    }

    fn dual_infeasibility(&self, g: &[f64]) -> f64 {
        let scaled: Vec<f64> = g.iter().map(|x| x / self.sigma).collect();
        dual_infeasibility_unchecked(&scaled, self.lam)
    }

    fn scaled_dual_norm(&self, g: &[f64]) -> Option<f64> {
        dual_norm(g, self.lam).map(|d| d / self.sigma)
    }
}

/// Loss, gradient and `yᵀXb` at one point.
struct Eval {
    grad: DVector<f64>,
    loss: f64,
    y_dot_xb: f64,
}

fn evaluate(x: &DesignMatrix, y: &DVector<f64>, b: &DVector<f64>) -> Eval {
    let xb = x.mul_vec(b);
    let r = &xb - y;
    Eval {
        grad: x.tr_mul_vec(&r),
        loss: 0.5 * r.norm_squared(),
        y_dot_xb: y.dot(&xb),
    }
}

/// Largest eigenvalue of `XᵀX` by power iteration from a fixed start.
pub(crate) fn lipschitz(x: &DesignMatrix) -> f64 {
    if x.is_identity() {
        return 1.0;
    }
    let m = x.ncols();
    // a constant start is an exact eigenvector of exchangeable designs, so
    // use an irregular one
    let mut v = DVector::from_fn(m, |i, _| 1.0 + (i as f64 * 0.618_033_988_749_895).fract());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = x.tr_mul_vec(&x.mul_vec(&v));
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - est).abs() <= 1e-10 * next {
            return next;
        }
        est = next;
    }
    est
}

pub(crate) struct CoreFit {
    pub b: DVector<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub objective: f64,
    pub converged: bool,
}

/// FISTA with objective restart. Stops when `g/σ` is within `tol` of the
/// dual ball and the duality gap is at most `tol · max(1, P)`.
pub(crate) fn fista(
    x: &DesignMatrix,
    y: &DVector<f64>,
    penalty: &impl Penalty,
    tol: f64,
    max_iter: usize,
) -> Result<CoreFit> {
    let m = x.ncols();
    let l = lipschitz(x);
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::contract("design has no nonzero singular value"));
    }
    let t = 1.0 / l;
    let yy = y.norm_squared();

    let objective = |e: &Eval, b: &DVector<f64>| e.loss + penalty.value(b.as_slice());
    // gap at b, or None if the dual norm is infinite (all-zero penalty)
    let gap = |e: &Eval, p: f64| -> Option<f64> {
        let s = penalty.scaled_dual_norm(e.grad.as_slice())?.max(1.0);
        let rr = 2.0 * e.loss;
        let yr = yy - e.y_dot_xb;
        let d = 0.5 * yy - 0.5 * (yy - 2.0 * yr / s + rr / (s * s));
        Some((p - d).max(0.0))
    };
    let stop = |e: &Eval, p: f64| -> (bool, f64) {
        let g = gap(e, p);
        let feasible = penalty.dual_infeasibility(e.grad.as_slice()) <= tol;
        match g {
            Some(g) => (feasible && g <= tol * p.max(1.0), g),
            None => (feasible, 0.0),
        }
    };

    let mut b = DVector::zeros(m);
    let mut eb = evaluate(x, y, &b);
    let mut pb = objective(&eb, &b);
    let (done, mut last_gap) = stop(&eb, pb);
    if done {
        return Ok(CoreFit {
            b,
            iterations: 0,
            gap: last_gap,
            objective: pb,
            converged: true,
        });
    }

    let mut grad_a = eb.grad.clone();
    let mut a = b.clone();
    let mut theta = 1.0f64;
    let mut step_in = DVector::zeros(m);
    let mut out = DVector::zeros(m);

    for iter in 1..=max_iter {
        step_in.copy_from(&a);
        step_in.axpy(-t, &grad_a, 1.0);
        penalty.prox(step_in.as_slice(), t, out.as_mut_slice());
        let mut e_new = evaluate(x, y, &out);
        let mut p_new = objective(&e_new, &out);

        let mut restarted = false;
        if p_new > pb {
            // momentum overshot: take a plain proximal step from b instead
            step_in.copy_from(&b);
            step_in.axpy(-t, &eb.grad, 1.0);
            penalty.prox(step_in.as_slice(), t, out.as_mut_slice());
            e_new = evaluate(x, y, &out);
            p_new = objective(&e_new, &out);
            restarted = true;
        }
        if !(p_new.is_finite()) {
            return Err(Error::contract("objective became non-finite"));
        }

        let theta_next = if restarted {
            1.0
        } else {
            2.0 / (1.0 + (1.0 + 4.0 / (theta * theta)).sqrt())
        };
        let mu = if restarted {
            0.0
        } else {
            theta_next * (1.0 / theta - 1.0)
        };

        // a = b_new + μ(b_new − b); the gradient is affine in the iterate
        a.copy_from(&out);
        a *= 1.0 + mu;
        a.axpy(-mu, &b, 1.0);
        grad_a.copy_from(&e_new.grad);
        grad_a *= 1.0 + mu;
        grad_a.axpy(-mu, &eb.grad, 1.0);

        std::mem::swap(&mut b, &mut out);
        eb = e_new;
        pb = p_new;
        theta = theta_next;

        let (done, g) = stop(&eb, pb);
        last_gap = g;
        if done {
            return Ok(CoreFit {
                b,
                iterations: iter,
                gap: g,
                objective: pb,
                converged: true,
            });
        }
    }
    Ok(CoreFit {
        b,
        iterations: max_iter,
        gap: last_gap,
        objective: pb,
        converged: false,
    })
}

pub(crate) fn check_problem(x: &DesignMatrix, y: &[f64], sigma: f64, tol: f64, max_iter: usize) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::contract(format!(
            "response has length {} but the design has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("response contains non-finite values"));
    }
    check_positive("sigma", sigma)?;
    check_positive("tol", tol)?;
    if max_iter == 0 {
        return Err(Error::contract("max_iter must be at least 1"));
    }
    Ok(())
}

pub(crate) fn support_of(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Minimizes `½‖y − Xβ‖² + σ J_λ(β)` from `β = 0`.
pub fn solve_slope(
    x: &DesignMatrix,
    y: &[f64],
    lam: &LambdaSchedule,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FitResult> {
    check_problem(x, y, sigma, tol, max_iter)?;
    if lam.len() != x.ncols() {
        return Err(Error::contract(format!(
            "schedule has length {} but the design has {} columns",
            lam.len(),
            x.ncols()
        )));
    }
    let penalty = SortedL1 {
        lam: lam.values(),
        sigma,
    };
    let fit = fista(x, &DVector::from_column_slice(y), &penalty, tol, max_iter)?;
    let beta: Vec<f64> = fit.b.iter().copied().collect();
    Ok(FitResult {
        support: support_of(&beta),
        beta,
        iterations: fit.iterations,
        gap: fit.gap,
        objective: fit.objective,
        converged: fit.converged,
    })
}

/// Selection counts for one fit against a known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    /// False selections.
    pub v: usize,
    /// Total selections.
    pub r: usize,
    /// True selections.
    pub tp: usize,
    /// `V / max(R, 1)`.
    pub fdp: f64,
    /// `V >= k`.
    pub k_hit: bool,
    /// `FDP > γ`.
    pub fdp_exceeds: bool,
    /// `TP / |truth|`, or 1 when the truth is empty.
    pub power: f64,
}

impl SupportMetrics {
    pub fn from_sets(selected: &[usize], truth: &BTreeSet<usize>, k: usize, gamma: f64) -> Self {
        let r = selected.len();
        let tp = selected.iter().filter(|i| truth.contains(i)).count();
        let v = r - tp;
        let fdp = v as f64 / r.max(1) as f64;
        SupportMetrics {
            v,
            r,
            tp,
            fdp,
            k_hit: v >= k,
            fdp_exceeds: fdp > gamma,
            power: if truth.is_empty() {
                1.0
            } else {
                tp as f64 / truth.len() as f64
            },
        }
    }
}

pub fn support_metrics(fit: &FitResult, truth: &BTreeSet<usize>, k: usize, gamma: f64) -> SupportMetrics {
    SupportMetrics::from_sets(&fit.support, truth, k, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_finds_top_eigenvalue_of_exchangeable_gram() {
        // XᵀX = I + J has the constant vector as its top eigenvector and
        // every other direction at 1; X = (I + J)^{1/2} via 1 + (√(m+1) − 1)/m · J
        let m = 6;
        let c = ((m as f64 + 1.0).sqrt() - 1.0) / m as f64;
        let x = nalgebra::DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 + c } else { c });
        let l = lipschitz(&DesignMatrix::unnormalized(x).unwrap());
        assert!((l - (m as f64 + 1.0)).abs() < 1e-6);
        // and the reverse case, where the constant vector is the bottom one
        let x = nalgebra::DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { -0.1 });
        let gram = x.transpose() * &x;
        let top = gram.symmetric_eigen().eigenvalues.max();
        let l = lipschitz(&DesignMatrix::unnormalized(x).unwrap());
        assert!((l - top).abs() < 1e-6 * top);
    }
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(n: usize, m: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        DesignMatrix::normalized_from(x).unwrap()
    }

    #[test]
    fn identity_design_is_one_prox() {
        let y = vec![3.0, -0.2, 1.5, 0.7, -2.5];
        let lam = LambdaSchedule::custom(vec![1.2, 1.0, 0.8, 0.5, 0.1]).unwrap();
        let x = DesignMatrix::identity(5).unwrap();
        let fit = solve_slope(&x, &y, &lam, 1.0, 1e-10, 100).unwrap();
        let prox = crate::sorted_l1::prox_sorted_l1(&y, &lam).unwrap();
        assert_eq!(fit.beta, prox);
        assert!(fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn zero_penalty_gives_least_squares() {
        let x = random_design(30, 6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lam = LambdaSchedule::custom(vec![0.0; 6]).unwrap();
        let fit = solve_slope(&x, &y, &lam, 1.0, 1e-9, 100_000).unwrap();
        assert!(fit.converged);
        let r = DVector::from_vec(y) - x.mul_vec(&DVector::from_vec(fit.beta));
        assert!(x.tr_mul_vec(&r).amax() < 1e-6);
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let x = random_design(20, 8, 3);
        let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let lam = LambdaSchedule::custom(vec![1e6; 8]).unwrap();
        let fit = solve_slope(&x, &y, &lam, 1.0, 1e-8, 100).unwrap();
        assert!(fit.support.is_empty());
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn sigma_scaling_matches_scaled_schedule() {
        let x = random_design(40, 10, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lam = LambdaSchedule::custom((0..10).map(|i| 1.5 - 0.1 * i as f64).collect()).unwrap();
        let a = solve_slope(&x, &y, &lam, 2.0, 1e-12, 100_000).unwrap();
        let b = solve_slope(&x, &y, &lam.scaled(2.0).unwrap(), 1.0, 1e-12, 100_000).unwrap();
        for (p, q) in a.beta.iter().zip(&b.beta) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DesignMatrix::identity(3).unwrap();
        let lam = LambdaSchedule::custom(vec![1.0; 3]).unwrap();
        assert!(solve_slope(&x, &[1.0, f64::NAN, 0.0], &lam, 1.0, 1e-8, 10).is_err());
        assert!(solve_slope(&x, &[1.0, 0.0], &lam, 1.0, 1e-8, 10).is_err());
        assert!(solve_slope(&x, &[1.0, 0.0, 0.0], &lam, 0.0, 1e-8, 10).is_err());
        let short = LambdaSchedule::custom(vec![1.0; 2]).unwrap();
        assert!(solve_slope(&x, &[1.0, 0.0, 0.0], &short, 1.0, 1e-8, 10).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x = random_design(30, 20, 6);
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let lam = LambdaSchedule::custom(vec![0.01; 20]).unwrap();
        let fit = solve_slope(&x, &y, &lam, 1.0, 1e-14, 2).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }

    #[test]
    fn metrics_examples() {
        let truth: BTreeSet<usize> = (0..8).collect();
        let empty = SupportMetrics::from_sets(&[], &truth, 1, 0.1);
        assert_eq!((empty.v, empty.r, empty.fdp, empty.k_hit), (0, 0, 0.0, false));
        let exact = SupportMetrics::from_sets(&(0..8).collect::<Vec<_>>(), &truth, 1, 0.1);
        assert_eq!((exact.v, exact.power), (0, 1.0));
        let sel: Vec<usize> = (0..8).chain([20, 21]).collect();
        let m = SupportMetrics::from_sets(&sel, &truth, 2, 0.1);
        assert_eq!((m.v, m.r, m.tp), (2, 10, 8));
        assert!((m.fdp - 0.2).abs() < 1e-15);
        assert!(m.k_hit && m.fdp_exceeds);
    }
}
