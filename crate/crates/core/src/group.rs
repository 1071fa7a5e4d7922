//! Group SLOPE: per-group orthogonalization, the group-norm prox and the
//! standardized solver.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{check_positive, Error, Result};
use crate::schedules::GroupMeta;
use crate::solver::{check_problem, fista, Penalty, SupportMetrics};
use crate::sorted_l1::{
    dual_infeasibility_unchecked, dual_norm, prox_sorted_l1_into, sorted_l1_norm_unchecked,
    LambdaSchedule,
};

/// Relative rank cutoff for the pivoted QR.
pub const RANK_TOL: f64 = 1e-10;

/// Group weight conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// `w_i = sqrt(|I_i|)`.
    #[default]
    SqrtSize,
    /// `w_i = 1 / sqrt(|I_i|)`.
    InvSqrtSize,
    /// `w_i = 1`.
    Unit,
}

impl WeightScheme {
    fn weight(self, size: usize) -> f64 {
        match self {
            WeightScheme::SqrtSize => (size as f64).sqrt(),
            WeightScheme::InvSqrtSize => 1.0 / (size as f64).sqrt(),
            WeightScheme::Unit => 1.0,
        }
    }
}

/// Disjoint groups covering `0..m`, each with a positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    m: usize,
}

impl GroupPartition {
    /// `groups` must be nonempty, disjoint and cover `0..m`. Indices inside a
    /// group are kept in the given order.
    pub fn new(groups: Vec<Vec<usize>>, m: usize, weights: Option<Vec<f64>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::contract("partition needs at least one group"));
        }
        let mut seen = vec![false; m];
        for (g, idx) in groups.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::contract(format!("group {g} is empty")));
            }
            for &j in idx {
                if j >= m {
                    return Err(Error::contract(format!(
                        "group {g} contains feature {j}, but m = {m}"
                    )));
                }
                if seen[j] {
                    return Err(Error::contract(format!("feature {j} is in more than one group")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::contract(format!("feature {j} is in no group")));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != groups.len() {
                    return Err(Error::contract(format!(
                        "{} weights for {} groups",
                        w.len(),
                        groups.len()
                    )));
                }
                for &v in &w {
                    check_positive("weight", v)?;
                }
                w
            }
            None => groups
                .iter()
                .map(|g| WeightScheme::SqrtSize.weight(g.len()))
                .collect(),
        };
        Ok(GroupPartition { groups, weights, m })
    }

    /// Consecutive groups of the given sizes.
    pub fn contiguous(sizes: &[usize], scheme: WeightScheme) -> Result<Self> {
        let mut start = 0;
        let groups: Vec<Vec<usize>> = sizes
            .iter()
            .map(|&s| {
                let g = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        let weights = sizes.iter().map(|&s| scheme.weight(s)).collect();
        Self::new(groups, start, Some(weights))
    }

    /// Groups from one label per feature; groups are ordered by label.
    pub fn from_labels(labels: &[u64], scheme: WeightScheme) -> Result<Self> {
        let mut by_label: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (j, &l) in labels.iter().enumerate() {
            by_label.entry(l).or_default().push(j);
        }
        let groups: Vec<Vec<usize>> = by_label.into_values().collect();
        let weights = groups.iter().map(|g| scheme.weight(g.len())).collect();
        Self::new(groups, labels.len(), Some(weights))
    }

    /// Every feature on its own with weight 1.
    pub fn singletons(m: usize) -> Result<Self> {
        Self::contiguous(&vec![1; m], WeightScheme::Unit)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_features(&self) -> usize {
        self.m
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self = Self::new(self.groups, self.m, Some(weights))?;
        Ok(self)
    }
}

/// Thin QR with column-norm pivoting of an `n × p` block. Returns `(U, R)`
/// with `U` of size `n × r` (orthonormal columns), `R` of size `r × p` in the
/// original column order, and `block = U R`.
pub fn pivoted_qr(block: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, p) = block.shape();
    let mut a = block.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut reflectors: Vec<DVector<f64>> = Vec::new();
    let mut first_norm = 0.0;
    let steps = n.min(p);
    let mut rank = 0;

    for k in 0..steps {
        let (mut best, mut best_norm) = (k, -1.0);
        for j in k..p {
            let norm = a.view((k, j), (n - k, 1)).norm();
            if norm > best_norm {
                best = j;
                best_norm = norm;
            }
        }
        if k == 0 {
            first_norm = best_norm;
        }
        if best_norm <= RANK_TOL * first_norm || best_norm == 0.0 {
            break;
        }
        a.swap_columns(k, best);
        perm.swap(k, best);

        let mut v: DVector<f64> = a.view((k, k), (n - k, 1)).column(0).into_owned();
        let alpha = if v[0] >= 0.0 { -best_norm } else { best_norm };
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            let mut tail = a.view_mut((k, k), (n - k, p - k));
            let proj = v.tr_mul(&tail);
            tail -= 2.0 * &v * proj;
        }
        reflectors.push(v);
        rank = k + 1;
    }

    // U = H_0 ⋯ H_{r−1} applied to the first r unit vectors
    let mut u = DMatrix::zeros(n, rank);
    for j in 0..rank {
        u[(j, j)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let mut tail = u.view_mut((k, 0), (n - k, rank));
        let proj = v.tr_mul(&tail);
        tail -= 2.0 * v * proj;
    }

    let mut r = DMatrix::zeros(rank, p);
    for i in 0..rank {
        for (col, &orig) in perm.iter().enumerate() {
            if col >= i {
                r[(i, orig)] = a[(i, col)];
            }
        }
    }
    // positive diagonal
    for i in 0..rank {
        if a[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            u.column_mut(i).neg_mut();
        }
    }
    (u, r)
}

/// Block-orthonormal reformulation `X_{I_i} = U_i R_i`.
#[derive(Debug, Clone)]
pub struct StandardizedProblem {
    x_tilde: DesignMatrix,
    r_blocks: Vec<DMatrix<f64>>,
    blocks: Vec<Range<usize>>,
    partition: GroupPartition,
}

/// Factors every group block of `x`.
pub fn standardize(x: &DesignMatrix, part: &GroupPartition) -> Result<StandardizedProblem> {
    if part.num_features() != x.ncols() {
        return Err(Error::contract(format!(
            "partition covers {} features but the design has {} columns",
            part.num_features(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    let mut us = Vec::with_capacity(part.num_groups());
    let mut r_blocks = Vec::with_capacity(part.num_groups());
    for (g, idx) in part.groups().iter().enumerate() {
        let block = x.select_columns(idx);
        if block.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateGroup { group: g });
        }
        let (u, r) = pivoted_qr(&block);
        us.push(u);
        r_blocks.push(r);
    }
    let total: usize = us.iter().map(|u| u.ncols()).sum();
    let mut x_tilde = DMatrix::zeros(n, total);
    let mut blocks = Vec::with_capacity(us.len());
    let mut start = 0;
    for u in &us {
        x_tilde.view_mut((0, start), (n, u.ncols())).copy_from(u);
        blocks.push(start..start + u.ncols());
        start += u.ncols();
    }
    Ok(StandardizedProblem {
        x_tilde: DesignMatrix::unnormalized(x_tilde)?,
        r_blocks,
        blocks,
        partition: part.clone(),
    })
}

impl StandardizedProblem {
    pub fn x_tilde(&self) -> &DesignMatrix {
        &self.x_tilde
    }

    pub fn r_block(&self, g: usize) -> &DMatrix<f64> {
        &self.r_blocks[g]
    }

    /// Column range of group `g` inside `X̃`.
    pub fn block(&self, g: usize) -> Range<usize> {
        self.blocks[g].clone()
    }

    /// Numerical ranks `l_i`.
    pub fn ranks(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.len() as u32).collect()
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    /// Ranks and weights in the form the group schedules take.
    pub fn group_meta(&self) -> Result<GroupMeta> {
        GroupMeta::new(self.ranks(), self.partition.weights().to_vec())
    }

    /// `β` with `R_i β_{I_i} = c_{𝕀_i}`, minimum-norm when `R_i` is wide.
    pub fn back_transform(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.x_tilde.ncols() {
            return Err(Error::contract(format!(
                "coefficient vector has length {} but X̃ has {} columns",
                c.len(),
                self.x_tilde.ncols()
            )));
        }
        let mut beta = vec![0.0; self.partition.num_features()];
        for (g, idx) in self.partition.groups().iter().enumerate() {
            let cb = DVector::from_column_slice(&c[self.blocks[g].clone()]);
            if cb.iter().all(|v| *v == 0.0) {
                continue;
            }
            let r = &self.r_blocks[g];
            let rrt = r * r.transpose();
            let z = rrt
                .cholesky()
                .ok_or_else(|| Error::Singular(format!("R R^T of group {g}")))?
                .solve(&cb);
            let b = r.tr_mul(&z);
            for (k, &j) in idx.iter().enumerate() {
                beta[j] = b[k];
            }
        }
        Ok(beta)
    }

    /// `‖c_{𝕀_i}‖₂` for every group.
    pub fn block_norms(&self, c: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| c[b.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// `argmin_{g ≥ 0} ½‖g − v‖² + step·Σ_i λ_i (W g)_(i)` for non-negative `v`.
pub fn group_prox(v_norms: &[f64], weights: &[f64], lam: &LambdaSchedule, step: f64) -> Result<Vec<f64>> {
    let t = v_norms.len();
    if weights.len() != t || lam.len() != t {
        return Err(Error::contract(format!(
            "group prox needs matching lengths (norms {t}, weights {}, schedule {})",
            weights.len(),
            lam.len()
        )));
    }
    if v_norms.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::contract("group norms must be finite and non-negative"));
    }
    for &w in weights {
        check_positive("weight", w)?;
    }
    if !(step >= 0.0 && step.is_finite()) {
        return Err(Error::Domain {
            name: "step",
            value: step,
            constraint: "must be finite and non-negative",
        });
    }
    let mut out = vec![0.0; t];
    group_prox_into(v_norms, weights, lam.values(), step, &mut out);
    Ok(out)
}

// stop when an inner step moves no coordinate by more than this, relative
const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITER: usize = 100_000;

pub(crate) fn group_prox_into(v: &[f64], w: &[f64], lam: &[f64], step: f64, out: &mut [f64]) {
    let w0 = w[0];
    if w.iter().all(|&x| x == w0) {
        prox_sorted_l1_into(v, lam, step * w0, out);
        return;
    }
    // in u = W g: minimize ½‖W⁻¹u − v‖² + step·J_λ(u), smooth part has
    // Lipschitz constant 1 / min w²
    let t = v.len();
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let eta = wmin * wmin;
    let grad = |u: &[f64], out: &mut [f64]| {
        for i in 0..t {
            out[i] = (u[i] / w[i] - v[i]) / w[i];
        }
    };
    let scale = v.iter().zip(w).map(|(a, b)| a * b).fold(1.0f64, f64::max);
    let mut u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
    let mut u_prev = u.clone();
    let mut a = u.clone();
    let mut g = vec![0.0; t];
    let mut tmp = vec![0.0; t];
    let mut theta = 1.0f64;
    let objective = |u: &[f64]| -> f64 {
        let q: f64 = (0..t).map(|i| (u[i] / w[i] - v[i]).powi(2)).sum();
        0.5 * q + step * sorted_l1_norm_unchecked(u, lam)
    };
    let mut f_prev = objective(&u);
    for _ in 0..INNER_MAX_ITER {
        grad(&a, &mut g);
        for i in 0..t {
            tmp[i] = a[i] - eta * g[i];
        }
        u_prev.copy_from_slice(&u);
        prox_sorted_l1_into(&tmp, lam, eta * step, &mut u);
        let mut f = objective(&u);
        let mut restarted = false;
        if f > f_prev {
            grad(&u_prev, &mut g);
            for i in 0..t {
                tmp[i] = u_prev[i] - eta * g[i];
            }
            prox_sorted_l1_into(&tmp, lam, eta * step, &mut u);
            f = objective(&u);
            restarted = true;
        }
        let diff = u
            .iter()
            .zip(&u_prev)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        f_prev = f;
        if diff <= INNER_TOL * scale {
            break;
        }
        let theta_next = if restarted {
            1.0
        } else {
            2.0 / (1.0 + (1.0 + 4.0 / (theta * theta)).sqrt())
        };
        let mu = if restarted { 0.0 } else { theta_next * (1.0 / theta - 1.0) };
        for i in 0..t {
            a[i] = u[i] + mu * (u[i] - u_prev[i]);
        }
        theta = theta_next;
    }
    for i in 0..t {
        out[i] = (u[i] / w[i]).max(0.0);
    }
}

struct GroupSortedL1<'a> {
    blocks: &'a [Range<usize>],
    weights: &'a [f64],
    lam: &'a [f64],
    sigma: f64,
}

impl GroupSortedL1<'_> {
    /// `(‖z_{𝕀_i}‖ / w_i)_i`.
    fn weighted_norms_inv(&self, z: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .zip(self.weights)
            .map(|(b, w)| z[b.clone()].iter().map(|v| v * v).sum::<f64>().sqrt() / w)
            .collect()
    }
}

impl Penalty for GroupSortedL1<'_> {
    fn value(&self, c: &[f64]) -> f64 {
        let wg: Vec<f64> = self
            .blocks
            .iter()
            .zip(self.weights)
            .map(|(b, w)| w * c[b.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        self.sigma * sorted_l1_norm_unchecked(&wg, self.lam)
    }

    fn prox(&self, v: &[f64], step: f64, out: &mut [f64]) {
        let norms: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| v[b.clone()].iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut shrunk = vec![0.0; norms.len()];
        group_prox_into(&norms, self.weights, self.lam, step * self.sigma, &mut shrunk);
        for (i, b) in self.blocks.iter().enumerate() {
            let factor = if shrunk[i] == 0.0 || norms[i] == 0.0 {
                0.0
            } else {
                shrunk[i] / norms[i]
            };
            for j in b.clone() {
                out[j] = if factor == 0.0 { 0.0 } else { v[j] * factor };
            }
        }
    }

    fn dual_infeasibility(&self, g: &[f64]) -> f64 {
        let u: Vec<f64> = self
            .weighted_norms_inv(g)
            .into_iter()
            .map(|x| x / self.sigma)
            .collect();
        dual_infeasibility_unchecked(&u, self.lam)
    }

    fn scaled_dual_norm(&self, g: &[f64]) -> Option<f64> {
        dual_norm(&self.weighted_norms_inv(g), self.lam).map(|d| d / self.sigma)
    }
}

/// Output of [`solve_group_slope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFitResult {
    pub beta: Vec<f64>,
    /// `‖X_{I_i} β_{I_i}‖₂` per group.
    pub group_norms: Vec<f64>,
    /// Groups with a nonzero norm, ascending.
    pub selected_groups: Vec<usize>,
    /// Standardized coefficients `c`.
    pub c: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub objective: f64,
    pub converged: bool,
}

/// Solves `min_c ½‖y − X̃c‖² + σ J_λ(W ‖c‖_𝕀)` on an already standardized
/// problem and maps the solution back.
pub fn solve_standardized(
    prob: &StandardizedProblem,
    y: &[f64],
    lam: &LambdaSchedule,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GroupFitResult> {
    check_problem(&prob.x_tilde, y, sigma, tol, max_iter)?;
    let t = prob.partition.num_groups();
    if lam.len() != t {
        return Err(Error::contract(format!(
            "schedule has length {} but there are {t} groups",
            lam.len()
        )));
    }
    let penalty = GroupSortedL1 {
        blocks: &prob.blocks,
        weights: prob.partition.weights(),
        lam: lam.values(),
        sigma,
    };
    let fit = fista(&prob.x_tilde, &DVector::from_column_slice(y), &penalty, tol, max_iter)?;
    let c: Vec<f64> = fit.b.iter().copied().collect();
    let group_norms = prob.block_norms(&c);
    let selected_groups = crate::solver::support_of(&group_norms);
    Ok(GroupFitResult {
        beta: prob.back_transform(&c)?,
        group_norms,
        selected_groups,
        c,
        iterations: fit.iterations,
        gap: fit.gap,
        objective: fit.objective,
        converged: fit.converged,
    })
}

/// Standardizes `x` by groups and solves the group SLOPE problem.
pub fn solve_group_slope(
    x: &DesignMatrix,
    y: &[f64],
    part: &GroupPartition,
    lam: &LambdaSchedule,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GroupFitResult> {
    let prob = standardize(x, part)?;
    solve_standardized(&prob, y, lam, sigma, tol, max_iter)
}

pub fn group_support_metrics(
    fit: &GroupFitResult,
    truth_groups: &BTreeSet<usize>,
    k: usize,
    gamma: f64,
) -> SupportMetrics {
    SupportMetrics::from_sets(&fit.selected_groups, truth_groups, k, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn partition_validation() {
        assert!(GroupPartition::new(vec![vec![0, 1], vec![1]], 2, None).is_err());
        assert!(GroupPartition::new(vec![vec![0]], 2, None).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![]], 1, None).is_err());
        assert!(GroupPartition::new(vec![vec![0, 2]], 2, None).is_err());
        let p = GroupPartition::new(vec![vec![1, 2], vec![0]], 3, None).unwrap();
        assert_eq!(p.weights(), &[2f64.sqrt(), 1.0]);
        let l = GroupPartition::from_labels(&[7, 3, 7, 3, 3], WeightScheme::InvSqrtSize).unwrap();
        assert_eq!(l.groups(), &[vec![1, 3, 4], vec![0, 2]]);
        assert!((l.weights()[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let a = random(12, 4, 1);
        let (u, r) = pivoted_qr(&a);
        assert_eq!(u.ncols(), 4);
        assert!((&u * &r - &a).amax() < 1e-12);
        assert!((u.tr_mul(&u) - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn qr_detects_duplicate_columns() {
        let c = random(10, 1, 2);
        let a = DMatrix::from_columns(&[c.column(0), c.column(0)]);
        let (u, r) = pivoted_qr(&a);
        assert_eq!(r.shape(), (1, 2));
        assert!((&u * &r - &a).amax() < 1e-12);
    }

    #[test]
    fn qr_on_orthonormal_block_is_identity() {
        let (q, _) = pivoted_qr(&random(8, 3, 3));
        let (u, r) = pivoted_qr(&q);
        assert!((r - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((u - q).amax() < 1e-12);
    }

    #[test]
    fn degenerate_group_is_rejected() {
        let mut x = random(5, 3, 4);
        x.column_mut(2).fill(0.0);
        let x = DesignMatrix::unnormalized(x).unwrap();
        let part = GroupPartition::new(vec![vec![0, 1], vec![2]], 3, None).unwrap();
        assert!(matches!(standardize(&x, &part), Err(Error::DegenerateGroup { group: 1 })));
    }

    #[test]
    fn back_transform_reproduces_fit() {
        let x = DesignMatrix::normalized_from(random(30, 6, 5)).unwrap();
        let part = GroupPartition::contiguous(&[2, 3, 1], WeightScheme::SqrtSize).unwrap();
        let prob = standardize(&x, &part).unwrap();
        let c: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let beta = prob.back_transform(&c).unwrap();
        let lhs = x.mul_vec(&DVector::from_vec(beta));
        let rhs = prob.x_tilde().mul_vec(&DVector::from_vec(c));
        assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn equal_weight_group_prox_is_sorted_prox() {
        let v = [3.0, 0.5, 2.0];
        let lam = LambdaSchedule::custom(vec![1.0, 0.6, 0.2]).unwrap();
        let g = group_prox(&v, &[2.0; 3], &lam, 0.5).unwrap();
        let p = crate::sorted_l1::prox_sorted_l1(&v, &lam).unwrap();
        assert_eq!(g, p);
        let zero = LambdaSchedule::custom(vec![0.0; 3]).unwrap();
        assert_eq!(group_prox(&v, &[1.0, 2.0, 3.0], &zero, 1.0).unwrap(), v.to_vec());
    }

    #[test]
    fn unequal_weight_group_prox_beats_perturbations() {
        let v = [2.5, 1.0, 3.0];
        let w = [1.0, 2.0, 3.0];
        let lam = LambdaSchedule::custom(vec![0.9, 0.5, 0.3]).unwrap();
        let g = group_prox(&v, &w, &lam, 1.0).unwrap();
        let obj = |g: &[f64]| {
            let wg: Vec<f64> = g.iter().zip(&w).map(|(a, b)| a * b).collect();
            0.5 * g.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                + sorted_l1_norm_unchecked(&wg, lam.values())
        };
        let base = obj(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let d: Vec<f64> = (0..3)
                .map(|i| (g[i] + rng.random_range(-1e-3..1e-3)).max(0.0))
                .collect();
            assert!(obj(&d) >= base - 1e-9);
        }
    }
}
