//! Sorted-ℓ1 norm, its proximal operator and dual-ball feasibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rule produced a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRule {
    Bh,
    Kfwer,
    Fdp,
    KfwerGaussian,
    FdpGaussian,
    KfwerMonteCarlo,
    FdpMonteCarlo,
    GroupMaxFdr,
    GroupKfwer,
    GroupFdp,
    GroupKfwerCorrected,
    GroupFdpCorrected,
    /// Values supplied directly by the caller.
    Custom,
}

impl ScheduleRule {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleRule::Bh => "bh",
            ScheduleRule::Kfwer => "kfwer",
            ScheduleRule::Fdp => "fdp",
            ScheduleRule::KfwerGaussian => "kfwer-gaussian",
            ScheduleRule::FdpGaussian => "fdp-gaussian",
            ScheduleRule::KfwerMonteCarlo => "kfwer-monte-carlo",
            ScheduleRule::FdpMonteCarlo => "fdp-monte-carlo",
            ScheduleRule::GroupMaxFdr => "group-max-fdr",
            ScheduleRule::GroupKfwer => "group-kfwer",
            ScheduleRule::GroupFdp => "group-fdp",
            ScheduleRule::GroupKfwerCorrected => "group-kfwer-corrected",
            ScheduleRule::GroupFdpCorrected => "group-fdp-corrected",
            ScheduleRule::Custom => "custom",
        }
    }

    pub const ALL: [ScheduleRule; 13] = [
        ScheduleRule::Bh,
        ScheduleRule::Kfwer,
        ScheduleRule::Fdp,
        ScheduleRule::KfwerGaussian,
        ScheduleRule::FdpGaussian,
        ScheduleRule::KfwerMonteCarlo,
        ScheduleRule::FdpMonteCarlo,
        ScheduleRule::GroupMaxFdr,
        ScheduleRule::GroupKfwer,
        ScheduleRule::GroupFdp,
        ScheduleRule::GroupKfwerCorrected,
        ScheduleRule::GroupFdpCorrected,
        ScheduleRule::Custom,
    ];
}

impl std::str::FromStr for ScheduleRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown schedule rule '{s}'")))
    }
}

/// The parameters that produced a schedule. Only the ones the rule uses are set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    /// Monte-Carlo draws per step, for the Monte-Carlo corrected rules.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Non-increasing, non-negative sequence of regularization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr")]
pub struct LambdaSchedule {
    values: Vec<f64>,
    rule: ScheduleRule,
    params: ScheduleParams,
    /// First 1-based index that was filled by monotone truncation, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    truncated_at: Option<usize>,
}

#[derive(Deserialize)]
struct ScheduleRepr {
    values: Vec<f64>,
    rule: ScheduleRule,
    #[serde(default)]
    params: ScheduleParams,
    #[serde(default)]
    truncated_at: Option<usize>,
}

impl TryFrom<ScheduleRepr> for LambdaSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let mut s = LambdaSchedule::new(r.values, r.rule, r.params)?;
        s.truncated_at = r.truncated_at;
        Ok(s)
    }
}

impl LambdaSchedule {
    /// Validates and wraps `values`. Fails on an empty, negative, non-finite
    /// or increasing sequence.
    pub fn new(values: Vec<f64>, rule: ScheduleRule, params: ScheduleParams) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("schedule must have at least one value"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::contract(format!(
                    "schedule value {} at index {} is not a finite non-negative number",
                    v,
                    i + 1
                )));
            }
        }
        for (i, w) in values.windows(2).enumerate() {
            if w[1] > w[0] {
                return Err(Error::NotMonotone {
                    index: i + 2,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        Ok(LambdaSchedule {
            values,
            rule,
            params,
            truncated_at: None,
        })
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ScheduleRule::Custom, ScheduleParams::default())
    }

    pub(crate) fn with_truncation(mut self, at: Option<usize>) -> Self {
        self.truncated_at = at;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rule(&self) -> ScheduleRule {
        self.rule
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    /// The same schedule with every value multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v * factor).collect();
        Ok(LambdaSchedule::new(values, self.rule, self.params.clone())?
            .with_truncation(self.truncated_at))
    }
}

fn check_len(got: usize, lam: &LambdaSchedule) -> Result<()> {
    if got != lam.len() {
        return Err(Error::contract(format!(
            "vector has length {got} but the schedule has length {}",
            lam.len()
        )));
    }
    Ok(())
}

/// Indices of `v` ordered by decreasing magnitude; ties keep index order.
fn order_by_magnitude(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    idx
}

/// `J_λ(β) = Σ_i λ_i |β|_(i)`.
pub fn sorted_l1_norm(beta: &[f64], lam: &LambdaSchedule) -> Result<f64> {
    check_len(beta.len(), lam)?;
    Ok(sorted_l1_norm_unchecked(beta, lam.values()))
}

pub(crate) fn sorted_l1_norm_unchecked(beta: &[f64], lam: &[f64]) -> f64 {
    let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().zip(lam).map(|(b, l)| b * l).sum()
}

/// `argmin_b ½‖b − v‖² + J_λ(b)`, computed exactly.
pub fn prox_sorted_l1(v: &[f64], lam: &LambdaSchedule) -> Result<Vec<f64>> {
    check_len(v.len(), lam)?;
    let mut out = vec![0.0; v.len()];
    prox_sorted_l1_into(v, lam.values(), 1.0, &mut out);
    Ok(out)
}

/// Prox of `scale · J_λ` written into `out`. `lam` must be non-increasing and
/// non-negative, `scale >= 0`, all slices the same length.
pub(crate) fn prox_sorted_l1_into(v: &[f64], lam: &[f64], scale: f64, out: &mut [f64]) {
    let m = v.len();
    debug_assert_eq!(lam.len(), m);
    debug_assert_eq!(out.len(), m);
    let order = order_by_magnitude(v);

    // pool adjacent violators for a non-increasing fit of |v|_(i) - λ_i;
    // each block stores (start, end, mean)
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(m);
    for (rank, &i) in order.iter().enumerate() {
        let mut start = rank;
        let mut sum = v[i].abs() - scale * lam[rank];
        let mut len = 1usize;
        while let Some(&(s, e, mean)) = blocks.last() {
            if mean > sum / len as f64 {
                break;
            }
            let l = e - s + 1;
            sum += mean * l as f64;
            len += l;
            start = s;
            blocks.pop();
        }
        blocks.push((start, rank, sum / len as f64));
    }

    for (start, end, mean) in blocks {
        let value = if mean > 0.0 { mean } else { 0.0 };
        for &i in &order[start..=end] {
            out[i] = if value == 0.0 {
                0.0
            } else {
                value.copysign(v[i])
            };
        }
    }
}

/// `max(0, max_k Σ_{i≤k} (|g|_(i) − λ_i))`; zero iff `g` lies in the dual
/// unit ball of `J_λ`.
pub fn dual_infeasibility(gradient: &[f64], lam: &LambdaSchedule) -> Result<f64> {
    check_len(gradient.len(), lam)?;
    Ok(dual_infeasibility_unchecked(gradient, lam.values()))
}

pub(crate) fn dual_infeasibility_unchecked(g: &[f64], lam: &[f64]) -> f64 {
    let mut mags: Vec<f64> = g.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    for (gi, li) in mags.iter().zip(lam) {
        acc += gi - li;
        worst = worst.max(acc);
    }
    worst
}

/// Dual norm `J*_λ(g) = max_k Σ_{i≤k}|g|_(i) / Σ_{i≤k} λ_i`. Returns `None`
/// when a zero prefix of `λ` faces a nonzero prefix of `g` (the dual norm is
/// infinite there).
pub(crate) fn dual_norm(g: &[f64], lam: &[f64]) -> Option<f64> {
    let mut mags: Vec<f64> = g.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut num = 0.0;
    let mut den = 0.0;
    let mut best = 0.0f64;
    for (gi, li) in mags.iter().zip(lam) {
        num += gi;
        den += li;
        if den > 0.0 {
            best = best.max(num / den);
        } else if num > 0.0 {
            return None;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sched(v: &[f64]) -> LambdaSchedule {
        LambdaSchedule::custom(v.to_vec()).unwrap()
    }

    fn objective(b: &[f64], v: &[f64], lam: &[f64]) -> f64 {
        let fit: f64 = b.iter().zip(v).map(|(x, y)| 0.5 * (x - y) * (x - y)).sum();
        fit + sorted_l1_norm_unchecked(b, lam)
    }

    #[test]
    fn schedule_rejects_increasing_or_negative() {
        assert!(matches!(
            LambdaSchedule::custom(vec![1.0, 2.0]),
            Err(Error::NotMonotone { index: 2, .. })
        ));
        assert!(LambdaSchedule::custom(vec![1.0, -0.1]).is_err());
        assert!(LambdaSchedule::custom(vec![f64::NAN]).is_err());
        assert!(LambdaSchedule::custom(vec![]).is_err());
        assert!(LambdaSchedule::custom(vec![2.0, 2.0, 0.0]).is_ok());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(sorted_l1_norm(&[0.0; 3], &sched(&[3.0, 2.0, 1.0])).unwrap(), 0.0);
        assert_eq!(
            sorted_l1_norm(&[3.0, -1.0, 2.0], &sched(&[3.0, 2.0, 1.0])).unwrap(),
            14.0
        );
        let beta = [0.5, -2.0, 1.25, 0.0];
        let l1: f64 = beta.iter().map(|b: &f64| b.abs()).sum();
        assert_eq!(sorted_l1_norm(&beta, &sched(&[0.7; 4])).unwrap(), 0.7 * l1);
        assert!(sorted_l1_norm(&[1.0], &sched(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn prox_examples() {
        let v = [1.5, -2.0, 0.25];
        assert_eq!(prox_sorted_l1(&v, &sched(&[0.0; 3])).unwrap(), v.to_vec());
        assert_eq!(prox_sorted_l1(&[5.0], &sched(&[2.0])).unwrap(), vec![3.0]);
        assert_eq!(prox_sorted_l1(&[1.0], &sched(&[2.0])).unwrap(), vec![0.0]);
        assert_eq!(
            prox_sorted_l1(&[4.0, 3.0], &sched(&[3.0, 1.0])).unwrap(),
            vec![1.5, 1.5]
        );
        assert_eq!(
            prox_sorted_l1(&[-4.0, 3.0], &sched(&[3.0, 1.0])).unwrap(),
            vec![-1.5, 1.5]
        );
    }

    #[test]
    fn prox_two_dim_matches_grid_search() {
        // brute force over a fine grid for v=(4,3), λ=(3,1)
        let v = [4.0, 3.0];
        let lam = [3.0, 1.0];
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 800;
        for i in 0..=steps {
            for j in 0..=steps {
                let b = [4.0 * i as f64 / steps as f64, 4.0 * j as f64 / steps as f64];
                let f = objective(&b, &v, &lam);
                if f < best.0 {
                    best = (f, b[0], b[1]);
                }
            }
        }
        assert!((best.1 - 1.5).abs() <= 0.005 && (best.2 - 1.5).abs() <= 0.005);
    }

    #[test]
    fn dual_infeasibility_examples() {
        let lam = sched(&[1.0, 1.0]);
        assert_eq!(dual_infeasibility(&[0.0, 0.0], &lam).unwrap(), 0.0);
        assert_eq!(dual_infeasibility(&[2.0, 0.0], &lam).unwrap(), 1.0);
        assert_eq!(dual_infeasibility(&[0.9, -1.0], &lam).unwrap(), 0.0);
    }

    #[test]
    fn dual_norm_handles_zero_prefix() {
        assert_eq!(dual_norm(&[0.0, 0.0], &[0.0, 0.0]), Some(0.0));
        assert_eq!(dual_norm(&[1.0, 0.0], &[0.0, 0.0]), None);
        assert_eq!(dual_norm(&[2.0, 1.0], &[1.0, 1.0]), Some(2.0));
    }

    fn lam_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..3.0, m).prop_map(|mut l| {
            l.sort_by(|a, b| b.total_cmp(a));
            l
        })
    }

    fn case(max_m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_m).prop_flat_map(|m| (prop::collection::vec(-5.0f64..5.0, m), lam_strategy(m)))
    }

    proptest! {
        #[test]
        fn prox_beats_random_perturbations((v, lam) in case(8), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b = prox_sorted_l1(&v, &sched(&lam)).unwrap();
            let f0 = objective(&b, &v, &lam);
            for _ in 0..1000 {
                let d: Vec<f64> = (0..v.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                let r = rng.random_range(0.0..1e-3);
                let p: Vec<f64> = b.iter().zip(&d).map(|(x, y)| x + r * y / norm).collect();
                prop_assert!(objective(&p, &v, &lam) - f0 >= -1e-9);
            }
        }

        #[test]
        fn prox_sign_permutation_equivariance((v, lam) in case(8), perm_seed in any::<u64>(), signs in prop::collection::vec(any::<bool>(), 8)) {
            use rand::{seq::SliceRandom, SeedableRng};
            let m = v.len();
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let s: Vec<f64> = (0..m).map(|i| if signs[i] { -1.0 } else { 1.0 }).collect();
            let w: Vec<f64> = (0..m).map(|i| s[i] * v[perm[i]]).collect();
            let pv = prox_sorted_l1(&v, &sched(&lam)).unwrap();
            let pw = prox_sorted_l1(&w, &sched(&lam)).unwrap();
            for i in 0..m {
                prop_assert!((pw[i] - s[i] * pv[perm[i]]).abs() <= 1e-12);
            }
        }

        #[test]
        fn prox_is_non_expansive((v1, lam) in case(8), shift in prop::collection::vec(-3.0f64..3.0, 8)) {
            let v2: Vec<f64> = v1.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let p1 = prox_sorted_l1(&v1, &sched(&lam)).unwrap();
            let p2 = prox_sorted_l1(&v2, &sched(&lam)).unwrap();
            let dp: f64 = p1.iter().zip(&p2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let dv: f64 = v1.iter().zip(&v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dp <= dv + 1e-12);
        }

        #[test]
        fn prox_output_has_exact_zeros_or_nonzero_magnitudes((v, lam) in case(8)) {
            let p = prox_sorted_l1(&v, &sched(&lam)).unwrap();
            for (x, vi) in p.iter().zip(&v) {
                prop_assert!(*x == 0.0 || (x.abs() > 0.0 && x.signum() == vi.signum()));
                prop_assert!(x.abs() <= vi.abs() + 1e-12);
            }
        }
    }
}
