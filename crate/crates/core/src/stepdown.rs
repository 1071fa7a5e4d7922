//! Lehmann–Romano stepdown testing on p-values.

use crate::error::{Error, Result};
use crate::stats::two_sided_tail;

/// A vector of p-values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueSet(Vec<f64>);

impl PValueSet {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::contract(format!(
                    "p-value {v} at index {i} is not in [0, 1]"
                )));
            }
        }
        Ok(PValueSet(p))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_level(m: usize, alpha: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::contract("need at least one hypothesis"));
    }
    crate::error::check_open_unit("alpha", alpha)
}

/// k-FWER critical values: `kα/m` for `i <= k`, `kα/(m+k−i)` afterwards.
pub fn kfwer_thresholds(m: usize, k: usize, alpha: f64) -> Result<Vec<f64>> {
    check_level(m, alpha)?;
    if k == 0 || k > m {
        return Err(Error::contract(format!("k = {k} must lie in [1, {m}]")));
    }
    let ka = k as f64 * alpha;
    Ok((1..=m)
        .map(|i| {
            if i <= k {
                ka / m as f64
            } else {
                ka / (m + k - i) as f64
            }
        })
        .collect())
}

/// FDP critical values: `(⌊γi⌋+1)α / (m+⌊γi⌋+1−i)`.
pub fn fdp_thresholds(m: usize, alpha: f64, gamma: f64) -> Result<Vec<f64>> {
    check_level(m, alpha)?;
    crate::error::check_open_unit("gamma", gamma)?;
    Ok((1..=m)
        .map(|i| {
            let f = (gamma * i as f64).floor() as usize + 1;
            f as f64 * alpha / (m + f - i) as f64
        })
        .collect())
}

/// Stepdown scan. Returns the original indices of the `r` smallest p-values,
/// where `r` is the longest prefix with `p_(j) <= α_j` for every `j <= r`.
/// Output indices are sorted ascending.
pub fn stepdown_reject(p: &PValueSet, thresholds: &[f64]) -> Result<Vec<usize>> {
    if thresholds.len() != p.len() {
        return Err(Error::contract(format!(
            "{} thresholds for {} p-values",
            thresholds.len(),
            p.len()
        )));
    }
    let v = p.values();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let r = order
        .iter()
        .zip(thresholds)
        .take_while(|(&i, &t)| v[i] <= t)
        .count();
    let mut rejected = order[..r].to_vec();
    rejected.sort_unstable();
    Ok(rejected)
}

/// `p_i = 2(1 − Φ(|z_i| / s))`.
pub fn two_sided_pvalues(z: &[f64], s: f64) -> Result<PValueSet> {
    crate::error::check_positive("s", s)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("statistics must be finite"));
    }
    PValueSet::new(z.iter().map(|&zi| two_sided_tail(zi / s)).collect())
}
