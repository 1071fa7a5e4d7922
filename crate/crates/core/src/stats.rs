//! Normal and chi distribution functions and quantiles.
//!
//! Every schedule generator goes through this module. Quantiles are exposed in
//! two forms: the usual `quantile(p)` and an inverse survival form `isf(tail)`
//! returning the `x` with `P(X > x) = tail`. The schedules always need points
//! far in the upper tail, and passing the tail mass directly avoids the
//! cancellation in `1 - tail`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{check_open_unit, Error, Result};

/// Probabilities handed to an inversion are clamped into `[P_FLOOR, 1 - P_FLOOR]`.
pub const P_FLOOR: f64 = 1e-15;

const MAX_BISECTIONS: usize = 400;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `Φ⁻¹(p)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    let p = clamp_prob(p);
    Ok(if p <= 0.5 {
        lower_normal_quantile(p)
    } else {
        -lower_normal_quantile(1.0 - p)
    })
}

/// `Φ⁻¹(1 - tail)`, accurate for tiny `tail`.
pub fn normal_isf(tail: f64) -> Result<f64> {
    check_open_unit("tail", tail)?;
    let tail = clamp_prob(tail);
    Ok(if tail <= 0.5 {
        -lower_normal_quantile(tail)
    } else {
        lower_normal_quantile(1.0 - tail)
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_FLOOR, 1.0 - P_FLOOR)
}

/// Rational approximation of the lower-half normal quantile followed by one
/// Halley refinement against the erfc-based CDF. Requires `0 < p <= 0.5`.
fn lower_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// CDF of the chi distribution with `dof` degrees of freedom.
pub fn chi_cdf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(0.5 * dof as f64, 0.5 * x * x)
}

pub fn chi_sf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(0.5 * dof as f64, 0.5 * x * x)
}

fn check_dof(dof: u32) -> Result<()> {
    if dof == 0 {
        Err(Error::Domain {
            name: "dof",
            value: 0.0,
            constraint: "degrees of freedom must be at least 1",
        })
    } else {
        Ok(())
    }
}

/// Target of an inversion: either a lower-tail or an upper-tail probability.
#[derive(Debug, Clone, Copy)]
enum Target {
    Lower(f64),
    Upper(f64),
}

impl Target {
    fn from_lower(p: f64) -> Self {
        let p = clamp_prob(p);
        if p <= 0.5 {
            Target::Lower(p)
        } else {
            Target::Upper(1.0 - p)
        }
    }

    fn from_upper(tail: f64) -> Self {
        let tail = clamp_prob(tail);
        if tail <= 0.5 {
            Target::Upper(tail)
        } else {
            Target::Lower(1.0 - tail)
        }
    }

    /// Is `x` strictly below the quantile, judged through `cdf`/`sf`?
    fn below(&self, x: f64, cdf: impl Fn(f64) -> f64, sf: impl Fn(f64) -> f64) -> bool {
        match *self {
            Target::Lower(p) => cdf(x) < p,
            Target::Upper(q) => sf(x) > q,
        }
    }
}

/// Bisection for a monotone CDF on `[lo, hi]`, where `lo` is below and `hi`
/// at or above the quantile.
fn bisect(
    target: Target,
    mut lo: f64,
    mut hi: f64,
    cdf: impl Fn(f64) -> f64,
    sf: impl Fn(f64) -> f64,
) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if target.below(mid, &cdf, &sf) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Returns an `x > 0` that is at or above the quantile, by doubling.
fn upper_bracket(
    target: Target,
    start: f64,
    cdf: impl Fn(f64) -> f64,
    sf: impl Fn(f64) -> f64,
) -> f64 {
    let mut hi = start.max(1.0);
    while target.below(hi, &cdf, &sf) {
        hi *= 2.0;
    }
    hi
}

fn chi_invert(target: Target, dof: u32) -> f64 {
    // Wilson-Hilferty start for the bracket
    let l = dof as f64;
    let z = match target {
        Target::Lower(p) => lower_normal_quantile(p),
        Target::Upper(q) => -lower_normal_quantile(q),
    };
    let c = 2.0 / (9.0 * l);
    let wh = (l * (1.0 - c + z * c.sqrt()).powi(3)).max(0.0).sqrt();
    let hi = upper_bracket(target, 1.5 * wh + 1.0, |x| chi_cdf(x, dof), |x| chi_sf(x, dof));
    bisect(target, 0.0, hi, |x| chi_cdf(x, dof), |x| chi_sf(x, dof))
}

/// Quantile of the chi distribution: the `x` with `F_{χ_dof}(x) = p`.
pub fn chi_quantile(p: f64, dof: u32) -> Result<f64> {
    check_open_unit("p", p)?;
    check_dof(dof)?;
    Ok(chi_invert(Target::from_lower(p), dof))
}

/// `F⁻¹_{χ_dof}(1 - tail)`, accurate for tiny `tail`.
pub fn chi_isf(tail: f64, dof: u32) -> Result<f64> {
    check_open_unit("tail", tail)?;
    check_dof(dof)?;
    Ok(chi_invert(Target::from_upper(tail), dof))
}

/// One scaled chi component `scale · χ_dof`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiComponent {
    pub scale: f64,
    pub dof: u32,
}

/// Equal-weight mixture of scaled chi distributions,
/// `F̄(x) = (1/m) Σ_j F_{χ_{dof_j}}(x / scale_j)`.
#[derive(Debug, Clone)]
pub struct ChiMixture {
    components: Vec<ChiComponent>,
    // identical components merged, with multiplicity / m as weight
    distinct: Vec<(ChiComponent, f64)>,
}

impl ChiMixture {
    pub fn new(components: Vec<ChiComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::contract("chi mixture needs at least one component"));
        }
        let mut counts: BTreeMap<(u64, u32), usize> = BTreeMap::new();
        for c in &components {
            if !(c.scale > 0.0 && c.scale.is_finite()) {
                return Err(Error::Domain {
                    name: "scale",
                    value: c.scale,
                    constraint: "mixture scales must be positive and finite",
                });
            }
            check_dof(c.dof)?;
            *counts.entry((c.scale.to_bits(), c.dof)).or_default() += 1;
        }
        let m = components.len() as f64;
        let distinct = counts
            .into_iter()
            .map(|((bits, dof), count)| {
                (
                    ChiComponent {
                        scale: f64::from_bits(bits),
                        dof,
                    },
                    count as f64 / m,
                )
            })
            .collect();
        Ok(ChiMixture {
            components,
            distinct,
        })
    }

    pub fn components(&self) -> &[ChiComponent] {
        &self.components
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.distinct
            .iter()
            .map(|(c, w)| w * chi_cdf(x / c.scale, c.dof))
            .sum()
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.distinct
            .iter()
            .map(|(c, w)| w * chi_sf(x / c.scale, c.dof))
            .sum()
    }

    /// Mixture with every scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ChiMixture::new(
            self.components
                .iter()
                .map(|c| ChiComponent {
                    scale: c.scale * factor,
                    dof: c.dof,
                })
                .collect(),
        )
    }

    fn invert(&self, target: Target) -> f64 {
        // at x = max_j scale_j · q_j every component CDF is already >= p
        let hi = self
            .distinct
            .iter()
            .map(|(c, _)| c.scale * chi_invert(target, c.dof))
            .fold(0.0, f64::max);
        let hi = upper_bracket(target, hi, |x| self.cdf(x), |x| self.sf(x));
        bisect(target, 0.0, hi, |x| self.cdf(x), |x| self.sf(x))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_open_unit("p", p)?;
        Ok(self.invert(Target::from_lower(p)))
    }

    /// `F̄⁻¹(1 - tail)`.
    pub fn isf(&self, tail: f64) -> Result<f64> {
        check_open_unit("tail", tail)?;
        Ok(self.invert(Target::from_upper(tail)))
    }
}

/// Two-sided normal tail mass `2(1 - Φ(|z|))`.
pub(crate) fn two_sided_tail(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}
