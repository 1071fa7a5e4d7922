//! Reference implementations used only by the tests. They are deliberately
//! slow and share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Upper normal tail by quadrature of the density.
pub fn normal_sf(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    if x >= 0.0 {
        // integrate the tail directly so small tails keep their digits
        simpson(phi, x, x + 40.0, 200_000)
    } else {
        1.0 - normal_sf(-x)
    }
}

/// Decreasing-function inversion by plain bisection.
pub fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn normal_isf(tail: f64) -> f64 {
    bisect_decreasing(normal_sf, tail, -40.0, 40.0)
}

/// `Γ(l/2)` by the half-integer recursion.
fn gamma_half(l: u32) -> f64 {
    let (mut g, mut a) = if l.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while a < l as f64 / 2.0 - 1e-12 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Upper tail of the chi distribution with `l` degrees of freedom.
pub fn chi_sf(x: f64, l: u32) -> f64 {
    let c = 2f64.powf(1.0 - l as f64 / 2.0) / gamma_half(l);
    let dens = |t: f64| c * t.powi(l as i32 - 1) * (-0.5 * t * t).exp();
    if x <= 0.0 {
        return 1.0;
    }
    simpson(dens, x, x + 40.0, 200_000)
}

pub fn chi_isf(tail: f64, l: u32) -> f64 {
    bisect_decreasing(|x| chi_sf(x, l), tail, 0.0, 60.0)
}

/// Sorted-ℓ1 norm by trying every assignment of weights to coordinates;
/// the norm is the largest such pairing.
pub fn sorted_l1_brute(b: &[f64], lam: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(b.len()) {
        let s: f64 = perm.iter().zip(lam).map(|(&j, &l)| l * b[j].abs()).sum();
        best = best.max(s);
    }
    best
}

pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Exact prox of the sorted-ℓ1 norm for small `m`.
///
/// Signs are matched to `v` (flipping a coordinate towards `v` never hurts),
/// leaving `min ½‖b − |v|‖² + J(b)` over `b >= 0`. For every ordering `π`
/// of the coordinates the norm is linear on the cone
/// `b_π1 >= … >= b_πm >= 0`, so the cone problem is a quadratic program.
/// Each of its `2^m` active sets is solved in closed form (tied coordinates
/// share the mean of `|v| − λ`), infeasible candidates are dropped, and the
/// best objective over all orderings and active sets wins.
pub fn prox_brute(v: &[f64], lam: &[f64]) -> Vec<f64> {
    let m = v.len();
    let a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let fit = |b: &[f64]| -> f64 { b.iter().zip(&a).map(|(x, y)| 0.5 * (x - y) * (x - y)).sum() };
    let mut best = vec![0.0; m];
    let mut best_obj = fit(&best);
    for perm in permutations(m) {
        // bit i (< m-1): b_π(i) == b_π(i+1); bit m-1: b_π(m-1) == 0
        for mask in 0u32..(1 << m) {
            let mut cand = vec![0.0; m];
            let mut start = 0;
            let mut feasible = true;
            let mut prev = f64::INFINITY;
            while start < m {
                let mut end = start;
                while end + 1 < m && mask & (1 << end) != 0 {
                    end += 1;
                }
                let zero_tail = end == m - 1 && mask & (1 << (m - 1)) != 0;
                let val = if zero_tail {
                    0.0
                } else {
                    let s: f64 = (start..=end).map(|r| a[perm[r]] - lam[r]).sum();
                    s / (end - start + 1) as f64
                };
                if val < -1e-15 || val > prev + 1e-15 {
                    feasible = false;
                    break;
                }
                for r in start..=end {
                    cand[perm[r]] = val.max(0.0);
                }
                prev = val;
                start = end + 1;
            }
            if !feasible {
                continue;
            }
            // on this cone the norm pairs λ_r with the r-th coordinate of π
            let pen: f64 = (0..m).map(|r| lam[r] * cand[perm[r]]).sum();
            let obj = fit(&cand) + pen;
            if obj < best_obj {
                best_obj = obj;
                best = cand;
            }
        }
    }
    best.iter()
        .zip(v)
        .map(|(&b, &x)| if x < 0.0 { -b } else { b })
        .collect()
}

/// Stepdown rejections by checking every prefix length. Ranks come from
/// pairwise counting with ties broken by index.
pub fn stepdown_brute(p: &[f64], thresholds: &[f64]) -> Vec<usize> {
    let m = p.len();
    let rank: Vec<usize> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| p[j] < p[i] || (p[j] == p[i] && j < i))
                .count()
        })
        .collect();
    let mut sorted = vec![0.0; m];
    for i in 0..m {
        sorted[rank[i]] = p[i];
    }
    let mut r = 0;
    for len in 0..=m {
        if (0..len).all(|j| sorted[j] <= thresholds[j]) {
            r = len;
        }
    }
    (0..m).filter(|&i| rank[i] < r).collect()
}
