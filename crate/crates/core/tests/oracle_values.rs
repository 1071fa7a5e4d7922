//! Spot values computed by the quadrature oracles in `common`, frozen to
//! six decimals, and checked against the library.

mod common;

use stepslope::schedules::{
    bh_schedule, fdp_schedule, gaussian_corrected_schedule, gk_schedule, group_corrected_schedule,
    group_max_schedule, kfwer_schedule, GroupMeta, GroupVariant, ScheduleRequest,
};
use stepslope::stats::{chi_isf, normal_isf, ChiComponent, ChiMixture};

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn oracles_reproduce_frozen_values() {
    assert!(near(common::normal_isf(0.025), 1.959964, 1e-6));
    assert!(near(common::normal_isf(5e-5), 3.890592, 1e-6));
    assert!(near(common::normal_isf(0.05), 1.644854, 1e-6));
    assert!(near(common::normal_isf(2.5e-4), 3.480756, 1e-6));
    assert!(near(common::normal_isf(0.2 / 1984.0), 3.716987, 1e-6));
    assert!(near(common::chi_isf(0.05, 5), 3.327236, 1e-6));
    assert!(near(common::chi_isf(2.5e-4, 5) / 5f64.sqrt(), 2.176280, 1e-6));
    let mix = common::bisect_decreasing(
        |x| 0.5 * common::chi_sf(x, 1) + 0.5 * common::chi_sf(x, 4),
        0.1,
        0.0,
        60.0,
    );
    assert!(near(mix, 2.483433, 1e-6));
}

#[test]
fn quantiles_match_frozen_values() {
    assert!(near(normal_isf(0.025).unwrap(), 1.959964, 1e-6));
    assert!(near(chi_isf(0.05, 5).unwrap(), 3.327236, 1e-6));
    // one degree of freedom is the folded normal
    assert!(near(chi_isf(1e-3, 1).unwrap(), common::normal_isf(5e-4), 1e-9));
    let mix = ChiMixture::new(vec![
        ChiComponent { scale: 1.0, dof: 1 },
        ChiComponent { scale: 1.0, dof: 4 },
    ])
    .unwrap();
    assert!(near(mix.quantile(0.9).unwrap(), 2.483433, 1e-6));
}

#[test]
fn closed_form_schedules_match_frozen_values() {
    let bh = bh_schedule(&ScheduleRequest::new(1000).q(0.1)).unwrap();
    assert!(near(bh.values()[0], 3.890592, 1e-6));
    let one = bh_schedule(&ScheduleRequest::new(1).q(0.1)).unwrap();
    assert!(near(one.values()[0], 1.644854, 1e-6));

    let k = kfwer_schedule(&ScheduleRequest::new(1000).k(5).alpha(0.1)).unwrap();
    assert!(k.values()[..5].iter().all(|&v| v == k.values()[0]));
    assert!(near(k.values()[0], 3.480756, 1e-6));
    assert!(k.values()[5] < k.values()[4]);

    let f = fdp_schedule(&ScheduleRequest::new(1000).alpha(0.1).gamma(0.1)).unwrap();
    assert!(near(f.values()[9], 3.716987, 1e-6));
    assert!(f.values().windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn group_schedules_match_oracle() {
    let meta = GroupMeta::new(vec![5; 1000], vec![5f64.sqrt(); 1000]).unwrap();
    let gk = gk_schedule(&ScheduleRequest::new(1000).k(5).alpha(0.1).groups(meta)).unwrap();
    assert!(near(gk.values()[0], 2.176280, 1e-6));

    // two group types: the larger of the two quantiles wins
    let mut ranks = vec![1; 50];
    ranks.extend(vec![4; 50]);
    let meta = GroupMeta::new(ranks, vec![1.0; 100]).unwrap();
    let g = group_max_schedule(&ScheduleRequest::new(100).q(0.1).groups(meta)).unwrap();
    let want = common::normal_isf(5e-4).max(common::chi_isf(1e-3, 4));
    assert!(near(g.values()[0], want, 1e-8));
    assert!(near(want, common::chi_isf(1e-3, 4), 0.0));
}

#[test]
fn corrected_group_step_unrolls_by_hand() {
    let (n, l, w, t) = (500usize, 3u32, 3f64.sqrt(), 40usize);
    let meta = GroupMeta::new(vec![l; t], vec![w; t]).unwrap();
    let req = ScheduleRequest::new(t).alpha(0.1).gamma(0.1).n(n).groups(meta);
    let lam = group_corrected_schedule(&req, GroupVariant::Gf).unwrap();
    let a = |i: usize| {
        let f = (0.1 * i as f64).floor() + 1.0;
        f * 0.1 / (2.0 * (t as f64 + f - i as f64))
    };
    let l1 = common::chi_isf(a(1), l) / w;
    assert!(near(lam.values()[0], l1, 1e-8));
    let s = ((n as f64 - l as f64) / n as f64 + w * w * l1 * l1 / (n as f64 - l as f64 - 1.0)).sqrt();
    let l2 = s / w * common::chi_isf(a(2), l);
    if l2 <= l1 {
        assert!(near(lam.values()[1], l2, 1e-8));
    } else {
        assert_eq!(lam.truncated_at(), Some(2));
        assert_eq!(lam.values()[1], lam.values()[0]);
    }
}

#[test]
fn gaussian_correction_unrolls_by_hand() {
    // BH decays fast enough for several corrected steps to survive
    let base = bh_schedule(&ScheduleRequest::new(200).q(0.1)).unwrap();
    let n = 2000;
    let lam = gaussian_corrected_schedule(&base, n).unwrap();
    let b = |i: usize| common::normal_isf(i as f64 * 0.1 / 400.0);
    let mut expect = vec![b(1)];
    let mut sum = 0.0;
    for i in 2..=5 {
        sum += expect[i - 2] * expect[i - 2];
        expect.push(b(i) * (1.0 + sum / (n - i) as f64).sqrt());
    }
    let kept = lam.truncated_at().map_or(5, |t| (t - 1).min(5));
    assert!(kept >= 2, "expected a few corrected steps");
    for (i, (got, want)) in lam.values().iter().zip(&expect).take(kept).enumerate() {
        assert!(near(*got, *want, 1e-8), "index {i}");
    }
}
