//! Replication loop and metric aggregation.

use std::collections::BTreeSet;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Correction, DesignKind, ExperimentConfig, Method};
use super::generate::{Context, SimData};
use crate::error::{Error, Result};
use crate::group::{group_prox, solve_standardized, standardize, GroupPartition};
use crate::schedules::{
    bh_schedule, fdp_schedule, gaussian_corrected_schedule, gf_schedule, gk_schedule,
    group_corrected_schedule, group_max_schedule, kfwer_schedule, monte_carlo_corrected_schedule,
    stream_seed, GroupMeta, GroupVariant, ScheduleRequest,
};
use crate::solver::{solve_slope, SupportMetrics};
use crate::sorted_l1::{prox_sorted_l1_into, LambdaSchedule};
use crate::stepdown::{fdp_thresholds, kfwer_thresholds, stepdown_reject, two_sided_pvalues};

/// Seed of replication `r`.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    stream_seed(seed, usize::MAX, r)
}

/// Counts from one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub replication: usize,
    pub seed: u64,
    pub v: usize,
    pub r: usize,
    pub tp: usize,
    pub fdp: f64,
    /// `V >= k`, when `k` is configured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_hit: Option<bool>,
    pub fdp_exceeds: bool,
    pub power: f64,
    /// Solver iterations; 0 for closed-form fits.
    pub iterations: usize,
    pub converged: bool,
}

/// A Monte-Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean with `sd / sqrt(n)`.
    pub fn mean(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { value: mean, se }
    }

    /// Proportion with `sqrt(p(1−p)/n)`.
    pub fn proportion(hits: &[bool]) -> Self {
        let n = hits.len() as f64;
        let p = hits.iter().filter(|h| **h).count() as f64 / n;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub fdr: Estimate,
    pub prob_fdp_exceeds: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kfwer: Option<Estimate>,
    pub power: Estimate,
    pub mean_selected: f64,
    pub nonconverged: usize,
}

impl Aggregates {
    pub fn from_trials(trials: &[Trial]) -> Self {
        let fdp: Vec<f64> = trials.iter().map(|t| t.fdp).collect();
        let power: Vec<f64> = trials.iter().map(|t| t.power).collect();
        let exceed: Vec<bool> = trials.iter().map(|t| t.fdp_exceeds).collect();
        let kfwer = trials
            .iter()
            .map(|t| t.k_hit)
            .collect::<Option<Vec<bool>>>()
            .map(|h| Estimate::proportion(&h));
        Aggregates {
            fdr: Estimate::mean(&fdp),
            prob_fdp_exceeds: Estimate::proportion(&exceed),
            kfwer,
            power: Estimate::mean(&power),
            mean_selected: trials.iter().map(|t| t.r as f64).sum::<f64>() / trials.len() as f64,
            nonconverged: trials.iter().filter(|t| !t.converged).count(),
        }
    }

    /// `(metric name, estimate)` in report order.
    pub fn rows(&self) -> Vec<(&'static str, Estimate)> {
        let mut out = vec![
            ("fdr", self.fdr),
            ("prob_fdp_exceeds", self.prob_fdp_exceeds),
        ];
        if let Some(k) = self.kfwer {
            out.push(("kfwer", k));
        }
        out.push(("power", self.power));
        out
    }
}

/// Where the regularization came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    /// Schedule rule name, or the threshold family for stepdown baselines.
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_at: Option<usize>,
    pub first: f64,
    pub last: f64,
    /// True when the schedule is rebuilt for every replication.
    pub per_replication: bool,
}

impl ScheduleSummary {
    fn of(lam: &LambdaSchedule, per_replication: bool) -> Self {
        ScheduleSummary {
            rule: lam.rule().name().to_string(),
            truncated_at: lam.truncated_at(),
            first: lam.values()[0],
            last: lam.values()[lam.len() - 1],
            per_replication,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: ExperimentConfig,
    /// Coefficient size, or the group scale `a`.
    pub signal: f64,
    pub schedule: ScheduleSummary,
    pub aggregates: Aggregates,
    pub trials: Vec<Trial>,
}

/// How each replication gets its penalty or thresholds.
enum Plan {
    Fixed(LambdaSchedule),
    MonteCarlo(LambdaSchedule),
    GroupCorrected {
        variant: GroupVariant,
        /// Built for full-rank blocks; rebuilt if a draw loses rank.
        nominal: LambdaSchedule,
    },
    Stepdown(Vec<f64>),
}

fn sizes_meta(part: &GroupPartition) -> Result<GroupMeta> {
    let ranks = part.groups().iter().map(|g| g.len() as u32).collect();
    GroupMeta::new(ranks, part.weights().to_vec())
}

fn group_corrected(cfg: &ExperimentConfig, meta: GroupMeta, variant: GroupVariant) -> Result<LambdaSchedule> {
    let req = ScheduleRequest::new(meta.len()).alpha(cfg.alpha).n(cfg.n).groups(meta);
    let req = match variant {
        GroupVariant::Gk => req.k(cfg.k.unwrap_or_default()),
        GroupVariant::Gf => req.gamma(cfg.gamma),
    };
    group_corrected_schedule(&req, variant)
}

fn plan(cfg: &ExperimentConfig, ctx: &Context) -> Result<Plan> {
    let units = cfg.units();
    let k = cfg.k.unwrap_or_default();
    let gaussian = matches!(cfg.design, DesignKind::Gaussian | DesignKind::GroupGaussian);
    let req = ScheduleRequest::new(units);
    match cfg.method {
        Method::SlopeBh | Method::KSlope | Method::FSlope => {
            let base = match cfg.method {
                Method::SlopeBh => bh_schedule(&req.q(cfg.alpha))?,
                Method::KSlope => kfwer_schedule(&req.alpha(cfg.alpha).k(k))?,
                _ => fdp_schedule(&req.alpha(cfg.alpha).gamma(cfg.gamma))?,
            };
            Ok(match (gaussian, cfg.correction) {
                (false, _) => Plan::Fixed(base),
                (true, Correction::Gaussian) => Plan::Fixed(gaussian_corrected_schedule(&base, cfg.n)?),
                (true, Correction::MonteCarlo) => Plan::MonteCarlo(base),
            })
        }
        Method::GSlope | Method::GkSlope | Method::GfSlope => {
            let part = ctx
                .partition
                .as_ref()
                .ok_or_else(|| Error::contract("group method without a partition"))?;
            let meta = sizes_meta(part)?;
            let req = req.groups(meta.clone());
            match (cfg.method, gaussian) {
                (Method::GSlope, _) => Ok(Plan::Fixed(group_max_schedule(&req.q(cfg.alpha))?)),
                (Method::GkSlope, false) => Ok(Plan::Fixed(gk_schedule(&req.alpha(cfg.alpha).k(k))?)),
                (_, false) => Ok(Plan::Fixed(gf_schedule(&req.alpha(cfg.alpha).gamma(cfg.gamma))?)),
                (method, true) => {
                    let variant = if method == Method::GkSlope {
                        GroupVariant::Gk
                    } else {
                        GroupVariant::Gf
                    };
                    Ok(Plan::GroupCorrected {
                        variant,
                        nominal: group_corrected(cfg, meta, variant)?,
                    })
                }
            }
        }
        Method::SdKfwer => Ok(Plan::Stepdown(kfwer_thresholds(units, k, cfg.alpha)?)),
        Method::SdFdp => Ok(Plan::Stepdown(fdp_thresholds(units, cfg.alpha, cfg.gamma)?)),
    }
}

fn summary(plan: &Plan, cfg: &ExperimentConfig) -> ScheduleSummary {
    match plan {
        Plan::Fixed(lam) => ScheduleSummary::of(lam, false),
        Plan::MonteCarlo(base) => {
            let mut s = ScheduleSummary::of(base, true);
            s.rule = format!("{}-monte-carlo", base.rule().name());
            s
        }
        Plan::GroupCorrected { nominal, .. } => ScheduleSummary::of(nominal, false),
        Plan::Stepdown(th) => ScheduleSummary {
            rule: match cfg.method {
                Method::SdKfwer => "stepdown-kfwer".into(),
                _ => "stepdown-fdp".into(),
            },
            truncated_at: None,
            first: th[0],
            last: th[th.len() - 1],
            per_replication: false,
        },
    }
}

/// Selected units and solver stats for one data set.
struct Selection {
    selected: Vec<usize>,
    iterations: usize,
    converged: bool,
}

fn closed_form(selected: Vec<usize>) -> Selection {
    Selection {
        selected,
        iterations: 0,
        converged: true,
    }
}

fn fit_features(cfg: &ExperimentConfig, data: &SimData, lam: &LambdaSchedule) -> Result<Selection> {
    if data.x.is_identity() && !cfg.full_solver {
        let mut out = vec![0.0; data.y.len()];
        prox_sorted_l1_into(&data.y, lam.values(), cfg.sigma, &mut out);
        return Ok(closed_form(nonzero(&out)));
    }
    let fit = solve_slope(&data.x, &data.y, lam, cfg.sigma, cfg.tol, cfg.max_iter)?;
    Ok(Selection {
        selected: fit.support,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

fn nonzero(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn fit_groups(
    cfg: &ExperimentConfig,
    data: &SimData,
    part: &GroupPartition,
    plan: &Plan,
) -> Result<Selection> {
    if data.x.is_identity() && !cfg.full_solver {
        let Plan::Fixed(lam) = plan else {
            return Err(Error::contract("identity group design expects a fixed schedule"));
        };
        let norms: Vec<f64> = part
            .groups()
            .iter()
            .map(|idx| idx.iter().map(|&j| data.y[j] * data.y[j]).sum::<f64>().sqrt())
            .collect();
        let g = group_prox(&norms, part.weights(), lam, cfg.sigma)?;
        return Ok(closed_form(nonzero(&g)));
    }
    let prob = standardize(&data.x, part)?;
    let rebuilt;
    let lam = match plan {
        Plan::Fixed(lam) => lam,
        Plan::GroupCorrected { variant, nominal } => {
            let meta = prob.group_meta()?;
            if meta.ranks.iter().zip(part.groups()).all(|(&r, g)| r as usize == g.len()) {
                nominal
            } else {
                rebuilt = group_corrected(cfg, meta, *variant)?;
                &rebuilt
            }
        }
        _ => return Err(Error::contract("group fit needs a schedule")),
    };
    let fit = solve_standardized(&prob, &data.y, lam, cfg.sigma, cfg.tol, cfg.max_iter)?;
    Ok(Selection {
        selected: fit.selected_groups,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

fn select(cfg: &ExperimentConfig, ctx: &Context, plan: &Plan, data: &SimData, seed: u64) -> Result<Selection> {
    match plan {
        Plan::Stepdown(th) => {
            let z = data
                .marginal
                .as_ref()
                .ok_or_else(|| Error::contract("stepdown baseline needs marginal statistics"))?;
            let p = two_sided_pvalues(z, cfg.sigma)?;
            Ok(closed_form(stepdown_reject(&p, th)?))
        }
        _ if cfg.method.is_group() => {
            let part = ctx
                .partition
                .as_ref()
                .ok_or_else(|| Error::contract("group method without a partition"))?;
            fit_groups(cfg, data, part, plan)
        }
        Plan::Fixed(lam) => fit_features(cfg, data, lam),
        Plan::MonteCarlo(base) => {
            let lam = monte_carlo_corrected_schedule(base, &data.x, cfg.mc_replicates, seed)?;
            fit_features(cfg, data, &lam)
        }
        Plan::GroupCorrected { .. } => Err(Error::contract("group schedule for a feature method")),
    }
}

fn run_one(cfg: &ExperimentConfig, ctx: &Context, plan: &Plan, r: usize) -> Result<Trial> {
    let seed = replication_seed(cfg.seed, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = ctx.generate(cfg, &mut rng)?;
    let sel = select(cfg, ctx, plan, &data, seed)?;
    let m = SupportMetrics::from_sets(&sel.selected, &data.truth, cfg.k.unwrap_or(1), cfg.gamma);
    Ok(Trial {
        replication: r,
        seed,
        v: m.v,
        r: m.r,
        tp: m.tp,
        fdp: m.fdp,
        k_hit: cfg.k.map(|_| m.k_hit),
        fdp_exceeds: m.fdp_exceeds,
        power: m.power,
        iterations: sel.iterations,
        converged: sel.converged,
    })
}

/// Runs every replication of `cfg` on the current rayon pool. Results are
/// gathered by replication index, so the report does not depend on the
/// number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let ctx = Context::new(cfg)?;
    let plan = plan(cfg, &ctx)?;
    let results: Vec<Result<Trial>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_one(cfg, &ctx, &plan, r))
        .collect();
    let mut trials = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(t) => trials.push(t),
            Err(e) => {
                return Err(Error::Replication {
                    replication: r,
                    seed: replication_seed(cfg.seed, r),
                    source: Box::new(e),
                })
            }
        }
    }
    let aggregates = Aggregates::from_trials(&trials);
    if aggregates.nonconverged > 0 {
        warn!(
            "{} of {} fits hit max_iter without converging",
            aggregates.nonconverged, cfg.replications
        );
    }
    Ok(TrialReport {
        schedule: summary(&plan, cfg),
        signal: ctx.signal,
        config: cfg.clone(),
        aggregates,
        trials,
    })
}

/// Relevant units of one replication, regenerated from its seed.
pub fn replication_truth(cfg: &ExperimentConfig, r: usize) -> Result<BTreeSet<usize>> {
    let ctx = Context::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, r));
    Ok(ctx.generate(cfg, &mut rng)?.truth)
}
