//! Data generators for the simulation designs.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use super::config::{DesignKind, ExperimentConfig, GroupSignalReading, Signal};
use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::group::GroupPartition;

/// Number of labs averaged in the correlated-means model.
pub const LABS: usize = 5;
/// Lab effect variance `σ_τ²`.
pub const LAB_VARIANCE: f64 = 2.5;
/// Measurement error variance `σ_z²`.
pub const ERROR_VARIANCE: f64 = 2.5;

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DesignMatrix,
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    /// Relevant features, or relevant groups for group designs.
    pub truth: BTreeSet<usize>,
    /// Marginal statistics for the stepdown baselines: `y` itself for the
    /// identity design, the raw lab means `ȳ` for correlated means.
    pub marginal: Option<Vec<f64>>,
}

/// Equicorrelation covariance of the lab-averaged means.
pub fn lab_covariance(n: usize) -> DMatrix<f64> {
    let diag = (LAB_VARIANCE + ERROR_VARIANCE) / LABS as f64;
    let off = LAB_VARIANCE / LABS as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { diag } else { off })
}

/// `Σ^{-1/2}` of a symmetric positive definite matrix.
pub fn inverse_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(sigma.clone());
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::Singular("covariance is not positive definite".into()));
    }
    let d = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&d) * q.transpose())
}

/// `a` in the group signal rule: the relevant group effects get norm
/// `a·sqrt(l_i)` where `Σ a sqrt(l_i) = Σ sqrt(4 ln T / (1 − T^{−2/l}) − l)`
/// summed over all `T` groups.
pub fn group_signal_scale(sizes: &[usize], reading: GroupSignalReading) -> Result<f64> {
    let t = sizes.len();
    if t < 2 {
        return Err(Error::contract("group signal needs at least two groups"));
    }
    let tf = t as f64;
    let term = |l: f64| {
        let denom = 1.0 - tf.powf(-2.0 / l);
        debug_assert!(denom > 0.0);
        (4.0 * tf.ln() / denom - l).max(0.0).sqrt()
    };
    let mean = sizes.iter().sum::<usize>() as f64 / tf;
    let rhs: f64 = match reading {
        GroupSignalReading::PerClass => sizes.iter().map(|&l| term(l as f64)).sum(),
        GroupSignalReading::MeanSize => tf * term(mean),
    };
    let lhs: f64 = sizes.iter().map(|&l| (l as f64).sqrt()).sum();
    Ok(rhs / lhs)
}

/// Coefficient size for non-group designs, or `a` for group designs.
pub fn signal_value(cfg: &ExperimentConfig) -> Result<f64> {
    let n = cfg.n as f64;
    let m = cfg.m as f64;
    match (cfg.signal, cfg.design.is_group()) {
        (Signal::Custom(v), _) => Ok(v),
        (Signal::GroupScaled, true) => {
            group_signal_scale(&cfg.group_size_list()?, cfg.group_signal_reading)
        }
        (Signal::Strong, false) => Ok(3.0 * (2.0 * n.ln()).sqrt()),
        (Signal::Moderate, false) => Ok(2.0 * (2.0 * m.ln()).sqrt()),
        (Signal::Weak, false) => Ok((2.0 * m.ln()).sqrt()),
        (s, group) => Err(Error::contract(format!(
            "signal {s:?} is not available for {} designs",
            if group { "group" } else { "non-group" }
        ))),
    }
}

/// Per-experiment quantities shared by every replication.
#[derive(Debug, Clone)]
pub struct Context {
    /// Output of [`signal_value`].
    pub signal: f64,
    pub partition: Option<GroupPartition>,
    /// `Σ^{-1/2}` for correlated means.
    whitening: Option<Arc<DMatrix<f64>>>,
    /// `Σ^{-1/2} / c`, the whitened regression design.
    whitened_design: Option<DesignMatrix>,
    /// Common column norm `c` of `Σ^{-1/2}`.
    pub column_norm: f64,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let signal = signal_value(cfg)?;
        let partition = if cfg.design.is_group() {
            Some(GroupPartition::contiguous(&cfg.group_size_list()?, cfg.weights)?)
        } else {
            None
        };
        let (whitening, whitened_design, column_norm) = if cfg.design == DesignKind::CorrelatedMeans {
            let w = inverse_sqrt(&lab_covariance(cfg.n))?;
            let c = w.column(0).norm();
            let x = DesignMatrix::normalized_from(w.clone())?;
            (Some(Arc::new(w)), Some(x), c)
        } else {
            (None, None, 1.0)
        };
        Ok(Context {
            signal,
            partition,
            whitening,
            whitened_design,
            column_norm,
        })
    }

    pub fn generate<R: Rng>(&self, cfg: &ExperimentConfig, rng: &mut R) -> Result<SimData> {
        match cfg.design {
            DesignKind::OrthogonalIdentity => gen_orthogonal(cfg, self.signal, rng),
            DesignKind::Gaussian => gen_gaussian(cfg, self.signal, rng),
            DesignKind::CorrelatedMeans => self.gen_correlated_means(cfg, rng),
            DesignKind::GroupOrthogonal | DesignKind::GroupGaussian => self.gen_group(cfg, rng),
        }
    }

    fn gen_correlated_means<R: Rng>(&self, cfg: &ExperimentConfig, rng: &mut R) -> Result<SimData> {
        let (Some(w), Some(x)) = (&self.whitening, &self.whitened_design) else {
            return Err(Error::contract("context was not built for correlated means"));
        };
        let n = cfg.n;
        let truth = support(rng, n, cfg.t);
        let mu_value = self.signal / self.column_norm;
        let lab = Normal::new(0.0, LAB_VARIANCE.sqrt()).map_err(|e| Error::contract(e.to_string()))?;
        let err = Normal::new(0.0, ERROR_VARIANCE.sqrt()).map_err(|e| Error::contract(e.to_string()))?;
        let tau: Vec<f64> = (0..LABS).map(|_| lab.sample(rng)).collect();
        let tau_bar = tau.iter().sum::<f64>() / LABS as f64;
        let mut ybar = vec![0.0; n];
        for (i, yb) in ybar.iter_mut().enumerate() {
            let z_bar = (0..LABS).map(|_| err.sample(rng)).sum::<f64>() / LABS as f64;
            let mu = if truth.contains(&i) { mu_value } else { 0.0 };
            *yb = mu + cfg.sigma * (tau_bar + z_bar);
        }
        let y_tilde = w.as_ref() * DVector::from_column_slice(&ybar);
        let beta = (0..n)
            .map(|i| if truth.contains(&i) { self.signal } else { 0.0 })
            .collect();
        Ok(SimData {
            x: x.clone(),
            beta,
            y: y_tilde.iter().copied().collect(),
            truth,
            marginal: Some(ybar),
        })
    }

    fn gen_group<R: Rng>(&self, cfg: &ExperimentConfig, rng: &mut R) -> Result<SimData> {
        let part = self
            .partition
            .as_ref()
            .ok_or_else(|| Error::contract("context was not built for a group design"))?;
        let x = match cfg.design {
            DesignKind::GroupGaussian => gaussian_design(cfg.n, cfg.m, rng)?,
            _ => DesignMatrix::identity(cfg.m)?,
        };
        let truth = support(rng, part.num_groups(), cfg.t);
        let coef = Uniform::new(0.1, 1.1).map_err(|e| Error::contract(e.to_string()))?;
        let mut beta = vec![0.0; cfg.m];
        for &g in &truth {
            let idx = &part.groups()[g];
            let raw: Vec<f64> = idx.iter().map(|_| coef.sample(rng)).collect();
            let effect = group_effect_norm(&x, idx, &raw);
            let target = self.signal * (idx.len() as f64).sqrt();
            for (&j, b) in idx.iter().zip(&raw) {
                beta[j] = b * target / effect;
            }
        }
        let y = respond(&x, &beta, cfg.sigma, rng);
        Ok(SimData {
            x,
            beta,
            y,
            truth,
            marginal: None,
        })
    }
}

/// `t` distinct indices out of `0..m`, uniformly.
fn support<R: Rng>(rng: &mut R, m: usize, t: usize) -> BTreeSet<usize> {
    sample(rng, m, t).into_iter().collect()
}

/// `N(0, 1/n)` entries, columns rescaled to unit norm.
pub fn gaussian_design<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<DesignMatrix> {
    let scale = 1.0 / (n as f64).sqrt();
    let x = DMatrix::from_fn(n, m, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    });
    DesignMatrix::normalized_from(x)
}

fn group_effect_norm(x: &DesignMatrix, idx: &[usize], coef: &[f64]) -> f64 {
    if x.is_identity() {
        return coef.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let block = x.select_columns(idx);
    (block * DVector::from_column_slice(coef)).norm()
}

/// `y = Xβ + σε`.
fn respond<R: Rng>(x: &DesignMatrix, beta: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let mean = x.mul_vec(&DVector::from_column_slice(beta));
    mean.iter()
        .map(|mu| {
            let e: f64 = StandardNormal.sample(rng);
            mu + sigma * e
        })
        .collect()
}

fn coefficients(m: usize, truth: &BTreeSet<usize>, value: f64) -> Vec<f64> {
    (0..m)
        .map(|i| if truth.contains(&i) { value } else { 0.0 })
        .collect()
}

pub fn gen_orthogonal<R: Rng>(cfg: &ExperimentConfig, signal: f64, rng: &mut R) -> Result<SimData> {
    let x = DesignMatrix::identity(cfg.n)?;
    let truth = support(rng, cfg.m, cfg.t);
    let beta = coefficients(cfg.m, &truth, signal);
    let y = respond(&x, &beta, cfg.sigma, rng);
    Ok(SimData {
        marginal: Some(y.clone()),
        x,
        beta,
        y,
        truth,
    })
}

pub fn gen_gaussian<R: Rng>(cfg: &ExperimentConfig, signal: f64, rng: &mut R) -> Result<SimData> {
    let x = gaussian_design(cfg.n, cfg.m, rng)?;
    let truth = support(rng, cfg.m, cfg.t);
    let beta = coefficients(cfg.m, &truth, signal);
    let y = respond(&x, &beta, cfg.sigma, rng);
    Ok(SimData {
        x,
        beta,
        y,
        truth,
        marginal: None,
    })
}
