use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::group::WeightScheme;
use crate::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// `X = I_n`.
    OrthogonalIdentity,
    /// `N(0, 1/n)` entries, columns rescaled to unit norm, redrawn each replication.
    Gaussian,
    /// Lab-averaged means with equicorrelated noise, whitened into a regression.
    CorrelatedMeans,
    /// `X = I_p` with contiguous groups.
    GroupOrthogonal,
    /// Gaussian design with contiguous groups.
    GroupGaussian,
}

impl DesignKind {
    pub fn is_group(self) -> bool {
        matches!(self, DesignKind::GroupOrthogonal | DesignKind::GroupGaussian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// SLOPE with the BH schedule at `q = alpha`.
    SlopeBh,
    KSlope,
    FSlope,
    /// Group SLOPE with the gFDR schedule at `q = alpha`.
    GSlope,
    GkSlope,
    GfSlope,
    SdKfwer,
    SdFdp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SlopeBh => "slope-bh",
            Method::KSlope => "k-slope",
            Method::FSlope => "f-slope",
            Method::GSlope => "g-slope",
            Method::GkSlope => "gk-slope",
            Method::GfSlope => "gf-slope",
            Method::SdKfwer => "sd-kfwer",
            Method::SdFdp => "sd-fdp",
        }
    }

    pub fn is_group(self) -> bool {
        matches!(self, Method::GSlope | Method::GkSlope | Method::GfSlope)
    }

    fn needs_k(self) -> bool {
        matches!(self, Method::KSlope | Method::GkSlope | Method::SdKfwer)
    }
}

/// Nonzero coefficient size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// `3 sqrt(2 ln n)`.
    Strong,
    /// `2 sqrt(2 ln m)`.
    Moderate,
    /// `sqrt(2 ln m)`.
    Weak,
    /// Group effect norms `a sqrt(l_i)` with `a` from the group-count formula.
    GroupScaled,
    Custom(f64),
}

/// How the group signal formula treats the group size in `T^{-2/l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GroupSignalReading {
    /// Each group's own size.
    #[default]
    PerClass,
    /// The mean group size for every group.
    MeanSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    /// Closed-form Wishart correction.
    #[default]
    Gaussian,
    /// Monte-Carlo estimate on each replication's design.
    MonteCarlo,
}

fn default_gamma() -> f64 {
    0.1
}

fn default_sigma() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_mc_replicates() -> usize {
    100
}

/// One simulation setting. For group designs `m` is the total number of
/// features, `t` counts relevant groups and `k` counts false groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub design: DesignKind,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub signal: Signal,
    pub method: Method,
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Number of groups, for group designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    /// Group size classes; the groups are split equally among them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub group_signal_reading: GroupSignalReading,
    #[serde(default)]
    pub correction: Correction,
    #[serde(default = "default_mc_replicates")]
    pub mc_replicates: usize,
    /// Noise standard deviation.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Run the iterative solver even where a closed form exists.
    #[serde(default)]
    pub full_solver: bool,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(design: DesignKind, method: Method, n: usize, m: usize, t: usize) -> Self {
        ExperimentConfig {
            label: None,
            design,
            n,
            m,
            t,
            signal: match design {
                DesignKind::OrthogonalIdentity => Signal::Strong,
                DesignKind::GroupOrthogonal | DesignKind::GroupGaussian => Signal::GroupScaled,
                _ => Signal::Moderate,
            },
            method,
            alpha: 0.1,
            gamma: default_gamma(),
            k: None,
            replications: 100,
            seed: 0,
            groups: None,
            group_sizes: None,
            weights: WeightScheme::default(),
            group_signal_reading: GroupSignalReading::default(),
            correction: Correction::default(),
            mc_replicates: default_mc_replicates(),
            sigma: default_sigma(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            full_solver: false,
        }
    }

    /// Sizes of every group, in order. Groups are split into equal runs of
    /// each size class.
    pub fn group_size_list(&self) -> Result<Vec<usize>> {
        let groups = self
            .groups
            .ok_or_else(|| Error::contract("group designs need `groups`"))?;
        let classes = self
            .group_sizes
            .as_ref()
            .ok_or_else(|| Error::contract("group designs need `group_sizes`"))?;
        if classes.is_empty() || classes.contains(&0) {
            return Err(Error::contract("group sizes must be positive"));
        }
        if groups % classes.len() != 0 {
            return Err(Error::contract(format!(
                "{groups} groups cannot be split equally into {} size classes",
                classes.len()
            )));
        }
        let per = groups / classes.len();
        let total = classes
            .iter()
            .try_fold(0usize, |acc, &s| acc.checked_add(s.checked_mul(per)?));
        if total != Some(self.m) {
            return Err(Error::contract(format!(
                "{groups} groups of sizes {classes:?} do not add up to m = {}",
                self.m
            )));
        }
        Ok(classes
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, per))
            .collect())
    }

    /// Number of penalized units: groups for group designs, features otherwise.
    pub fn units(&self) -> usize {
        if self.design.is_group() {
            self.groups.unwrap_or(0)
        } else {
            self.m
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("gamma", self.gamma)?;
        check_positive("sigma", self.sigma)?;
        check_positive("tol", self.tol)?;
        if self.replications == 0 {
            return Err(Error::contract("replications must be at least 1"));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::contract("n and m must be positive"));
        }
        if self.max_iter == 0 || self.mc_replicates == 0 {
            return Err(Error::contract("max_iter and mc_replicates must be positive"));
        }
        if let Signal::Custom(v) = self.signal {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain {
                    name: "signal",
                    value: v,
                    constraint: "must be finite and non-negative",
                });
            }
        }
        if self.design.is_group() != self.method.is_group()
            && !matches!(self.method, Method::SdFdp | Method::SdKfwer)
        {
            return Err(Error::contract(format!(
                "method {} does not apply to design {:?}",
                self.method.name(),
                self.design
            )));
        }
        if matches!(self.method, Method::SdFdp | Method::SdKfwer)
            && !matches!(
                self.design,
                DesignKind::OrthogonalIdentity | DesignKind::CorrelatedMeans
            )
        {
            return Err(Error::contract(format!(
                "stepdown baselines need marginal statistics; design {:?} is unsupported",
                self.design
            )));
        }
        if self.method.needs_k() && self.k.is_none() {
            return Err(Error::contract(format!("method {} needs k", self.method.name())));
        }
        match self.design {
            DesignKind::OrthogonalIdentity | DesignKind::CorrelatedMeans => {
                if self.n != self.m {
                    return Err(Error::contract(format!(
                        "design {:?} needs n = m (got n = {}, m = {})",
                        self.design, self.n, self.m
                    )));
                }
            }
            DesignKind::GroupOrthogonal | DesignKind::GroupGaussian => {
                let sizes = self.group_size_list()?;
                if self.design == DesignKind::GroupOrthogonal && self.n != self.m {
                    return Err(Error::contract("group-orthogonal design needs n = m"));
                }
                if sizes.len() < 2 {
                    return Err(Error::contract("group designs need at least two groups"));
                }
            }
            DesignKind::Gaussian => {}
        }
        if !self.design.is_group() && (self.groups.is_some() || self.group_sizes.is_some()) {
            return Err(Error::contract("groups are only used by group designs"));
        }
        let units = self.units();
        if self.t > units {
            return Err(Error::contract(format!(
                "t = {} exceeds the {units} available units",
                self.t
            )));
        }
        if let Some(k) = self.k {
            if k == 0 || k > units {
                return Err(Error::Domain {
                    name: "k",
                    value: k as f64,
                    constraint: "must lie in [1, number of units]",
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_round_trip() {
        let mut c = ExperimentConfig::new(DesignKind::GroupOrthogonal, Method::GkSlope, 50, 50, 2);
        c.groups = Some(10);
        c.group_sizes = Some(vec![5]);
        c.k = Some(2);
        c.signal = Signal::Custom(2.5);
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"custom\":2.5"));
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_catches_mismatches() {
        let c = ExperimentConfig::new(DesignKind::OrthogonalIdentity, Method::KSlope, 10, 10, 2);
        assert!(c.validate().is_err());
        let c = ExperimentConfig::new(DesignKind::Gaussian, Method::SdFdp, 10, 20, 2);
        assert!(c.validate().is_err());
        let c = ExperimentConfig::new(DesignKind::OrthogonalIdentity, Method::GSlope, 10, 10, 2);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(DesignKind::GroupGaussian, Method::GfSlope, 100, 30, 2);
        c.groups = Some(10);
        c.group_sizes = Some(vec![2, 4]);
        c.validate().unwrap();
        assert_eq!(c.group_size_list().unwrap()[..6], [2, 2, 2, 2, 2, 4]);
        c.m = 31;
        assert!(c.validate().is_err());
        let unknown = r#"{"design":"gaussian","n":5,"m":5,"t":1,"signal":"weak","method":"f-slope","alpha":0.1,"replications":1,"seed":0,"bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(unknown).is_err());
    }
}
