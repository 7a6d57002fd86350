//! Run configuration: a TOML file with typed sections.
//!
//! ```toml
//! seed = 1
//! replicas = 4
//!
//! [target]
//! name = "gaussian"
//! dim = 1
//!
//! [proposal]
//! profile = { kind = "student", gamma = 3.0 }
//!
//! [adapt]
//! alpha_star = 0.234
//! n_steps = 100000
//!
//! [output]
//! dir = "out"
//! thinning = 10
//!
//! [[functionals]]
//! kind = "power"
//! index = 0
//! power = 2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use asm_core::adapt::{AdaptConfig, AmConfig, RestrictionSchedule, StepSchedule};
use asm_core::proposal::{ProposalModel, RadialProfile, ScalingFunction, ShapeMatrix};
use asm_core::target::{
    BuiltinTarget, ExponentialPower, Functional, Gaussian, SmoothBump, TargetDensity, UniformBall, UniformBox,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    pub target: TargetSpec,
    #[serde(default)]
    pub proposal: ProposalSpec,
    pub adapt: AdaptSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<RestrictionSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub am: Option<AmConfig>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functionals: Vec<Functional>,
}

fn default_seed() -> u64 {
    1
}

fn default_replicas() -> u32 {
    1
}

fn one() -> f64 {
    1.0
}

/// A builtin target by name plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        /// Row-major, `dim × dim`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<f64>>,
    },
    ExponentialPower {
        dim: usize,
        p: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    UniformBall {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        radius: f64,
    },
    SmoothBump {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        radius: f64,
        floor: f64,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl TargetSpec {
    pub fn build(&self) -> Result<BuiltinTarget> {
        let origin = |d: usize, c: &Option<Vec<f64>>| c.clone().unwrap_or_else(|| vec![0.0; d]);
        let t = match self {
            TargetSpec::Gaussian { dim, mean, covariance } => {
                let mean = origin(*dim, mean);
                match covariance {
                    Some(cov) => BuiltinTarget::Gaussian(Gaussian::from_covariance(mean, cov)?),
                    None => {
                        let mut id = vec![0.0; dim * dim];
                        (0..*dim).for_each(|i| id[i * dim + i] = 1.0);
                        BuiltinTarget::Gaussian(Gaussian::new(mean, id)?)
                    }
                }
            }
            TargetSpec::ExponentialPower { dim, p, scale } => {
                BuiltinTarget::ExponentialPower(ExponentialPower::new(*dim, *p, *scale)?)
            }
            TargetSpec::UniformBall { dim, center, radius } => {
                BuiltinTarget::UniformBall(UniformBall::new(origin(*dim, center), *radius)?)
            }
            TargetSpec::SmoothBump { dim, center, radius, floor } => {
                BuiltinTarget::SmoothBump(SmoothBump::new(origin(*dim, center), *radius, *floor)?)
            }
            TargetSpec::UniformBox { lo, hi } => BuiltinTarget::UniformBox(UniformBox::new(lo.clone(), hi.clone())?),
        };
        Ok(t)
    }

    /// Returns a copy with one scalar parameter replaced.
    pub fn with_param(&self, key: &str, value: f64) -> Result<Self> {
        let mut table = toml::Table::try_from(self)?;
        let v = match table.get(key) {
            Some(toml::Value::Integer(_)) => {
                if value.fract() != 0.0 {
                    bail!("target parameter `{key}` is an integer, got {value}");
                }
                toml::Value::Integer(value as i64)
            }
            Some(toml::Value::Float(_)) => toml::Value::Float(value),
            Some(_) => bail!("target parameter `{key}` is not a scalar"),
            None if key == "name" => bail!("the target name cannot be swept"),
            None => toml::Value::Float(value),
        };
        table.insert(key.to_string(), v);
        table.try_into().with_context(|| format!("sweeping target parameter `{key}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Gaussian,
    Student {
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingSpec {
    #[default]
    Exponential,
    SoftplusPower {
        power: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub scaling: ScalingSpec,
    /// Row-major shape matrix; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<f64>>,
}

impl ProposalSpec {
    pub fn build(&self, d: usize) -> Result<ProposalModel> {
        let profile = match self.profile {
            ProfileSpec::Gaussian => RadialProfile::Gaussian,
            ProfileSpec::Student { gamma } => RadialProfile::student(gamma)?,
        };
        let scaling = match self.scaling {
            ScalingSpec::Exponential => ScalingFunction::Exponential,
            ScalingSpec::SoftplusPower { power } => ScalingFunction::SoftplusPower { power },
        };
        let shape = match &self.shape {
            Some(m) => ShapeMatrix::dense(m.clone(), d)?,
            None => ShapeMatrix::identity(d),
        };
        Ok(ProposalModel::new(profile, shape, scaling)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSpec {
    pub alpha_star: f64,
    pub n_steps: u64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Initial parameter; `φ(s₁) = 2.38/√d` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Initial state; the target's center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub binary_adaptation: bool,
}

fn default_gamma() -> f64 {
    0.66
}

impl AdaptSpec {
    pub fn build(&self, target: &BuiltinTarget, model: &ProposalModel) -> Result<AdaptConfig> {
        let x0 = self.x0.clone().unwrap_or_else(|| target.center());
        let s0 = self.s0.unwrap_or_else(|| AdaptConfig::default_s0(model));
        let mut cfg = AdaptConfig::new(self.alpha_star, StepSchedule::new(self.c, self.gamma)?, x0, s0, self.n_steps)?;
        cfg.binary_adaptation = self.binary_adaptation;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    /// Every `thinning`-th step goes to the trace.
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    #[serde(default = "default_true")]
    pub trace: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_prefix() -> String {
    "asm".into()
}

fn default_thinning() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: default_prefix(), thinning: 1, trace: true }
    }
}

/// Grid axes; an empty axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_star: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<f64>,
    /// Scalar target parameters, e.g. `p = [3.0, 4.0]`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub target: BTreeMap<String, Vec<f64>>,
}

impl SweepSpec {
    pub fn is_empty(&self) -> bool {
        self.alpha_star.is_empty() && self.gamma.is_empty() && self.c.is_empty() && self.target.values().all(Vec::is_empty)
    }

    /// Axis names and values, in a fixed order, skipping empty axes.
    pub fn axes(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, v) in [("alpha_star", &self.alpha_star), ("gamma", &self.gamma), ("c", &self.c)] {
            if !v.is_empty() {
                out.push((name.to_string(), v.clone()));
            }
        }
        for (k, v) in &self.target {
            if !v.is_empty() {
                out.push((format!("target.{k}"), v.clone()));
            }
        }
        out
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output.thinning == 0 {
            bail!("output.thinning must be at least 1");
        }
        if self.replicas == 0 {
            bail!("replicas must be at least 1");
        }
        if self.am.is_some() && self.restriction.is_some() {
            bail!("[am] and [restriction] cannot be combined");
        }
        Ok(())
    }

    /// Target, proposal and adaptation settings, checked against each other.
    pub fn build(&self) -> Result<(BuiltinTarget, ProposalModel, AdaptConfig)> {
        let target = self.target.build().context("[target]")?;
        let model = self.proposal.build(target.dim()).context("[proposal]")?;
        let adapt = self.adapt.build(&target, &model).context("[adapt]")?;
        if adapt.x0.len() != target.dim() {
            bail!("[adapt] x0 has {} coordinates, the target has dimension {}", adapt.x0.len(), target.dim());
        }
        if let Some(r) = &self.restriction {
            r.validate().context("[restriction]")?;
        }
        if let Some(am) = &self.am {
            am.validate().context("[am]")?;
        }
        for f in &self.functionals {
            let idx = match f {
                Functional::Coordinate { index } | Functional::Power { index, .. } | Functional::HalfSpace { index, .. } => {
                    Some(*index)
                }
                _ => None,
            };
            if idx.is_some_and(|i| i >= target.dim()) {
                bail!("functional {} indexes past dimension {}", f.name(), target.dim());
            }
        }
        Ok((target, model, adapt))
    }

    /// Hex digest of the canonical JSON form, with the sweep grid left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.sweep = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
