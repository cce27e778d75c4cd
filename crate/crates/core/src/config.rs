//! Run configuration: a TOML file with one section per module. Unknown
//! keys are rejected so typos fail fast. Controller-specific constants
//! default to the standard settings of each algorithm variant and may be
//! overridden explicitly.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controllers::{DEFAULT_DELTA_REG, DEFAULT_LAMBDA_X};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_LAMBDA_ERLE;
use crate::neural::{DEFAULT_LOG_EPS, DEFAULT_SIGMA_FLOOR};
use crate::scenario::ScenarioConfig;
use crate::training::{MaskFamilyConfig, MaskVariant, DEFAULT_UPSILON_FLOOR};

/// Which adaptation-control law drives the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Fixed step-size normalized by the input PSD.
    Fdaf,
    /// Diagonalized DFT-domain Kalman filter.
    Kalman,
    /// Error-aware fixed baseline: mask family with identity masks.
    EaFdaf,
    /// Both masks inferred by the network.
    DnnFdaf,
    /// Error mask fixed to zero, step mask inferred.
    DnnFdafNoMe,
    /// Step mask fixed to identity, error mask inferred.
    DnnFdafMmu1,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 6] = [
        ControllerKind::Fdaf,
        ControllerKind::Kalman,
        ControllerKind::EaFdaf,
        ControllerKind::DnnFdaf,
        ControllerKind::DnnFdafNoMe,
        ControllerKind::DnnFdafMmu1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Fdaf => "fdaf",
            ControllerKind::Kalman => "kalman",
            ControllerKind::EaFdaf => "ea_fdaf",
            ControllerKind::DnnFdaf => "dnn_fdaf",
            ControllerKind::DnnFdafNoMe => "dnn_fdaf_no_me",
            ControllerKind::DnnFdafMmu1 => "dnn_fdaf_mmu1",
        }
    }

    pub fn mask_variant(self) -> Option<MaskVariant> {
        match self {
            ControllerKind::EaFdaf => Some(MaskVariant::EaFdaf),
            ControllerKind::DnnFdaf => Some(MaskVariant::Full),
            ControllerKind::DnnFdafNoMe => Some(MaskVariant::NoErrorMask),
            ControllerKind::DnnFdafMmu1 => Some(MaskVariant::NoStepMask),
            _ => None,
        }
    }

    pub fn uses_network(self) -> bool {
        self.mask_variant().is_some_and(|v| v.uses_network())
    }

    /// Standard (lambda_p, mu_max) for the mask family variants.
    pub fn mask_defaults(self) -> Option<(f64, f64)> {
        match self {
            ControllerKind::EaFdaf => Some((0.5, 0.75)),
            ControllerKind::DnnFdaf => Some((0.0, 1.0)),
            ControllerKind::DnnFdafNoMe => Some((0.0, 1.0)),
            ControllerKind::DnnFdafMmu1 => Some((0.0, 0.5)),
            _ => None,
        }
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown controller '{s}'; expected one of {}",
                    ControllerKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// DFT length M (even).
    pub m: usize,
    /// Block shift R; the modeled filter length is L = M - R.
    pub r: usize,
    #[serde(default = "default_delta_reg")]
    pub delta_reg: f64,
}

fn default_delta_reg() -> f64 {
    DEFAULT_DELTA_REG
}

impl FilterSection {
    pub fn l(&self) -> usize {
        self.m - self.r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    #[serde(default = "default_mu_fdaf")]
    pub mu_fdaf: f64,
    #[serde(default = "default_kalman_a")]
    pub kalman_a: f64,
    #[serde(default = "default_psi_dw_init")]
    pub psi_dw_init: f64,
    #[serde(default = "default_lambda_x")]
    pub lambda_x: f64,
    /// Defaults to the variant's standard value when omitted.
    #[serde(default)]
    pub lambda_p: Option<f64>,
    /// Defaults to the variant's standard value when omitted.
    #[serde(default)]
    pub mu_max: Option<f64>,
}

fn default_mu_fdaf() -> f64 {
    0.5
}

fn default_kalman_a() -> f64 {
    0.999
}

fn default_psi_dw_init() -> f64 {
    1.0
}

fn default_lambda_x() -> f64 {
    DEFAULT_LAMBDA_X
}

impl ControllerSection {
    pub fn resolved_lambda_p(&self, kind: ControllerKind) -> f64 {
        self.lambda_p
            .or_else(|| kind.mask_defaults().map(|(lp, _)| lp))
            .unwrap_or(0.0)
    }

    pub fn resolved_mu_max(&self, kind: ControllerKind) -> f64 {
        self.mu_max
            .or_else(|| kind.mask_defaults().map(|(_, mm)| mm))
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NeuralSection {
    /// Hidden width of the GRU layers (and the input projection).
    pub p: usize,
    #[serde(default = "default_log_eps")]
    pub eps: f64,
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_log_eps() -> f64 {
    DEFAULT_LOG_EPS
}

fn default_sigma_floor() -> f64 {
    DEFAULT_SIGMA_FLOOR
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps_adam")]
    pub eps_adam: f64,
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
    #[serde(default = "default_upsilon_floor")]
    pub upsilon_floor: f64,
    /// 0 disables truncation (full backpropagation through time).
    #[serde(default)]
    pub detach_interval: usize,
    #[serde(default = "default_train_seed")]
    pub seed: u64,
    /// Length of each training sequence in seconds.
    #[serde(default = "default_sequence_s")]
    pub sequence_s: f64,
    /// Scenario count for on-the-fly corpus generation.
    #[serde(default = "default_num_scenarios")]
    pub num_scenarios: usize,
}

fn default_epochs() -> usize {
    12
}

fn default_batch() -> usize {
    4
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps_adam() -> f64 {
    1e-8
}

fn default_grad_clip() -> f64 {
    10.0
}

fn default_upsilon_floor() -> f64 {
    DEFAULT_UPSILON_FLOOR
}

fn default_train_seed() -> u64 {
    1
}

fn default_sequence_s() -> f64 {
    10.0
}

fn default_num_scenarios() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_lambda_erle")]
    pub lambda_erle: f64,
}

fn default_lambda_erle() -> f64 {
    DEFAULT_LAMBDA_ERLE
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            lambda_erle: DEFAULT_LAMBDA_ERLE,
        }
    }
}

/// Everything one run needs, grouped by module.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterSection,
    pub controller: ControllerSection,
    pub neural: NeuralSection,
    #[serde(default = "TrainingSection::default")]
    pub training: TrainingSection,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub metrics: MetricsSection,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch: default_batch(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps_adam: default_eps_adam(),
            grad_clip: default_grad_clip(),
            upsilon_floor: default_upsilon_floor(),
            detach_interval: 0,
            seed: default_train_seed(),
            sequence_s: default_sequence_s(),
            num_scenarios: default_num_scenarios(),
        }
    }
}

impl RunConfig {
    /// Desk-scale defaults: M=256, R=128, P=32, 2 kHz sample rate (same
    /// block rate as the full-scale setup).
    pub fn toy() -> Self {
        Self {
            filter: FilterSection {
                m: 256,
                r: 128,
                delta_reg: DEFAULT_DELTA_REG,
            },
            controller: ControllerSection {
                kind: ControllerKind::DnnFdaf,
                mu_fdaf: default_mu_fdaf(),
                kalman_a: default_kalman_a(),
                psi_dw_init: default_psi_dw_init(),
                lambda_x: DEFAULT_LAMBDA_X,
                lambda_p: None,
                mu_max: None,
            },
            neural: NeuralSection {
                p: 32,
                eps: DEFAULT_LOG_EPS,
                sigma_floor: DEFAULT_SIGMA_FLOOR,
                init_seed: 0,
            },
            training: TrainingSection::default(),
            scenario: ScenarioConfig::toy(),
            metrics: MetricsSection::default(),
        }
    }

    /// Full-scale geometry: 16 kHz, L=2048, R=1024, M=3072, P=256.
    pub fn full_scale() -> Self {
        let mut cfg = Self::toy();
        cfg.filter.m = 3072;
        cfg.filter.r = 1024;
        cfg.neural.p = 256;
        cfg.scenario = ScenarioConfig::default();
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter.m % 2 != 0 || self.filter.m < 4 {
            return Err(Error::InvalidConfig(format!(
                "M must be even and >= 4, got {}",
                self.filter.m
            )));
        }
        if self.filter.r == 0 || self.filter.r >= self.filter.m {
            return Err(Error::InvalidConfig(format!(
                "R must satisfy 0 < R < M, got R={}, M={}",
                self.filter.r, self.filter.m
            )));
        }
        if self.scenario.filter_len != self.filter.l() {
            return Err(Error::InvalidConfig(format!(
                "scenario filter_len {} must equal L = M - R = {}",
                self.scenario.filter_len,
                self.filter.l()
            )));
        }
        if self.scenario.block_len != self.filter.r {
            return Err(Error::InvalidConfig(format!(
                "scenario block_len {} must equal R = {}",
                self.scenario.block_len, self.filter.r
            )));
        }
        self.scenario.validate()?;
        if self.neural.p == 0 {
            return Err(Error::InvalidConfig("network width P must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.controller.lambda_x) {
            return Err(Error::InvalidConfig("lambda_x must be in [0, 1)".into()));
        }
        let lp = self
            .controller
            .resolved_lambda_p(self.controller.kind);
        if !(0.0..=1.0).contains(&lp) {
            return Err(Error::InvalidConfig("lambda_p must be in [0, 1]".into()));
        }
        if !(0.0 < self.controller.kalman_a && self.controller.kalman_a <= 1.0) {
            return Err(Error::InvalidConfig("kalman_a must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Constants of the mask-gated step-size law for a given variant.
    pub fn mask_family(&self, kind: ControllerKind) -> Result<MaskFamilyConfig> {
        let variant = kind.mask_variant().ok_or_else(|| {
            Error::InvalidConfig(format!("{} is not a mask-family controller", kind.name()))
        })?;
        Ok(MaskFamilyConfig {
            variant,
            lambda_x: self.controller.lambda_x,
            lambda_p: self.controller.resolved_lambda_p(kind),
            mu_max: self.controller.resolved_mu_max(kind),
            delta_reg: self.filter.delta_reg,
            log_eps: self.neural.eps,
        })
    }

    /// Blocks per training sequence.
    pub fn sequence_blocks(&self) -> usize {
        ((self.training.sequence_s * self.scenario.sample_rate as f64) / self.filter.r as f64)
            .floor() as usize
    }
}
