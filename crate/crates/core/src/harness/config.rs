//! Run configuration (TOML). Every key has a default; unknown keys are rejected
//! all at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annulus::{AnnulusGeometry, FluxProfile, ShellSpec, TermWeights};
use crate::diffnet::{mlp_sizes, Activation};
use crate::error::{Error, Result};
use crate::optim::{AuxSchedule, DecayKind, LrSchedule, OptimizerKind};
use crate::poisson::AuxStrategy;

/// Environment variable that replaces `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "RESGRAD_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Off,
    FdFixed,
    FdLinear,
    AdFixed,
    AdLinear,
    ShellFixed,
    ShellScheduled,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Off => "off",
            Arm::FdFixed => "fd_fixed",
            Arm::FdLinear => "fd_linear",
            Arm::AdFixed => "ad_fixed",
            Arm::AdLinear => "ad_linear",
            Arm::ShellFixed => "shell_fixed",
            Arm::ShellScheduled => "shell_scheduled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Config(format!("unknown arm `{s}`")))
    }

    pub fn valid_for(self, stage: Stage) -> bool {
        match stage {
            Stage::Stage1 => matches!(self, Arm::Off | Arm::FdFixed | Arm::FdLinear | Arm::AdFixed | Arm::AdLinear),
            Stage::Stage2 => matches!(self, Arm::Off | Arm::ShellFixed | Arm::ShellScheduled),
        }
    }

    pub fn is_scheduled(self) -> bool {
        matches!(self, Arm::FdLinear | Arm::AdLinear | Arm::ShellScheduled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct Seeds {
    pub init: u64,
    pub cloud: u64,
    pub validation: u64,
    pub audit: u64,
}


impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            init: seed,
            cloud: seed,
            validation: seed,
            audit: seed,
        }
    }
}

/// Unset fields take the stage default (Stage 1: 6 x 96 tanh, Stage 2: 16 x 128 silu).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr_init: f64,
    pub lr_final: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam999,
            lr_init: 1e-3,
            lr_final: 1e-5,
        }
    }
}

/// Auxiliary-weight schedule. Unset fields take arm/stage defaults; fractions are
/// of the total epoch count and the decay runs to the last epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuxConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub decay: DecayKind,
    pub start_frac: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_frac: Option<f64>,
    pub hold_frac: f64,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            weight: None,
            rho: None,
            decay: DecayKind::Linear,
            start_frac: 0.0,
            ramp_frac: None,
            hold_frac: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Config {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_val_interior: usize,
    pub n_val_boundary: usize,
    pub lambda_bc: f64,
    pub aux_n: usize,
    pub aux_strategy: AuxStrategy,
    pub audit_points: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            n_interior: 2048,
            n_boundary: 512,
            n_val_interior: 1024,
            n_val_boundary: 256,
            lambda_bc: 1.0,
            aux_n: 64,
            aux_strategy: AuxStrategy::FixedSafe,
            audit_points: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage2Config {
    pub geometry: AnnulusGeometry,
    pub flux: FluxProfile,
    pub weights: TermWeights,
    pub shell: ShellSpec,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_pairs: usize,
    pub n_val_interior: usize,
    pub n_val_boundary: usize,
    pub n_val_pairs: usize,
    pub audit_n_theta: usize,
    pub audit_n_z: usize,
    /// Optional wall slice from the reference solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            geometry: AnnulusGeometry::default(),
            flux: FluxProfile::default(),
            weights: TermWeights::default(),
            shell: ShellSpec::default(),
            n_interior: 4000,
            n_boundary: 2000,
            n_pairs: 400,
            n_val_interior: 1024,
            n_val_boundary: 512,
            n_val_pairs: 200,
            audit_n_theta: 128,
            audit_n_z: 128,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            write_checkpoint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub stage: Stage,
    pub arm: Arm,
    pub epochs: u64,
    pub validate_every: u64,
    /// Wall-clock timing makes summaries differ between identical runs, so it is opt-in.
    pub record_timing: bool,
    pub seeds: Seeds,
    pub network: NetworkConfig,
    pub optimizer: OptimizerConfig,
    pub aux: AuxConfig,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stage: Stage::Stage1,
            arm: Arm::Off,
            epochs: 1000,
            validate_every: 100,
            record_timing: false,
            seeds: Seeds::default(),
            network: NetworkConfig::default(),
            optimizer: OptimizerConfig::default(),
            aux: AuxConfig::default(),
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn stage1_default() -> Self {
        RunConfig::default()
    }

    pub fn stage2_default() -> Self {
        RunConfig {
            stage: Stage::Stage2,
            ..RunConfig::default()
        }
    }

    /// Parses TOML, listing every unrecognized key in one error.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Config(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` overrides with dotted keys, e.g. `optimizer.lr_init=1e-3`.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml_string()).expect("config round-trips");
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let value = parse_value(raw.trim());
            let parts: Vec<&str> = key.trim().split('.').collect();
            let mut cur = &mut table;
            for p in &parts[..parts.len() - 1] {
                cur = cur
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
            }
            cur.insert(parts[parts.len() - 1].to_string(), value);
        }
        Self::from_toml_str(&toml::to_string(&table).expect("table serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.arm.valid_for(self.stage) {
            return Err(Error::Config(format!(
                "arm `{}` does not belong to {}",
                self.arm.as_str(),
                self.stage.as_str()
            )));
        }
        if self.validate_every == 0 {
            return Err(Error::Config("validate_every must be positive".into()));
        }
        let a = &self.aux;
        let fracs = [a.start_frac, a.ramp_frac.unwrap_or(0.0), a.hold_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) || fracs.iter().sum::<f64>() > 1.0 {
            return Err(Error::Config("aux fractions must lie in [0, 1] and sum to at most 1".into()));
        }
        if let Some(w) = a.weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config("aux.weight must be finite and non-negative".into()));
            }
        }
        if !(self.optimizer.lr_init > 0.0 && self.optimizer.lr_final >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.stage2.flux.validate().is_err() {
            return Err(Error::Config("invalid flux profile".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let (input, layers, width) = match self.stage {
            Stage::Stage1 => (2, 6, 96),
            Stage::Stage2 => (3, 16, 128),
        };
        mlp_sizes(
            input,
            self.network.hidden_layers.unwrap_or(layers),
            self.network.width.unwrap_or(width),
        )
    }

    pub fn activation(&self) -> Activation {
        self.network.activation.unwrap_or(match self.stage {
            Stage::Stage1 => Activation::Tanh,
            Stage::Stage2 => Activation::Silu,
        })
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule::cosine(self.optimizer.lr_init, self.optimizer.lr_final, self.epochs)
    }

    /// Target weight of the auxiliary term (the FD anchor for AD arms); 0 for `off`.
    pub fn aux_weight(&self) -> f64 {
        if self.arm == Arm::Off {
            return 0.0;
        }
        self.aux.weight.unwrap_or(match self.arm {
            Arm::ShellFixed => 5e-4,
            _ => 1e-3,
        })
    }

    pub fn aux_schedule(&self) -> AuxSchedule {
        let lambda0 = self.aux_weight();
        if !self.arm.is_scheduled() {
            return AuxSchedule {
                start_epoch: (self.aux.start_frac * self.epochs as f64).round() as u64,
                ..AuxSchedule::constant(lambda0)
            };
        }
        let e = self.epochs as f64;
        let start = (self.aux.start_frac * e).round() as u64;
        let ramp_frac = self.aux.ramp_frac.unwrap_or(match self.stage {
            Stage::Stage1 => 0.1,
            Stage::Stage2 => 0.0,
        });
        let ramp = (ramp_frac * e).round() as u64;
        let hold = (self.aux.hold_frac * e).round() as u64;
        AuxSchedule {
            start_epoch: start,
            ramp_len: ramp,
            hold_len: hold,
            decay_len: self.epochs.saturating_sub(start + ramp + hold),
            decay_kind: self.aux.decay,
            lambda0,
            rho: self.aux.rho.unwrap_or(match self.stage {
                Stage::Stage1 => 0.1,
                Stage::Stage2 => 0.5,
            }),
        }
    }

    /// Output directory, honoring the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }

    /// File stem shared by this run's outputs.
    pub fn run_name(&self) -> String {
        let mut name = format!("{}_{}_seed{}", self.stage.as_str(), self.arm.as_str(), self.seeds.init);
        if self.arm != Arm::Off {
            name.push_str(&format!("_w{:e}", self.aux_weight()));
        }
        name
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
