//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! A `preset` line applies a named bundle of settings first; explicit keys
//! then override it regardless of their position in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::algorithms::{BetaSchedule, BlockRule};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Synthetic,
    Real,
    FitEps,
    Bounds,
    MiCheck,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Synthetic => "synthetic",
            Mode::Real => "real",
            Mode::FitEps => "fit-eps",
            Mode::Bounds => "bounds",
            Mode::MiCheck => "mi-check",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        [
            Mode::Synthetic,
            Mode::Real,
            Mode::FitEps,
            Mode::Bounds,
            Mode::MiCheck,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    SquaredExponential,
    Matern,
}

/// Forgetting rate handed to the real-data run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsSetting {
    Value(f64),
    /// Maximize the marginal likelihood of the training rows.
    Fit,
}

/// An algorithm as written in the config; parameters left out are filled in
/// from the experiment when it runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgorithmEntry {
    GpUcb,
    RGpUcb { block: Option<usize> },
    TvGpUcb { eps: Option<f64> },
    Random,
}

impl AlgorithmEntry {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let bad = || Error::Config(format!("bad algorithm parameter in {s:?}"));
        match (name, param) {
            ("gp-ucb", None) => Ok(AlgorithmEntry::GpUcb),
            ("random", None) => Ok(AlgorithmEntry::Random),
            ("r-gp-ucb", p) => {
                let block = p
                    .map(|p| p.parse::<usize>().map_err(|_| bad()))
                    .transpose()?;
                if block == Some(0) {
                    return Err(bad());
                }
                Ok(AlgorithmEntry::RGpUcb { block })
            }
            ("tv-gp-ucb", p) => {
                let eps = p.map(|p| p.parse::<f64>().map_err(|_| bad())).transpose()?;
                if eps.is_some_and(|e| !(0.0..=1.0).contains(&e)) {
                    return Err(bad());
                }
                Ok(AlgorithmEntry::TvGpUcb { eps })
            }
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Sensor IDs of the traffic-data preset.
pub const TRAFFIC_SENSOR_IDS: [u32; 50] = [
    0, 54, 69, 77, 169, 131, 262, 216, 34, 320, 308, 177, 130, 221, 290, 348, 25, 157, 252, 83,
    163, 149, 294, 21, 246, 45, 98, 74, 274, 237, 322, 29, 120, 44, 49, 241, 286, 99, 247, 297, 96,
    234, 236, 205, 329, 214, 28, 175, 65, 220,
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub grid_resolution: usize,
    pub grid_dim: usize,
    pub domain_size: f64,
    pub kernel: KernelChoice,
    pub lengthscale: f64,
    pub nu: f64,
    pub eps_true: f64,
    /// Noise of the environment.
    pub noise_var: f64,
    /// Noise assumed by the posteriors; defaults to `noise_var` with a floor.
    pub assumed_noise_var: Option<f64>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmEntry>,
    pub beta_c1: f64,
    pub beta_c2: f64,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// Noise added to replayed real readings; they are used as-is by default.
    pub observation_noise_var: f64,
    pub train_rows: Option<usize>,
    pub rows_per_day: Option<usize>,
    pub eps: EpsSetting,
    pub sensor_ids: Option<Vec<String>>,
    /// Bound and inequality-check inputs.
    pub block_size: Option<usize>,
    pub delta: f64,
    pub a0: f64,
    pub b0: f64,
    pub instances: usize,
}

/// Smallest assumed noise variance handed to a posterior.
pub const NOISE_FLOOR: f64 = 1e-6;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            grid_resolution: 30,
            grid_dim: 2,
            domain_size: 1.0,
            kernel: KernelChoice::SquaredExponential,
            lengthscale: 0.2,
            nu: 2.5,
            eps_true: 0.01,
            noise_var: 0.01,
            assumed_noise_var: None,
            horizon: 200,
            trials: 50,
            seed: 0,
            algorithms: vec![
                AlgorithmEntry::GpUcb,
                AlgorithmEntry::RGpUcb { block: None },
                AlgorithmEntry::TvGpUcb { eps: None },
                AlgorithmEntry::Random,
            ],
            beta_c1: 0.8,
            beta_c2: 4.0,
            out: None,
            data: None,
            observation_noise_var: 0.0,
            train_rows: None,
            rows_per_day: None,
            eps: EpsSetting::Fit,
            sensor_ids: None,
            block_size: None,
            delta: 0.1,
            a0: 1.0,
            b0: 1.0,
            instances: 200,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key}",
                    i + 1
                )));
            }
        }
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = entries.remove("preset") {
            cfg.apply_preset(&p)?;
        }
        for (key, value) in &entries {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    /// `temperature` and `traffic` reproduce the real-data settings.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        match name {
            "temperature" => {
                self.noise_var = 0.5;
                self.beta_c1 = 0.8;
                self.beta_c2 = 0.4;
                self.rows_per_day = Some(144);
                self.train_rows = Some(3 * 144);
                self.horizon = 2 * 144;
                self.trials = 20;
                self.eps = EpsSetting::Fit;
                self.algorithms = vec![
                    AlgorithmEntry::GpUcb,
                    AlgorithmEntry::RGpUcb { block: Some(15) },
                    AlgorithmEntry::TvGpUcb { eps: None },
                    AlgorithmEntry::Random,
                ];
            }
            "traffic" => {
                self.noise_var = 5.0;
                self.beta_c1 = 0.2;
                self.beta_c2 = 0.4;
                self.rows_per_day = Some(84);
                self.horizon = 84;
                self.trials = 20;
                self.eps = EpsSetting::Value(0.04);
                self.sensor_ids = Some(TRAFFIC_SENSOR_IDS.iter().map(u32::to_string).collect());
            }
            _ => return Err(Error::Config(format!("unknown preset {name:?}"))),
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => {
                self.mode = Some(
                    Mode::parse(value)
                        .ok_or_else(|| Error::Config(format!("unknown mode {value:?}")))?,
                )
            }
            "grid_resolution" => self.grid_resolution = num(key, value)?,
            "grid_dim" => self.grid_dim = num(key, value)?,
            "domain_size" => self.domain_size = num(key, value)?,
            "kernel" => {
                self.kernel = match value {
                    "se" | "squared-exponential" => KernelChoice::SquaredExponential,
                    "matern" => KernelChoice::Matern,
                    _ => return Err(Error::Config(format!("unknown kernel {value:?}"))),
                }
            }
            "lengthscale" => self.lengthscale = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "eps_true" => self.eps_true = num(key, value)?,
            "noise_var" => self.noise_var = num(key, value)?,
            "assumed_noise_var" => self.assumed_noise_var = Some(num(key, value)?),
            "horizon" => self.horizon = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "algorithms" => {
                self.algorithms = list(value)
                    .iter()
                    .map(|s| AlgorithmEntry::parse(s))
                    .collect::<Result<_>>()?
            }
            "beta_c1" => self.beta_c1 = num(key, value)?,
            "beta_c2" => self.beta_c2 = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "data" => self.data = Some(PathBuf::from(value)),
            "observation_noise_var" => self.observation_noise_var = num(key, value)?,
            "train_rows" => self.train_rows = Some(num(key, value)?),
            "rows_per_day" => self.rows_per_day = Some(num(key, value)?),
            "eps" => {
                self.eps = if value == "fit" {
                    EpsSetting::Fit
                } else {
                    EpsSetting::Value(num(key, value)?)
                }
            }
            "sensor_ids" => self.sensor_ids = Some(list(value)),
            "block_size" => self.block_size = Some(num(key, value)?),
            "delta" => self.delta = num(key, value)?,
            "a0" => self.a0 = num(key, value)?,
            "b0" => self.b0 = num(key, value)?,
            "instances" => self.instances = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 || self.horizon == 0 {
            return fail("trials and horizon must be at least 1");
        }
        if self.grid_resolution == 0 || self.grid_dim == 0 || !(self.domain_size > 0.0) {
            return fail("grid resolution, dimension and domain size must be positive");
        }
        if !(self.lengthscale > 0.0 && self.nu > 0.0) {
            return fail("lengthscale and nu must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_true) {
            return fail("eps_true must lie in [0, 1]");
        }
        if let EpsSetting::Value(e) = self.eps {
            if !(0.0..=1.0).contains(&e) {
                return fail("eps must lie in [0, 1] or be \"fit\"");
            }
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite())
            || !(self.observation_noise_var >= 0.0 && self.observation_noise_var.is_finite())
        {
            return fail("noise variances must be non-negative");
        }
        if self
            .assumed_noise_var
            .is_some_and(|v| !(v > 0.0 && v.is_finite()))
        {
            return fail("assumed_noise_var must be positive");
        }
        if !(self.beta_c1 > 0.0 && self.beta_c2 > 0.0) {
            return fail("beta_c1 and beta_c2 must be positive");
        }
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required");
        }
        if self.rows_per_day == Some(0) || self.block_size == Some(0) {
            return fail("rows_per_day and block_size must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0 && self.a0 > 0.0 && self.b0 > 0.0) {
            return fail("delta must lie in (0, 1); a0 and b0 must be positive");
        }
        if self.instances == 0 {
            return fail("instances must be at least 1");
        }
        Ok(())
    }

    /// Switches to the 50 x 50 grid and 200 trials of the full-size protocol.
    pub fn full_scale(&mut self) {
        self.grid_resolution = 50;
        self.trials = 200;
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        match self.kernel {
            KernelChoice::SquaredExponential => KernelSpec::squared_exponential(self.lengthscale),
            KernelChoice::Matern => KernelSpec::matern(self.lengthscale, self.nu),
        }
    }

    pub fn block_rule(&self) -> BlockRule {
        match self.kernel {
            KernelChoice::SquaredExponential => BlockRule::SquaredExponential,
            KernelChoice::Matern => BlockRule::Matern {
                nu: self.nu,
                dim: self.grid_dim,
            },
        }
    }

    pub fn beta_schedule(&self) -> BetaSchedule {
        BetaSchedule::Practical {
            c1: self.beta_c1,
            c2: self.beta_c2,
        }
    }

    pub fn assumed_noise(&self) -> f64 {
        self.assumed_noise_var
            .unwrap_or(self.noise_var.max(NOISE_FLOOR))
    }
}
