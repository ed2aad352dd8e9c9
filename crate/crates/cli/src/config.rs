//! Experiment configuration: defaults, flat key=value config files, and
//! command-line overrides, resolved into one struct that every output
//! file embeds verbatim in its header.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqalab_core::error::{Error, Result};
use vqalab_core::estimators::ShotBudget;
use vqalab_core::sim::{NoiseKind, NoiseModel};
use vqalab_core::surrogate::{StepMode, TrainConfig};
use vqalab_core::workflow::{RunConfig, RunMode};
use vqalab_core::zne::{FitModel, ZneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSpec {
    Maxcut3Reg,
    Sk,
    Tfim,
    Molecular,
}

impl std::str::FromStr for ProblemSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxcut3reg" => Ok(ProblemSpec::Maxcut3Reg),
            "sk" => Ok(ProblemSpec::Sk),
            "tfim" => Ok(ProblemSpec::Tfim),
            "molecular" => Ok(ProblemSpec::Molecular),
            other => Err(Error::invalid(format!("unknown problem kind `{other}`"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProblemSpec::Maxcut3Reg => "maxcut3reg",
            ProblemSpec::Sk => "sk",
            ProblemSpec::Tfim => "tfim",
            ProblemSpec::Molecular => "molecular",
        };
        f.write_str(s)
    }
}

/// Fully resolved experiment settings, embedded in every output header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub n: usize,
    pub p_layers: usize,
    pub instance_seed: u64,
    pub hamiltonian: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub mode: RunMode,
    pub t_init: usize,
    pub eta: f64,
    pub max_steps: usize,
    pub budget: Option<u64>,
    pub shots: ShotBudget,
    /// Shot budget for ZNE evaluations; falls back to `shots`.
    pub zne_shots: Option<ShotBudget>,
    pub noise_kind: NoiseKind,
    pub noise_strength: f64,
    pub lambdas: Vec<u64>,
    pub fit: FitModel,
    pub beta: f64,
    pub epochs: usize,
    /// Width of every surrogate hidden layer.
    pub hidden: usize,
    pub step_mode: StepMode,
    pub seed: u64,
    pub grid: usize,
    pub sigma: f64,
    pub radius: usize,
    pub axes: (usize, usize),
    pub study: String,
    pub levels: Vec<f64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let zne = ZneConfig::default();
        let train = TrainConfig::default();
        ExperimentConfig {
            problem: ProblemSpec::Maxcut3Reg,
            n: 8,
            p_layers: 2,
            instance_seed: 1,
            hamiltonian: None,
            template: None,
            mode: RunMode::Zne,
            t_init: 45,
            eta: 0.05,
            max_steps: 100,
            budget: None,
            shots: ShotBudget::Exact,
            zne_shots: None,
            noise_kind: NoiseKind::Dephasing,
            noise_strength: 1e-3,
            lambdas: zne.lambdas,
            fit: zne.fit,
            beta: train.beta,
            epochs: train.epochs,
            hidden: train.gru_hidden,
            step_mode: StepMode::Gradient,
            seed: 0,
            grid: 32,
            sigma: 2.0,
            radius: 4,
            axes: (0, 1),
            study: "rlf".into(),
            levels: vec![1e-6, 1e-5, 1e-4, 1e-3],
            out: PathBuf::from("out"),
        }
    }
}

fn parse_or<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("bad value `{v}` for key `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_or(key, s))
        .collect()
}

fn parse_shots(v: &str) -> Result<ShotBudget> {
    if v == "exact" {
        Ok(ShotBudget::Exact)
    } else {
        Ok(ShotBudget::Shots(parse_or("shots", v)?))
    }
}

impl ExperimentConfig {
    /// Apply one key=value pair (config-file line or flag).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = value.parse()?,
            "n" => self.n = parse_or(key, value)?,
            "p-layers" => self.p_layers = parse_or(key, value)?,
            "instance-seed" => self.instance_seed = parse_or(key, value)?,
            "hamiltonian" => self.hamiltonian = Some(PathBuf::from(value)),
            "template" => self.template = Some(PathBuf::from(value)),
            "mode" => {
                self.mode = match value {
                    "noisy" => RunMode::Noisy,
                    "zne" => RunMode::Zne,
                    "pidn" => RunMode::Pidn,
                    other => return Err(Error::invalid(format!("unknown mode `{other}`"))),
                }
            }
            "t-init" => self.t_init = parse_or(key, value)?,
            "eta" => self.eta = parse_or(key, value)?,
            "max-steps" => self.max_steps = parse_or(key, value)?,
            "budget" => self.budget = Some(parse_or(key, value)?),
            "shots" => self.shots = parse_shots(value)?,
            "zne-shots" | "zne.shots" => self.zne_shots = Some(parse_shots(value)?),
            "noise-kind" => {
                self.noise_kind = match value {
                    "none" => NoiseKind::None,
                    "dephasing" => NoiseKind::Dephasing,
                    "depolarizing" => NoiseKind::Depolarizing,
                    other => return Err(Error::invalid(format!("unknown noise kind `{other}`"))),
                }
            }
            "noise-strength" => self.noise_strength = parse_or(key, value)?,
            "lambdas" | "zne.lambdas" => self.lambdas = parse_list(key, value)?,
            "fit" | "zne.fit" => {
                self.fit = match value {
                    "linear" => FitModel::Linear,
                    "quadratic" => FitModel::Quadratic,
                    other => return Err(Error::invalid(format!("unknown fit model `{other}`"))),
                }
            }
            "beta" => self.beta = parse_or(key, value)?,
            "epochs" => self.epochs = parse_or(key, value)?,
            "hidden" => self.hidden = parse_or(key, value)?,
            "step-mode" => {
                self.step_mode = match value {
                    "gradient" => StepMode::Gradient,
                    "head" => StepMode::Head,
                    other => return Err(Error::invalid(format!("unknown step mode `{other}`"))),
                }
            }
            "seed" => self.seed = parse_or(key, value)?,
            "grid" => self.grid = parse_or(key, value)?,
            "sigma" => self.sigma = parse_or(key, value)?,
            "radius" => self.radius = parse_or(key, value)?,
            "axes" => {
                let ax: Vec<usize> = parse_list(key, value)?;
                if ax.len() != 2 {
                    return Err(Error::invalid("axes wants exactly two indices"));
                }
                self.axes = (ax[0], ax[1]);
            }
            "study" => self.study = value.to_string(),
            "levels" => self.levels = parse_list(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        if self.noise_kind == NoiseKind::None {
            Ok(NoiseModel::none())
        } else {
            NoiseModel::new(self.noise_kind, self.noise_strength)
        }
    }

    pub fn zne(&self) -> Result<ZneConfig> {
        ZneConfig::new(self.lambdas.clone(), self.fit, self.zne_shots.unwrap_or(self.shots))
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            beta: self.beta,
            epochs: self.epochs,
            gru_hidden: self.hidden,
            scalar_width: self.hidden,
            fusion_width: self.hidden,
            ..TrainConfig::default()
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let cfg = RunConfig {
            mode: self.mode,
            t_init: self.t_init,
            eta: self.eta,
            max_steps: self.max_steps,
            budget: self.budget,
            zne: self.zne()?,
            train: self.train(),
            noise: self.noise()?,
            shots: self.shots,
            seed: self.seed,
            step_mode: self.step_mode,
            init_theta: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Header block prepended (with a comment marker) to column outputs.
    pub fn header_lines(&self, format_tag: &str) -> String {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let json = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = json {
            for (k, v) in map {
                fields.insert(k, v.to_string());
            }
        }
        let mut out = format!("# format: {format_tag} v1\n");
        for (k, v) in fields {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }
}
