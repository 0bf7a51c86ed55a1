//! Scenario files: TOML with fixed sections, every key typed and unknown
//! keys rejected.
//!
//! ```toml
//! subcommand = "lindblad"
//!
//! [params]
//! mass = 1.0
//! temperature = 5.0
//! gamma = 0.05
//!
//! [model]
//! ncut = 4
//! states = [[2, 0, 0]]
//!
//! [run]
//! t_final = 10.0
//! ```

use std::path::{Path, PathBuf};

use gravdamp_core::langevin::Potential;
use gravdamp_core::master::Method;
use gravdamp_core::{PhysicalParams, Units};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Lindblad,
    Rates,
    Langevin,
    Classical,
    Kernels,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Lindblad => "lindblad",
            Subcommand::Rates => "rates",
            Subcommand::Langevin => "langevin",
            Subcommand::Classical => "classical",
            Subcommand::Kernels => "kernels",
            Subcommand::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub kernels: KernelsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub mass: f64,
    #[serde(default)]
    pub temperature: f64,
    /// Give exactly one of `gamma` and `eps2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    #[serde(default)]
    pub units: UnitsSection,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            mass: 1.0,
            temperature: 1.0,
            gamma: Some(0.05),
            eps2: None,
            units: UnitsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    pub hbar: f64,
    pub c: f64,
    pub kb: f64,
}

impl Default for UnitsSection {
    fn default() -> Self {
        let u = Units::natural();
        UnitsSection {
            hbar: u.hbar,
            c: u.c,
            kb: u.kb,
        }
    }
}

impl ParamsSection {
    pub fn build(&self) -> Result<PhysicalParams> {
        let units = Units {
            hbar: self.units.hbar,
            c: self.units.c,
            kb: self.units.kb,
        };
        match (self.gamma, self.eps2) {
            (Some(g), None) => Ok(PhysicalParams::with_units(self.mass, self.temperature, 1.0, units)?
                .with_gamma(g)?),
            (None, Some(e)) => Ok(PhysicalParams::with_units(self.mass, self.temperature, e, units)?),
            _ => Err(CliError::Invalid(
                "[params] needs exactly one of `gamma` and `eps2`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub ncut: usize,
    pub omega: f64,
    /// Occupation triples; empty means every state the scenario can handle.
    pub states: Vec<[u32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<[f64; 3]>,
    pub potential: PotentialSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            ncut: 4,
            omega: 1.0,
            states: Vec::new(),
            x0: None,
            v0: None,
            potential: PotentialSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Harmonic { omega: f64 },
    KeplerSoftened { mu: f64, softening: f64 },
    Polynomial { terms: Vec<PolyTerm> },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Harmonic { omega: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coef: f64,
    pub powers: [u32; 3],
}

impl PotentialSpec {
    pub fn build(&self) -> Potential {
        match self {
            PotentialSpec::Harmonic { omega } => Potential::Harmonic { omega: *omega },
            PotentialSpec::KeplerSoftened { mu, softening } => Potential::KeplerSoftened {
                mu: *mu,
                softening: *softening,
            },
            PotentialSpec::Polynomial { terms } => Potential::Polynomial {
                terms: terms.iter().map(|t| (t.coef, t.powers)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Lindblad,
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    #[default]
    Rk4,
    Expm,
}

impl From<MethodSpec> for Method {
    fn from(m: MethodSpec) -> Method {
        match m {
            MethodSpec::Rk4 => Method::Rk4,
            MethodSpec::Expm => Method::Expm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub n_trajectories: usize,
    pub seed: u64,
    pub sample_every: usize,
    pub method: MethodSpec,
    pub generator: GeneratorKind,
    pub quantum_correction: bool,
    pub quad_degree: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            dt: None,
            t_final: None,
            n_trajectories: 1,
            seed: 0,
            sample_every: 10,
            method: MethodSpec::Rk4,
            generator: GeneratorKind::Lindblad,
            quantum_correction: false,
            quad_degree: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsSection {
    /// Temperatures to tabulate; empty means `[params] temperature`.
    #[serde(default)]
    pub temperatures: Vec<f64>,
    /// UV cutoff in units of `k_B T/ħ`.
    #[serde(default = "default_cutoff_factor")]
    pub cutoff_factor: f64,
}

fn default_cutoff_factor() -> f64 {
    20.0
}

impl Default for KernelsSection {
    fn default() -> Self {
        KernelsSection {
            temperatures: Vec::new(),
            cutoff_factor: default_cutoff_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
