//! Run configuration. Every physical quantity is a string `"<value> <unit>"`
//! (units: au, ev, cm-1, kelvin/K, fs); loading resolves all defaults so the
//! echoed config fully determines a run.

use std::path::{Path, PathBuf};

use heom_core::models::Preset;
use heom_core::units::{Quantity, Unit};
use heom_core::UnitSystem;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{field, io, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: String,
    pub temperature: String,
    /// Pure-dephasing gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_corr: Option<f64>,
    /// `superposition` or `upper`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    /// Replaces the preset density of a pure-dephasing model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning_density: Option<DensityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_density: Option<DensityConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    /// Triples (p, Ω, Γ) in `unit`; p carries the fourth power of it.
    TannorMeier { unit: String, terms: Vec<[f64; 3]> },
    /// Two-column CSV `omega,J` in `unit`, `#` comments allowed.
    Tabulated { file: PathBuf, unit: String },
    /// LVC mode list `omega,coupling,unit`. With `broadening` the lines are
    /// turned into Lorentzians; without it the modes are used as they are.
    Lvc {
        file: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_modes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        broadening: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    TmFit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_fit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matsubara_terms: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_horizon: Option<String>,
    },
    TmMatsubara {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matsubara_terms: Option<usize>,
    },
    FreePole {
        /// Fixed rational degree; overrides the tolerance search.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<usize>,
        /// Target max |C_FP − C| / |C(0)| for the tolerance search.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_degree: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<String>,
    },
    Discrete {
        modes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_max: Option<String>,
    },
    ChainDense {
        sites: usize,
        fock_dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_min: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_max: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitude_budget: Option<usize>,
    },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::TmFit { .. } => "tm_fit",
            MethodConfig::TmMatsubara { .. } => "tm_matsubara",
            MethodConfig::FreePole { .. } => "free_pole",
            MethodConfig::Discrete { .. } => "discrete",
            MethodConfig::ChainDense { .. } => "chain_dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_mode_cap: Option<usize>,
    /// `unscaled` or `sqrt_scaled`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<String>,
    /// Ceiling on stored complex elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget: Option<u64>,
}

fn default_depth() -> usize {
    3
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            depth: default_depth(),
            per_mode_cap: None,
            scaling: None,
            memory_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "default_t_end")]
    pub t_end: String,
    #[serde(default = "default_output_every")]
    pub output_every: String,
    /// `rk4` or `rk45`.
    #[serde(default = "default_integrator")]
    pub integrator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default)]
    pub layer_norms: bool,
}

fn default_t_end() -> String {
    "500 fs".into()
}

fn default_output_every() -> String {
    "5 fs".into()
}

fn default_integrator() -> String {
    "rk4".into()
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            output_every: default_output_every(),
            integrator: default_integrator(),
            dt: None,
            rtol: None,
            atol: None,
            layer_norms: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Also write a gnuplot script next to the observables.
    #[serde(default)]
    pub gnuplot: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            name: None,
            gnuplot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub depths: Vec<usize>,
}

pub const RK45_RTOL: f64 = 1e-8;
pub const RK45_ATOL: f64 = 1e-10;

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in [
            &mut cfg.model.density,
            &mut cfg.model.tuning_density,
            &mut cfg.model.coupling_density,
        ]
        .into_iter()
        .flatten()
        {
            match d {
                DensityConfig::Tabulated { file, .. } | DensityConfig::Lvc { file, .. } if file.is_relative() => {
                    *file = base.join(&*file);
                }
                _ => {}
            }
        }
        if cfg.output.name.is_none() {
            cfg.output.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn preset(&self) -> Result<Preset> {
        self.model
            .preset
            .parse()
            .map_err(|e: heom_core::Error| field("model.preset", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML text, with the output directory
    /// blanked so relocated reruns share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_name(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| "run".into())
    }
}

fn quantity(name: &str, text: &str) -> Result<Quantity> {
    text.parse::<Quantity>().map_err(|e| field(name, e.to_string()))
}

pub fn energy(name: &str, text: &str) -> Result<f64> {
    let q = quantity(name, text)?;
    UnitSystem::default()
        .energy_to_au(q.value, q.unit)
        .map_err(|e| field(name, e.to_string()))
}

pub fn time(name: &str, text: &str) -> Result<f64> {
    let q = quantity(name, text)?;
    UnitSystem::default()
        .time_to_au(q.value, q.unit)
        .map_err(|e| field(name, e.to_string()))
}

pub fn temperature(name: &str, text: &str) -> Result<f64> {
    let q = quantity(name, text)?;
    let k = UnitSystem::default()
        .temperature_to_kelvin(q.value, q.unit)
        .map_err(|e| field(name, e.to_string()))?;
    if !(k >= 0.0) {
        return Err(field(name, format!("temperature must be >= 0 K (got {k})")));
    }
    Ok(k)
}

/// Energy unit for unit-tagged numeric tables.
pub fn energy_unit(name: &str, text: &str) -> Result<f64> {
    let unit: Unit = text.parse().map_err(|e: heom_core::Error| field(name, e.to_string()))?;
    if unit == Unit::Kelvin || unit == Unit::Fs {
        return Err(field(name, format!("'{unit}' is not a spectroscopic energy unit")));
    }
    UnitSystem::default()
        .energy_to_au(1.0, unit)
        .map_err(|e| field(name, e.to_string()))
}

/// `a.u.` time rendered back as a quantity string.
pub fn fmt_time(t_au: f64) -> String {
    format!("{t_au:e} au")
}

pub fn fmt_energy(e_au: f64) -> String {
    format!("{e_au:e} au")
}
